import json

import numpy as np
import pytest

from almlab.instances import offset_problem, tangent_problem, toy_problem
from almlab.linalg import DenseOperator
from almlab.problem import ModelProblem, QuadraticObjective
from almlab.sets import Box, SamplePlan


@pytest.fixture
def plan():
    """Sampling plan used across diagnostics tests"""
    return SamplePlan(count=64, seed=0)


@pytest.fixture
def toy():
    """min x^2/2 s.t. (x, 2x) = (1, 2)"""
    return toy_problem()


@pytest.fixture
def tangent():
    """Planar problem over the disc tangent to range(S), alpha = 1"""
    return tangent_problem(1.0)


@pytest.fixture
def offset():
    """Planar problem over the disc centred at (r, 0), alpha = 1, r = 0.25"""
    return offset_problem(1.0, 0.25)


@pytest.fixture
def box_qp():
    """min 1/2 ||u - (2, -2, 0.5)||^2 s.t. u in [-1, 1]^3; solution (1, -1, 0.5)"""
    target = np.array([2.0, -2.0, 0.5])
    objective = QuadraticObjective(np.eye(3), target, 0.5 * float(target @ target))
    return ModelProblem(objective, DenseOperator(np.eye(3)), Box(-np.ones(3), np.ones(3)), np.zeros(3))


@pytest.fixture
def toy_document():
    """Problem file content for the toy problem"""
    return {
        "objective": {"Q": [[1.0]], "b": [0.0], "c": 0.0},
        "operator": {"kind": "dense", "matrix": [[1.0], [2.0]]},
        "set": {"type": "singleton", "point": [1.0, 2.0]},
    }


@pytest.fixture
def toy_file(tmp_path, toy_document):
    """Toy problem written to disk"""
    path = tmp_path / "toy.json"
    path.write_text(json.dumps(toy_document), encoding="utf-8")
    return path
