"""
Small closed-form instances used by the example runner and the tests.

All share theta(u) = 1/2 ((x1 - alpha)^2 + x2^2) on R^2 with
S = [[1, 0], [0, 0]] except the two-row toy problem.
"""
import numpy as np

from almlab.linalg import DenseOperator
from almlab.problem import ModelProblem, QuadraticObjective
from almlab.sets import Ball, ConvexSet, Halfspace, Intersection, Singleton

PROJECTOR = [[1.0, 0.0], [0.0, 0.0]]


def planar_objective(alpha: float) -> QuadraticObjective:
    return QuadraticObjective(np.eye(2), [alpha, 0.0], 0.5 * alpha ** 2)


def tangent_disc() -> ConvexSet:
    """Unit disc centred at (0, 1); touches range(S) only at the origin."""
    return Ball([0.0, 1.0], 1.0)


def tangent_wedge() -> ConvexSet:
    """The tangent disc cut by zeta1 - zeta2 <= 0."""
    return Intersection([Ball([0.0, 1.0], 1.0), Halfspace([1.0, -1.0], 0.0)])


def tangent_problem(alpha: float, wedge: bool = False) -> ModelProblem:
    K = tangent_wedge() if wedge else tangent_disc()
    return ModelProblem(planar_objective(alpha), DenseOperator(PROJECTOR), K, feasible_witness=np.zeros(2))


def offset_disc(r: float) -> ConvexSet:
    return Ball([r, 0.0], r)


def half_disc(r: float) -> ConvexSet:
    """The offset disc restricted to zeta2 >= 0."""
    return Intersection([Ball([r, 0.0], r), Halfspace([0.0, -1.0], 0.0)])


def offset_problem(alpha: float, r: float, half: bool = False) -> ModelProblem:
    K = half_disc(r) if half else offset_disc(r)
    return ModelProblem(planar_objective(alpha), DenseOperator(PROJECTOR), K, feasible_witness=np.zeros(2))


def toy_problem() -> ModelProblem:
    """min x^2 / 2 s.t. (x, 2x) = (1, 2); the multiplier set is lam1 + 2 lam2 = -1."""
    return ModelProblem(
        QuadraticObjective([[1.0]], [0.0], 0.0),
        DenseOperator([[1.0], [2.0]]),
        Singleton([1.0, 2.0]),
    )
