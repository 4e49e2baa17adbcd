"""
Sampled tests against normal cones.
"""
from typing import List, Optional

import numpy as np

from almlab.errors import InfeasiblePointError
from almlab.linalg import as_vector
from almlab.sets.base import ConvexSet, SamplePlan

FEASIBILITY_TOL = 1e-8
PROBE_SCALES = (1.0, 1e-1, 1e-2, 1e-3)


def sample_points(K: ConvexSet, plan: SamplePlan, anchor=None) -> List[np.ndarray]:
    return K.sample(plan, anchor)


def normal_cone_residual(K: ConvexSet, anchor, lam, plan: Optional[SamplePlan] = None) -> float:
    """
    max over sampled zeta in K of <lam, zeta - anchor>.

    The anchor itself and the projections of anchor +/- s e_i are always
    included, so the result is non-negative; zero means lam passed every
    sampled test of lam in N(anchor, K).
    """
    plan = plan or SamplePlan()
    anchor = as_vector(anchor, "anchor", K.dim)
    lam = as_vector(lam, "multiplier", K.dim)
    if not K.contains(anchor, FEASIBILITY_TOL):
        raise InfeasiblePointError(
            "anchor point is not in the set",
            {"distance": K.distance(anchor)},
        )
    points = K.sample(plan, anchor)
    eye = np.eye(K.dim)
    for scale in PROBE_SCALES:
        for i in range(K.dim):
            points.append(K.project(anchor + scale * eye[i]))
            points.append(K.project(anchor - scale * eye[i]))
    values = [float(lam @ (z - anchor)) for z in points]
    return max([0.0] + values)


def normal_cone_candidates(K: ConvexSet, point, count: int = 100, seed: int = 0) -> List[np.ndarray]:
    """Generators of N(point, K) followed by seeded conic combinations of them."""
    point = as_vector(point, "point", K.dim)
    generators = K.normal_generators(point)
    if not generators:
        return []
    candidates = [g.copy() for g in generators]
    if len(generators) > 1:
        G = np.column_stack(generators)
        rng = np.random.default_rng(seed)
        for _ in range(count):
            candidates.append(G @ rng.uniform(0.0, 1.0, len(generators)))
    return candidates
