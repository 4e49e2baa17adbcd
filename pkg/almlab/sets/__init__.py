from typing import Any, Dict

from .base import ConvexSet, SamplePlan, MEMBERSHIP_TOL, PROJECTION_TOL
from .primitives import Ball, Box, Halfspace, Singleton
from .combinators import Intersection, Product, Shift
from .cones import normal_cone_candidates, normal_cone_residual, sample_points


def set_from_dict(data: Dict[str, Any]) -> ConvexSet:
    """
    Build a set from its JSON description.

    The "type" key selects the kind; composite kinds nest their members.
    """
    set_map = {
        "box": Box.from_dict,
        "singleton": Singleton.from_dict,
        "halfspace": Halfspace.from_dict,
        "ball": Ball.from_dict,
        "shift": lambda d: Shift(set_from_dict(d["inner"]), d["offset"]),
        "product": lambda d: Product([set_from_dict(f) for f in d["factors"]]),
        "intersection": lambda d: Intersection([set_from_dict(m) for m in d["members"]]),
    }

    kind = data.get("type")
    builder = set_map.get(kind)
    if builder is None:
        raise ValueError(
            f"Unknown set type: {kind}. "
            f"Available set types: {', '.join(set_map.keys())}"
        )

    return builder(data)


def contains(K: ConvexSet, x, tol: float = MEMBERSHIP_TOL) -> bool:
    return K.contains(x, tol)


def project(K: ConvexSet, x, tol: float = PROJECTION_TOL):
    return K.project(x, tol)


__all__ = [
    "ConvexSet", "SamplePlan", "Ball", "Box", "Halfspace", "Singleton",
    "Intersection", "Product", "Shift", "set_from_dict", "contains", "project",
    "sample_points", "normal_cone_residual", "normal_cone_candidates",
]
