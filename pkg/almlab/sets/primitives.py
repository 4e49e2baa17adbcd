"""
Sets with closed-form projections.
"""
from typing import Any, Dict, List, Optional

import numpy as np

from almlab.errors import DimensionMismatchError, InvalidProblemError
from almlab.linalg import as_vector
from almlab.sets.base import ConvexSet, MEMBERSHIP_TOL, PROJECTION_TOL


def _bounds_from_json(values) -> np.ndarray:
    return np.array([np.nan if v is None else float(v) for v in values], dtype=np.float64)


def _bounds_to_json(values: np.ndarray) -> List[Optional[float]]:
    return [None if np.isinf(v) else float(v) for v in values]


class Box(ConvexSet):
    """{x : lo <= x <= hi}, bounds may be infinite"""

    type_name = "box"

    def __init__(self, lo, hi):
        lo = np.asarray(lo, dtype=np.float64).reshape(-1)
        hi = np.asarray(hi, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatchError("box bounds differ in length", {"lo": lo.size, "hi": hi.size})
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise InvalidProblemError("box bounds must not be NaN")
        if np.any(lo > hi):
            raise InvalidProblemError("box requires lo <= hi")
        self.lo = lo
        self.hi = hi

    @classmethod
    def whole_space(cls, dim: int) -> "Box":
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def project(self, x, tol: float = PROJECTION_TOL) -> np.ndarray:
        return np.clip(self._vector(x), self.lo, self.hi)

    def bounding_box(self, anchor, radius):
        lo = np.where(np.isfinite(self.lo), self.lo, anchor - radius)
        hi = np.where(np.isfinite(self.hi), self.hi, anchor + radius)
        return lo, np.maximum(lo, hi)

    def normal_generators(self, point, tol=MEMBERSHIP_TOL):
        point = self._vector(point)
        gens = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            if np.isfinite(self.hi[i]) and point[i] >= self.hi[i] - tol:
                gens.append(e)
            if np.isfinite(self.lo[i]) and point[i] <= self.lo[i] + tol:
                gens.append(-e)
        return gens

    def box_bounds(self):
        return self.lo, self.hi

    def singleton_point(self):
        return self.lo.copy() if np.array_equal(self.lo, self.hi) else None

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.type_name, "lo": _bounds_to_json(self.lo), "hi": _bounds_to_json(self.hi)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Box":
        lo = _bounds_from_json(data["lo"])
        hi = _bounds_from_json(data["hi"])
        return cls(np.where(np.isnan(lo), -np.inf, lo), np.where(np.isnan(hi), np.inf, hi))


class Singleton(ConvexSet):
    type_name = "singleton"

    def __init__(self, point):
        self.point = as_vector(point, "singleton point")

    @property
    def dim(self) -> int:
        return self.point.shape[0]

    def project(self, x, tol: float = PROJECTION_TOL) -> np.ndarray:
        self._vector(x)
        return self.point.copy()

    def bounding_box(self, anchor, radius):
        return self.point.copy(), self.point.copy()

    def normal_generators(self, point, tol=MEMBERSHIP_TOL):
        # Normal cone is the whole space
        eye = np.eye(self.dim)
        return [eye[i] for i in range(self.dim)] + [-eye[i] for i in range(self.dim)]

    def singleton_point(self):
        return self.point.copy()

    def box_bounds(self):
        return self.point.copy(), self.point.copy()

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.type_name, "point": self.point.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Singleton":
        return cls(data["point"])


class Halfspace(ConvexSet):
    """{x : <a, x> <= b}"""

    type_name = "halfspace"

    def __init__(self, normal, offset: float):
        self.normal = as_vector(normal, "halfspace normal")
        if np.linalg.norm(self.normal) == 0.0:
            raise InvalidProblemError("halfspace normal must be nonzero")
        self.offset = float(offset)

    @property
    def dim(self) -> int:
        return self.normal.shape[0]

    def project(self, x, tol: float = PROJECTION_TOL) -> np.ndarray:
        x = self._vector(x)
        excess = float(self.normal @ x) - self.offset
        if excess <= 0.0:
            return x
        return x - (excess / float(self.normal @ self.normal)) * self.normal

    def bounding_box(self, anchor, radius):
        return anchor - radius, anchor + radius

    def normal_generators(self, point, tol=MEMBERSHIP_TOL):
        point = self._vector(point)
        if abs(float(self.normal @ point) - self.offset) <= tol * max(1.0, np.linalg.norm(self.normal)):
            return [self.normal.copy()]
        return []

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.type_name, "normal": self.normal.tolist(), "offset": self.offset}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Halfspace":
        return cls(data["normal"], data["offset"])


class Ball(ConvexSet):
    """Closed Euclidean ball"""

    type_name = "ball"

    def __init__(self, center, radius: float):
        self.center = as_vector(center, "ball center")
        self.radius = float(radius)
        if not np.isfinite(self.radius) or self.radius < 0:
            raise InvalidProblemError("ball radius must be finite and non-negative")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def project(self, x, tol: float = PROJECTION_TOL) -> np.ndarray:
        x = self._vector(x)
        offset = x - self.center
        dist = np.linalg.norm(offset)
        if dist <= self.radius:
            return x
        return self.center + (self.radius / dist) * offset

    def bounding_box(self, anchor, radius):
        return self.center - self.radius, self.center + self.radius

    def normal_generators(self, point, tol=MEMBERSHIP_TOL):
        point = self._vector(point)
        if self.radius == 0.0:
            eye = np.eye(self.dim)
            return [eye[i] for i in range(self.dim)] + [-eye[i] for i in range(self.dim)]
        offset = point - self.center
        if np.linalg.norm(offset) >= self.radius - tol:
            return [offset / self.radius]
        return []

    def singleton_point(self):
        return self.center.copy() if self.radius == 0.0 else None

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.type_name, "center": self.center.tolist(), "radius": self.radius}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Ball":
        return cls(data["center"], data["radius"])

