"""
Sets built from other sets: translation, Cartesian product and intersection.
"""
from typing import Any, Dict, List

import numpy as np

from almlab.errors import DimensionMismatchError, InvalidProblemError, ProjectionConvergenceError
from almlab.linalg import as_vector
from almlab.sets.base import ConvexSet, MEMBERSHIP_TOL, PROJECTION_TOL, SamplePlan

DYKSTRA_MAX_SWEEPS = 10000
# Member gap after the full budget, relative to halfway, below which a slow run is accepted
DYKSTRA_GAP_DECAY = 0.9


class Shift(ConvexSet):
    """inner + offset"""

    type_name = "shift"

    def __init__(self, inner: ConvexSet, offset):
        self.inner = inner
        self.offset = as_vector(offset, "shift offset", inner.dim)

    @property
    def dim(self) -> int:
        return self.inner.dim

    def project(self, x, tol: float = PROJECTION_TOL) -> np.ndarray:
        x = self._vector(x)
        return self.inner.project(x - self.offset, tol) + self.offset

    def bounding_box(self, anchor, radius):
        lo, hi = self.inner.bounding_box(anchor - self.offset, radius)
        return lo + self.offset, hi + self.offset

    def normal_generators(self, point, tol=MEMBERSHIP_TOL):
        return self.inner.normal_generators(self._vector(point) - self.offset, tol)

    def sample(self, plan: SamplePlan, anchor=None) -> List[np.ndarray]:
        inner_anchor = None if anchor is None else self._vector(anchor) - self.offset
        return [p + self.offset for p in self.inner.sample(plan, inner_anchor)]

    def box_bounds(self):
        bounds = self.inner.box_bounds()
        if bounds is None:
            return None
        return bounds[0] + self.offset, bounds[1] + self.offset

    def singleton_point(self):
        point = self.inner.singleton_point()
        return None if point is None else point + self.offset

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.type_name, "inner": self.inner.to_dict(), "offset": self.offset.tolist()}


class Product(ConvexSet):
    """K_1 x K_2 x ..., blocks in order"""

    type_name = "product"

    def __init__(self, factors: List[ConvexSet]):
        if not factors:
            raise InvalidProblemError("product needs at least one factor")
        self.factors = list(factors)
        self._offsets = np.cumsum([0] + [f.dim for f in self.factors])

    @property
    def dim(self) -> int:
        return int(self._offsets[-1])

    def _split(self, x: np.ndarray) -> List[np.ndarray]:
        return [x[int(a):int(b)] for a, b in zip(self._offsets[:-1], self._offsets[1:])]

    def project(self, x, tol: float = PROJECTION_TOL) -> np.ndarray:
        parts = self._split(self._vector(x))
        return np.concatenate([f.project(p, tol) for f, p in zip(self.factors, parts)])

    def bounding_box(self, anchor, radius):
        boxes = [f.bounding_box(a, radius) for f, a in zip(self.factors, self._split(anchor))]
        return np.concatenate([b[0] for b in boxes]), np.concatenate([b[1] for b in boxes])

    def normal_generators(self, point, tol=MEMBERSHIP_TOL):
        gens = []
        for factor, part, start in zip(self.factors, self._split(self._vector(point)), self._offsets[:-1]):
            for g in factor.normal_generators(part, tol):
                padded = np.zeros(self.dim)
                padded[int(start):int(start) + factor.dim] = g
                gens.append(padded)
        return gens

    def box_bounds(self):
        bounds = [f.box_bounds() for f in self.factors]
        if any(b is None for b in bounds):
            return None
        return np.concatenate([b[0] for b in bounds]), np.concatenate([b[1] for b in bounds])

    def singleton_point(self):
        points = [f.singleton_point() for f in self.factors]
        if any(p is None for p in points):
            return None
        return np.concatenate(points)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.type_name, "factors": [f.to_dict() for f in self.factors]}


class Intersection(ConvexSet):
    """
    Intersection of sets of equal dimension.

    Projection runs Dykstra's alternating algorithm until a sweep moves the
    iterate by at most tol (1 + ||x||). A run that exhausts its sweeps is
    accepted while the distance to the members is still shrinking, which is
    the sublinear regime of tangential intersections; a gap that has levelled
    off means the intersection is empty.
    """

    type_name = "intersection"

    def __init__(self, members: List[ConvexSet], max_sweeps: int = DYKSTRA_MAX_SWEEPS):
        if not members:
            raise InvalidProblemError("intersection needs at least one member")
        dims = {m.dim for m in members}
        if len(dims) != 1:
            raise DimensionMismatchError("intersection members differ in dimension", {"dims": sorted(dims)})
        self.members = list(members)
        self.max_sweeps = max_sweeps

    @property
    def dim(self) -> int:
        return self.members[0].dim

    def project(self, x, tol: float = PROJECTION_TOL) -> np.ndarray:
        x = self._vector(x).copy()
        if len(self.members) == 1:
            return self.members[0].project(x, tol)
        increments = [np.zeros(self.dim) for _ in self.members]
        halfway_gap = np.inf
        for sweep in range(1, self.max_sweeps + 1):
            previous = x
            for i, member in enumerate(self.members):
                y = member.project(x + increments[i], tol)
                increments[i] = x + increments[i] - y
                x = y
            scale = 1.0 + np.linalg.norm(x)
            if np.linalg.norm(x - previous) <= tol * scale:
                gap = self._gap(x, tol)
                if gap <= MEMBERSHIP_TOL * scale:
                    return x
                raise ProjectionConvergenceError(
                    "Dykstra iterates settled outside a member; the intersection is empty",
                    {"last_iterate": x.tolist(), "sweeps": sweep, "gap": gap},
                )
            if sweep == self.max_sweeps // 2:
                halfway_gap = self._gap(x, tol)
        gap = self._gap(x, tol)
        if np.isfinite(halfway_gap) and gap <= DYKSTRA_GAP_DECAY * halfway_gap:
            return x
        raise ProjectionConvergenceError(
            "Dykstra projection did not converge; the intersection may be empty",
            {"last_iterate": x.tolist(), "sweeps": self.max_sweeps, "gap": gap},
        )

    def _gap(self, x, tol) -> float:
        """Largest distance from x to a member."""
        return max(float(np.linalg.norm(x - m.project(x, tol))) for m in self.members)

    def bounding_box(self, anchor, radius):
        boxes = [m.bounding_box(anchor, radius) for m in self.members]
        lo = np.max([b[0] for b in boxes], axis=0)
        hi = np.min([b[1] for b in boxes], axis=0)
        if np.any(lo > hi):
            return boxes[0]
        return lo, hi

    def normal_generators(self, point, tol=MEMBERSHIP_TOL):
        # Sum of member cones; exact under a qualification between members
        gens = []
        for member in self.members:
            gens.extend(member.normal_generators(point, tol))
        return gens

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.type_name, "members": [m.to_dict() for m in self.members]}
