from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from almlab.linalg import as_vector

PROJECTION_TOL = 1e-12
MEMBERSHIP_TOL = 1e-9

# Scales for points pushed from the anchor towards the boundary
BOUNDARY_SCALES = (1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


@dataclass(frozen=True)
class SamplePlan:
    """How to draw points from a set"""
    count: int = 64
    seed: int = 0
    strategy: str = "boundary-biased"
    radius: float = 1.0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("sample count must be at least 1")
        if self.strategy not in ("uniform", "boundary-biased"):
            raise ValueError(f"Unknown sampling strategy: {self.strategy}. Available strategies: uniform, boundary-biased")
        if self.radius <= 0:
            raise ValueError("sampling radius must be positive")


class ConvexSet(ABC):
    """Abstract base class for closed convex sets with an exact or iterative projection"""

    type_name: str = ""

    @property
    @abstractmethod
    def dim(self) -> int:
        pass

    @abstractmethod
    def project(self, x, tol: float = PROJECTION_TOL) -> np.ndarray:
        """
        Euclidean projection onto the set.

        Args:
            x: Point of matching dimension
            tol: Stopping tolerance for iterative projections

        Returns:
            Nearest point of the set
        """
        pass

    @abstractmethod
    def bounding_box(self, anchor: np.ndarray, radius: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        Finite box used for uniform sampling.

        Unbounded directions are replaced by anchor +/- radius.
        """
        pass

    @abstractmethod
    def normal_generators(self, point: np.ndarray, tol: float = MEMBERSHIP_TOL) -> List[np.ndarray]:
        """
        Directions whose conic hull is the normal cone at a point of the set.

        Interior points have no generators.
        """
        pass

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        pass

    def box_bounds(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """(lo, hi) when the set is a coordinate box, else None."""
        return None

    def singleton_point(self) -> Optional[np.ndarray]:
        """The only element when the set is a single point, else None."""
        return None

    def _vector(self, x) -> np.ndarray:
        return as_vector(x, f"{self.type_name} argument", self.dim)

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = self._vector(x)
        return bool(np.linalg.norm(x - self.project(x)) <= tol)

    def distance(self, x) -> float:
        x = self._vector(x)
        return float(np.linalg.norm(x - self.project(x)))

    def sample(self, plan: SamplePlan, anchor=None) -> List[np.ndarray]:
        """
        Seeded points of the set.

        Uniform draws from the bounding box are projected onto the set. The
        boundary-biased strategy spends half the budget on the projections
        of anchor + scale * direction for random unit directions, so the
        region near the anchor is covered at every scale.
        """
        rng = np.random.default_rng(plan.seed)
        if anchor is None:
            anchor = self.project(np.zeros(self.dim))
        anchor = self._vector(anchor)
        lo, hi = self.bounding_box(anchor, plan.radius)

        if plan.strategy == "uniform":
            n_uniform, n_boundary = plan.count, 0
        else:
            n_boundary = plan.count // 2
            n_uniform = plan.count - n_boundary

        points = [self.project(rng.uniform(lo, hi)) for _ in range(n_uniform)]
        for i in range(n_boundary):
            direction = rng.standard_normal(self.dim)
            norm = np.linalg.norm(direction)
            if norm > 0:
                direction /= norm
            scale = BOUNDARY_SCALES[i % len(BOUNDARY_SCALES)]
            points.append(self.project(anchor + scale * plan.radius * direction))
        return points
