"""
Linear operators and dense linear algebra helpers.

Operators come in three kinds: dense matrices, the inverse of a symmetric
positive definite tridiagonal matrix (kept factorized, never formed), and
vertical stacks of operators sharing a domain.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
import scipy.linalg

from almlab.errors import (
    DimensionMismatchError,
    InvalidProblemError,
    NotPositiveDefiniteError,
    SpectralConvergenceError,
)

DEFAULT_RANK_TOL = 1e-10
SYMMETRY_TOL = 1e-12


def as_vector(x, name: str = "vector", dim: Optional[int] = None) -> np.ndarray:
    """Coerce to a finite 1-D float64 array, optionally of a fixed length."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionMismatchError(f"{name} must be one-dimensional", {"shape": list(v.shape)})
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatchError(
            f"{name} has length {v.shape[0]}, expected {dim}",
            {"expected": dim, "actual": int(v.shape[0])},
        )
    if not np.all(np.isfinite(v)):
        raise InvalidProblemError(f"{name} contains non-finite entries")
    return v


def check_symmetric(A: np.ndarray, name: str = "matrix") -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"{name} must be square", {"shape": list(A.shape)})
    scale = max(1.0, float(np.max(np.abs(A))) if A.size else 1.0)
    if np.max(np.abs(A - A.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise InvalidProblemError(f"{name} must be symmetric")


class LinearOperator(ABC):
    """Bounded linear map S: U -> X with its adjoint"""

    @property
    @abstractmethod
    def shape(self) -> Tuple[int, int]:
        """(dim X, dim U)"""
        pass

    @abstractmethod
    def _matvec(self, v: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def _rmatvec(self, w: np.ndarray) -> np.ndarray:
        pass

    def apply(self, v, adjoint: bool = False) -> np.ndarray:
        rows, cols = self.shape
        if adjoint:
            return self._rmatvec(as_vector(v, "adjoint argument", rows))
        return self._matvec(as_vector(v, "operator argument", cols))

    def to_dense(self) -> np.ndarray:
        return self._dense

    @cached_property
    def _dense(self) -> np.ndarray:
        cols = self.shape[1]
        eye = np.eye(cols)
        return np.column_stack([self._matvec(eye[:, j]) for j in range(cols)]) if cols else np.zeros(self.shape)

    def gram_dense(self) -> np.ndarray:
        """S*S as a dense matrix."""
        D = self.to_dense()
        G = D.T @ D
        return 0.5 * (G + G.T)


class DenseOperator(LinearOperator):
    def __init__(self, matrix):
        M = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        if M.ndim != 2:
            raise DimensionMismatchError("dense operator must be a matrix", {"shape": list(M.shape)})
        if not np.all(np.isfinite(M)):
            raise InvalidProblemError("dense operator contains non-finite entries")
        self.matrix = M

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    def _matvec(self, v):
        return self.matrix @ v

    def _rmatvec(self, w):
        return self.matrix.T @ w

    def to_dense(self) -> np.ndarray:
        return self.matrix


class TridiagonalInverseOperator(LinearOperator):
    """
    T^{-1} for a symmetric positive definite tridiagonal T.

    T is stored by its diagonal and off-diagonal and factorized once with a
    banded Cholesky; applying the operator is a banded solve. The operator
    is self-adjoint.
    """

    def __init__(self, diagonal, off_diagonal):
        self.diagonal = as_vector(diagonal, "diagonal")
        n = self.diagonal.shape[0]
        self.off_diagonal = as_vector(off_diagonal, "off_diagonal", max(n - 1, 0))
        banded = np.zeros((2, n))
        banded[0, 1:] = self.off_diagonal
        banded[1, :] = self.diagonal
        try:
            self._factor = scipy.linalg.cholesky_banded(banded, lower=False)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError("tridiagonal matrix is not positive definite", {"reason": str(exc)})

    @property
    def shape(self) -> Tuple[int, int]:
        n = self.diagonal.shape[0]
        return (n, n)

    def _matvec(self, v):
        return scipy.linalg.cho_solve_banded((self._factor, False), v)

    def _rmatvec(self, w):
        return self._matvec(w)

    def apply_tridiagonal(self, v) -> np.ndarray:
        """T v."""
        v = as_vector(v, "tridiagonal argument", self.shape[0])
        out = self.diagonal * v
        out[:-1] += self.off_diagonal * v[1:]
        out[1:] += self.off_diagonal * v[:-1]
        return out


class StackedOperator(LinearOperator):
    """[S_1; S_2; ...] with a shared domain"""

    def __init__(self, blocks: List[LinearOperator]):
        if not blocks:
            raise InvalidProblemError("stacked operator needs at least one block")
        cols = {b.shape[1] for b in blocks}
        if len(cols) != 1:
            raise DimensionMismatchError("stacked blocks must share their domain", {"domains": sorted(cols)})
        self.blocks = list(blocks)
        self._offsets = np.cumsum([0] + [b.shape[0] for b in blocks])

    @property
    def shape(self) -> Tuple[int, int]:
        return (int(self._offsets[-1]), self.blocks[0].shape[1])

    def block_slices(self) -> List[slice]:
        return [slice(int(a), int(b)) for a, b in zip(self._offsets[:-1], self._offsets[1:])]

    def _matvec(self, v):
        return np.concatenate([b._matvec(v) for b in self.blocks])

    def _rmatvec(self, w):
        out = np.zeros(self.shape[1])
        for block, part in zip(self.blocks, self.block_slices()):
            out += block._rmatvec(w[part])
        return out


class GramOperator(LinearOperator):
    """S*S + shift I, applied implicitly"""

    def __init__(self, base: LinearOperator, shift: float = 0.0):
        self.base = base
        self.shift = float(shift)

    @property
    def shape(self) -> Tuple[int, int]:
        n = self.base.shape[1]
        return (n, n)

    def _matvec(self, v):
        return self.base._rmatvec(self.base._matvec(v)) + self.shift * v

    def _rmatvec(self, w):
        return self._matvec(w)


def operator_apply(op: LinearOperator, v, adjoint: bool = False) -> np.ndarray:
    return op.apply(v, adjoint=adjoint)


def solve_spd(A, b) -> np.ndarray:
    """Solve A x = b for symmetric positive definite A by Cholesky."""
    A = np.asarray(A, dtype=np.float64)
    check_symmetric(A, "system matrix")
    b = as_vector(b, "right-hand side", A.shape[0])
    try:
        factor = scipy.linalg.cho_factor(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite", {"reason": str(exc)})
    return scipy.linalg.cho_solve(factor, b)


@dataclass(frozen=True)
class MinNormSolution:
    y: np.ndarray
    residual: float
    rank: int


def min_norm_solve(A, g, rank_tol: float = DEFAULT_RANK_TOL) -> MinNormSolution:
    """
    Minimum-norm least-squares solution of A y = g for symmetric PSD A.

    Eigen-directions with eigenvalue at most rank_tol * sigma_max are
    treated as the null space.
    """
    A = np.asarray(A, dtype=np.float64)
    check_symmetric(A, "matrix")
    g = as_vector(g, "right-hand side", A.shape[0])
    w, V = scipy.linalg.eigh(A)
    sigma_max = float(np.max(np.abs(w))) if w.size else 0.0
    if sigma_max == 0.0:
        return MinNormSolution(np.zeros_like(g), float(np.linalg.norm(g)), 0)
    keep = w > rank_tol * sigma_max
    Vk = V[:, keep]
    y = Vk @ ((Vk.T @ g) / w[keep])
    return MinNormSolution(y, float(np.linalg.norm(A @ y - g)), int(np.count_nonzero(keep)))


@dataclass(frozen=True)
class SpectralEstimate:
    largest: float
    smallest_positive: float


def spectral_estimates(op: Union[LinearOperator, np.ndarray], rank_tol: float = DEFAULT_RANK_TOL) -> SpectralEstimate:
    """
    Largest and smallest positive eigenvalue.

    A matrix is taken as given (it must be symmetric); an operator S is
    analysed through S*S. smallest_positive is 0 when everything sits below
    the rank threshold.
    """
    if isinstance(op, LinearOperator):
        M = op.gram_dense()
    else:
        M = np.asarray(op, dtype=np.float64)
        check_symmetric(M)
    w = scipy.linalg.eigvalsh(M) if M.size else np.zeros(0)
    largest = float(np.max(w)) if w.size else 0.0
    positive = w[w > rank_tol * max(largest, 0.0)] if largest > 0 else np.zeros(0)
    return SpectralEstimate(largest, float(np.min(positive)) if positive.size else 0.0)


def power_iteration(
        apply: Callable[[np.ndarray], np.ndarray],
        dim: int,
        tol: float = 1e-10,
        max_iter: int = 10000,
        seed: int = 0,
) -> float:
    """Largest eigenvalue of a symmetric PSD map given only its action."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(max_iter):
        y = apply(x)
        new_estimate = float(x @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        if abs(new_estimate - estimate) <= tol * max(abs(new_estimate), 1.0):
            return new_estimate
        estimate = new_estimate
    raise SpectralConvergenceError("power iteration did not converge", {"best_estimate": estimate})


def inverse_power_iteration(
        solve: Callable[[np.ndarray], np.ndarray],
        apply: Callable[[np.ndarray], np.ndarray],
        dim: int,
        tol: float = 1e-12,
        max_iter: int = 10000,
) -> Tuple[float, np.ndarray]:
    """
    Smallest eigenpair of a symmetric positive definite matrix.

    solve applies the inverse, apply the matrix. Stops when the unit-vector
    residual ||A x - mu x|| is at most tol * mu.
    """
    x = np.ones(dim) / np.sqrt(dim)
    mu = float(x @ apply(x))
    for _ in range(max_iter):
        y = solve(x)
        x = y / np.linalg.norm(y)
        Ax = apply(x)
        mu = float(x @ Ax)
        if np.linalg.norm(Ax - mu * x) <= tol * abs(mu):
            return mu, x
    raise SpectralConvergenceError("inverse power iteration did not converge", {"best_estimate": mu})
