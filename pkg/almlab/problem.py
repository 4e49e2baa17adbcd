"""
Model problems min theta(u) s.t. S u in K and linearizations of
nonlinear problems min f(u) s.t. G(u) in 𝒦 at a reference point.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Tuple, Union

import numpy as np
import scipy.linalg

from almlab.errors import (
    ConsistencyError,
    DimensionMismatchError,
    InfeasiblePointError,
    InvalidProblemError,
)
from almlab.linalg import (
    DenseOperator,
    GramOperator,
    LinearOperator,
    as_vector,
    check_symmetric,
    power_iteration,
)
from almlab.sets import ConvexSet, SamplePlan, Shift, normal_cone_residual

FEASIBILITY_TOL = 1e-8
KKT_AGREEMENT_TOL = 1e-10
LINEARIZING_SCALES = tuple(2.0 ** k for k in range(-20, 21))


@dataclass(frozen=True)
class QuadraticObjective:
    """
    theta(u) = 1/2 <u, Q u> - <b, u> + c with Q symmetric positive definite.

    Q is a dense matrix or, for large discretizations, a GramOperator.
    """
    Q: Union[np.ndarray, LinearOperator]
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        if isinstance(self.Q, LinearOperator):
            if self.Q.shape[0] != self.Q.shape[1]:
                raise DimensionMismatchError("Q must be square", {"shape": list(self.Q.shape)})
            n = self.Q.shape[0]
        else:
            Q = np.asarray(self.Q, dtype=np.float64)
            check_symmetric(Q, "Q")
            object.__setattr__(self, "Q", Q)
            n = Q.shape[0]
        object.__setattr__(self, "b", as_vector(self.b, "b", n))
        object.__setattr__(self, "c", float(self.c))
        if self.curvature[0] <= 0.0:
            raise InvalidProblemError(
                "Q must be positive definite",
                {"smallest_eigenvalue": self.curvature[0]},
            )

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def hess_apply(self, u: np.ndarray) -> np.ndarray:
        if isinstance(self.Q, LinearOperator):
            return self.Q.apply(u)
        return self.Q @ u

    def dense_hessian(self) -> np.ndarray:
        if isinstance(self.Q, LinearOperator):
            return self.Q.to_dense()
        return self.Q

    @cached_property
    def curvature(self) -> Tuple[float, float]:
        """(c0, L_Q): smallest and largest eigenvalue of Q."""
        if isinstance(self.Q, GramOperator):
            return self.Q.shift, power_iteration(self.Q._matvec, self.dim) if self.dim else 0.0
        w = scipy.linalg.eigvalsh(self.dense_hessian())
        return float(w[0]), float(w[-1])

    @property
    def c0(self) -> float:
        return self.curvature[0]

    def value(self, u) -> float:
        u = as_vector(u, "u", self.dim)
        return 0.5 * float(u @ self.hess_apply(u)) - float(self.b @ u) + self.c

    def gradient(self, u) -> np.ndarray:
        u = as_vector(u, "u", self.dim)
        return self.hess_apply(u) - self.b


def eval_objective(objective: QuadraticObjective, u) -> Tuple[float, np.ndarray]:
    return objective.value(u), objective.gradient(u)


@dataclass(frozen=True)
class ModelProblem:
    objective: QuadraticObjective
    S: LinearOperator
    K: ConvexSet
    feasible_witness: Optional[np.ndarray] = None

    def __post_init__(self):
        rows, cols = self.S.shape
        if cols != self.objective.dim:
            raise DimensionMismatchError(
                "operator domain does not match the objective",
                {"operator_cols": cols, "objective_dim": self.objective.dim},
            )
        if rows != self.K.dim:
            raise DimensionMismatchError(
                "operator range does not match the constraint set",
                {"operator_rows": rows, "set_dim": self.K.dim},
            )
        if self.feasible_witness is not None:
            w = as_vector(self.feasible_witness, "feasible_witness", cols)
            object.__setattr__(self, "feasible_witness", w)
            if not self.K.contains(self.S.apply(w), FEASIBILITY_TOL):
                raise InvalidProblemError(
                    "feasible_witness is not feasible",
                    {"distance": self.K.distance(self.S.apply(w))},
                )

    @property
    def dim_u(self) -> int:
        return self.S.shape[1]

    @property
    def dim_x(self) -> int:
        return self.S.shape[0]

    def is_feasible(self, u, tol: float = FEASIBILITY_TOL) -> bool:
        return self.K.contains(self.S.apply(u), tol)


@dataclass(frozen=True)
class NonlinearProblemSpec:
    """Oracles for min f(u) s.t. G(u) in constraint_set"""
    f: Callable[[np.ndarray], float]
    grad_f: Callable[[np.ndarray], np.ndarray]
    G: Callable[[np.ndarray], np.ndarray]
    jac_G: Callable[[np.ndarray], np.ndarray]
    constraint_set: ConvexSet

    def constraint_value(self, u) -> np.ndarray:
        return as_vector(self.G(u), "G(u)", self.constraint_set.dim)

    def jacobian(self, u) -> np.ndarray:
        J = np.atleast_2d(np.asarray(self.jac_G(u), dtype=np.float64))
        if J.shape != (self.constraint_set.dim, len(u)):
            raise DimensionMismatchError(
                "Jacobian has the wrong shape",
                {"shape": list(J.shape), "expected": [self.constraint_set.dim, len(u)]},
            )
        return J

    def check_jacobian(self, center, probes: int = 5, seed: int = 0, rel_tol: float = 1e-5) -> float:
        """
        Compare jac_G with central differences at seeded points near center.

        Returns the worst relative error; raises when it exceeds rel_tol.
        """
        center = as_vector(center, "center")
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(probes):
            u = center + 1e-2 * rng.standard_normal(center.shape[0])
            J = self.jacobian(u)
            J_fd = np.empty_like(J)
            for j in range(u.shape[0]):
                h = 1e-5 * max(1.0, abs(u[j]))
                e = np.zeros_like(u)
                e[j] = h
                J_fd[:, j] = (self.constraint_value(u + e) - self.constraint_value(u - e)) / (2 * h)
            worst = max(worst, float(np.linalg.norm(J - J_fd) / (1.0 + np.linalg.norm(J))))
        if worst > rel_tol:
            raise InvalidProblemError("jac_G disagrees with finite differences", {"relative_error": worst})
        return worst


@dataclass(frozen=True)
class SurrogateModel:
    """Model problem that linearizes a nonlinear problem at anchor"""
    base: ModelProblem
    anchor: np.ndarray
    curvature: float
    source: Optional[NonlinearProblemSpec] = field(default=None, repr=False)


def build_surrogate(spec: NonlinearProblemSpec, u_star, c: float = 1.0, check_jacobian: bool = True) -> SurrogateModel:
    """
    theta(u) = f(u*) + <grad f(u*), u - u*> + c/2 ||u - u*||^2,
    S = G'(u*), K = 𝒦 - G(u*) + S u*.
    """
    if c <= 0:
        raise InvalidProblemError("surrogate curvature must be positive", {"c": c})
    u_star = as_vector(u_star, "u_star")
    n = u_star.shape[0]
    g_val = spec.constraint_value(u_star)
    if not spec.constraint_set.contains(g_val, FEASIBILITY_TOL):
        raise InfeasiblePointError(
            "G(u*) is not in the constraint set",
            {"distance": spec.constraint_set.distance(g_val)},
        )
    if check_jacobian:
        spec.check_jacobian(u_star)

    grad = as_vector(spec.grad_f(u_star), "grad_f(u*)", n)
    J = spec.jacobian(u_star)
    S = DenseOperator(J)
    objective = QuadraticObjective(
        Q=c * np.eye(n),
        b=c * u_star - grad,
        c=float(spec.f(u_star)) - float(grad @ u_star) + 0.5 * c * float(u_star @ u_star),
    )
    K = Shift(spec.constraint_set, S.apply(u_star) - g_val)
    if not K.contains(S.apply(u_star), FEASIBILITY_TOL):
        raise ConsistencyError("translated set does not contain S u*")
    return SurrogateModel(ModelProblem(objective, S, K, feasible_witness=u_star), u_star, c, spec)


@dataclass(frozen=True)
class KktEquivalence:
    stationarity_surrogate: float
    complementarity_surrogate: float
    stationarity_original: float
    complementarity_original: float


def surrogate_kkt_equivalence(
        spec: NonlinearProblemSpec,
        u_star,
        lam,
        plan: Optional[SamplePlan] = None,
        c: float = 1.0,
) -> KktEquivalence:
    """
    KKT residuals of (u*, lam) for the surrogate and for the nonlinear
    problem. They agree because the surrogate shares the gradient, the
    Jacobian and the translated normal cone at u*.
    """
    plan = plan or SamplePlan()
    surrogate = build_surrogate(spec, u_star, c)
    problem = surrogate.base
    u_star = surrogate.anchor
    lam = as_vector(lam, "multiplier", problem.dim_x)

    g_s = problem.objective.gradient(u_star)
    res_s = float(np.linalg.norm(g_s + problem.S.apply(lam, adjoint=True)))
    comp_s = normal_cone_residual(problem.K, problem.S.apply(u_star), lam, plan)

    J = spec.jacobian(u_star)
    res_o = float(np.linalg.norm(as_vector(spec.grad_f(u_star), "grad_f(u*)") + J.T @ lam))
    comp_o = normal_cone_residual(spec.constraint_set, spec.constraint_value(u_star), lam, plan)

    result = KktEquivalence(res_s, comp_s, res_o, comp_o)
    if abs(res_s - res_o) > KKT_AGREEMENT_TOL or abs(comp_s - comp_o) > KKT_AGREEMENT_TOL:
        raise ConsistencyError("surrogate and original KKT residuals disagree", result.__dict__)
    return result


@dataclass(frozen=True)
class LinearizingConeResult:
    contained: bool
    witness_t: Optional[float]


def linearizing_cone_contains(spec: NonlinearProblemSpec, u_bar, v, tol: float = 1e-9) -> LinearizingConeResult:
    """
    Does v belong to the linearizing cone {v : G(u) + G'(u) v / t in 𝒦, some t > 0}?

    t runs over powers of two from 2^-20 to 2^20. Membership is judged
    relative to the step length, so points merely within tol of the set at
    tiny steps do not count.
    """
    u_bar = as_vector(u_bar, "u_bar")
    v = as_vector(v, "direction", u_bar.shape[0])
    K = spec.constraint_set
    base = spec.constraint_value(u_bar)
    base_dist = K.distance(base)
    if base_dist > tol:
        raise InfeasiblePointError("G(u_bar) is not in the constraint set", {"distance": base_dist})
    Jv = spec.jacobian(u_bar) @ v
    if np.linalg.norm(Jv) == 0.0:
        return LinearizingConeResult(True, 1.0)
    for t in LINEARIZING_SCALES:
        step = Jv / t
        if K.distance(base + step) <= base_dist + tol * np.linalg.norm(step):
            return LinearizingConeResult(True, t)
    return LinearizingConeResult(False, None)