"""
Classical augmented Lagrangian method for min theta(u) s.t. S u in K.

Each outer step minimizes the augmented Lagrangian jointly in (u, zeta).
Minimizing out zeta leaves the Moreau-reduced function

    F(u) = theta(u) + beta/2 dist^2(S u + lam/beta, K),

whose gradient is Q u - b + beta S*(w - P_K(w)) with w = S u + lam/beta,
and zeta = P_K(w) at the minimizer. The multiplier update is
lam <- lam + beta (S u - zeta).
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from almlab.config import SolverConfig
from almlab.errors import FeasibilitySuspectError, InnerSolverError, InvalidProblemError
from almlab.linalg import as_vector, solve_spd, spectral_estimates
from almlab.problem import ModelProblem

INNER_METHODS = ("auto", "gradient")
ARMIJO = 1e-4
MIN_STEP = 1e-10
NOISE_FACTOR = 64 * np.finfo(float).eps
ROUNDOFF_FACTOR = np.sqrt(np.finfo(float).eps)
STALL_RATIO = 0.5
MAX_DEFAULT_BASIS_PROBES = 16
RANDOM_PROBES = 8


@dataclass
class InnerConfig:
    max_iter: int = 100000
    tol_grad_abs: float = 1e-8
    tol_exponent: float = 2.0
    tol_floor: float = 1e-13
    method: str = "auto"

    def __post_init__(self):
        if self.method not in INNER_METHODS:
            raise InvalidProblemError(
                f"Unknown inner method: {self.method}. Available methods: {', '.join(INNER_METHODS)}"
            )
        if self.max_iter <= 0 or self.tol_grad_abs <= 0 or self.tol_floor <= 0:
            raise InvalidProblemError("inner iteration cap and tolerances must be positive")

    def tolerance(self, k: int, scale: float = 1.0) -> float:
        """
        Gradient tolerance of outer iteration k, tightened as tol / k^p.

        The floor is relative: tol_floor * max(1, scale), with scale the size
        of the problem data (||b||, ||lam||).
        """
        return max(self.tol_grad_abs / float(k) ** self.tol_exponent, self.tol_floor * max(1.0, scale))


@dataclass
class AlmConfig:
    beta: float = 1.0
    lambda0: Optional[np.ndarray] = None
    max_outer: int = 500
    tol_primal: float = 1e-9
    tol_step: float = 1e-9
    inner: InnerConfig = field(default_factory=InnerConfig)
    probes: Optional[np.ndarray] = None
    probe_count: Optional[int] = None
    seed: int = 0
    stall_window: int = 50
    stall_rel_decrease: float = 1e-3

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidProblemError("beta must be positive", {"beta": self.beta})
        if self.max_outer <= 0:
            raise InvalidProblemError("max_outer must be positive", {"max_outer": self.max_outer})
        if self.tol_primal <= 0 or self.tol_step <= 0:
            raise InvalidProblemError("outer tolerances must be positive")

    @classmethod
    def from_settings(cls, **overrides) -> "AlmConfig":
        settings = dict(
            beta=SolverConfig.BETA,
            max_outer=SolverConfig.MAX_OUTER,
            tol_primal=SolverConfig.TOL_PRIMAL,
            tol_step=SolverConfig.TOL_STEP,
            seed=SolverConfig.SEED,
            inner=InnerConfig(
                max_iter=SolverConfig.INNER_MAX_ITER,
                tol_grad_abs=SolverConfig.INNER_TOL,
                tol_exponent=SolverConfig.INNER_TOL_EXPONENT,
                tol_floor=SolverConfig.INNER_TOL_FLOOR,
            ),
        )
        settings.update(overrides)
        return cls(**settings)

    def probe_matrix(self, dim_u: int) -> np.ndarray:
        """
        Probe directions as rows.

        Defaults to the canonical basis for small problems and to seeded
        random unit vectors otherwise.
        """
        if self.probes is not None:
            P = np.atleast_2d(np.asarray(self.probes, dtype=np.float64))
            if P.shape[1] != dim_u:
                raise InvalidProblemError("probe directions have the wrong dimension", {"dim_u": dim_u})
            return P
        if self.probe_count is None and dim_u <= MAX_DEFAULT_BASIS_PROBES:
            return np.eye(dim_u)
        count = self.probe_count if self.probe_count is not None else RANDOM_PROBES
        P = np.random.default_rng(self.seed).standard_normal((count, dim_u))
        return P / np.linalg.norm(P, axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "lambda0": None if self.lambda0 is None else np.asarray(self.lambda0, dtype=float).tolist(),
            "max_outer": self.max_outer,
            "tol_primal": self.tol_primal,
            "tol_step": self.tol_step,
            "inner_max_iter": self.inner.max_iter,
            "inner_tol": self.inner.tol_grad_abs,
            "inner_tol_exponent": self.inner.tol_exponent,
            "inner_tol_floor": self.inner.tol_floor,
            "inner_method": self.inner.method,
            "seed": self.seed,
        }


@dataclass
class AlmRecord:
    k: int
    u: np.ndarray
    zeta: np.ndarray
    lam: np.ndarray
    r_norm: float
    objective: float
    lambda_norm: float
    fejer_slack: float
    probe_values: np.ndarray
    inner_iterations: int
    step_norm: float
    u_image: np.ndarray = field(default=None, repr=False)

    @property
    def residual(self) -> np.ndarray:
        """S u - zeta."""
        return self.u_image - self.zeta


@dataclass
class AlmTrace:
    """
    Outer iterates. Record 1 is the starting state (warm start, zeta =
    P_K(S u), initial multiplier); records k >= 2 come from outer steps and
    satisfy zeta^k in K and lam^k in N(zeta^k, K).
    """
    beta: float
    c0: float
    probes: np.ndarray
    records: List[AlmRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, k: int) -> AlmRecord:
        """Record by its 1-based iteration number."""
        return self.records[k - 1]

    @property
    def last(self) -> AlmRecord:
        return self.records[-1]

    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.records])

    def iterates(self) -> np.ndarray:
        return np.array([r.u for r in self.records])

    def r_norms(self) -> np.ndarray:
        return np.array([r.r_norm for r in self.records])

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for rec in self.records:
            row = {
                "k": rec.k,
                "r_norm": rec.r_norm,
                "objective": rec.objective,
                "lambda_norm": rec.lambda_norm,
                "fejer_slack": rec.fejer_slack,
                "inner_iterations": rec.inner_iterations,
            }
            for j, value in enumerate(rec.probe_values):
                row[f"probe_{j}"] = value
            rows.append(row)
        return pd.DataFrame(rows)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


@dataclass
class Solution:
    u_final: np.ndarray
    zeta_final: np.ndarray
    lambda_final: np.ndarray
    converged: bool
    termination_reason: str
    outer_iterations: int


@dataclass
class InnerResult:
    u: np.ndarray
    zeta: np.ndarray
    iterations: int
    grad_norm: float


class InnerContext:
    """Per-run data for the inner solver"""

    def __init__(self, problem: ModelProblem, beta: float, method: str = "auto"):
        self.problem = problem
        self.beta = beta
        K = problem.K
        self.singleton = K.singleton_point()
        small = max(problem.dim_u, problem.dim_x) <= SolverConfig.DENSE_LIMIT
        self.bounds = K.box_bounds() if (method == "auto" and small) else None
        if self.singleton is not None and not small:
            self.singleton = None
        self._lipschitz = None

    @property
    def lipschitz(self) -> float:
        """lambda_max(Q) + beta ||S||^2; P_K is firmly nonexpansive."""
        if self._lipschitz is None:
            s_norm_sq = spectral_estimates(self.problem.S).largest
            self._lipschitz = self.problem.objective.curvature[1] + self.beta * s_norm_sq
        return self._lipschitz


def moreau_value(problem: ModelProblem, u, lam, beta: float) -> float:
    w = problem.S.apply(u) + lam / beta
    p = problem.K.project(w)
    return problem.objective.value(u) + 0.5 * beta * float((w - p) @ (w - p))


def moreau_gradient(problem: ModelProblem, u, lam, beta: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """Gradient of the Moreau-reduced function, zeta = P_K(w) and a rounding scale."""
    S = problem.S
    w = S.apply(u) + lam / beta
    zeta = problem.K.project(w)
    Qu = problem.objective.hess_apply(u)
    penalty = beta * S.apply(w - zeta, adjoint=True)
    grad = Qu - problem.objective.b + penalty
    scale = np.linalg.norm(Qu) + np.linalg.norm(problem.objective.b) + np.linalg.norm(penalty)
    return grad, zeta, scale


def inner_solve(
        problem: ModelProblem,
        lam,
        beta: float,
        warm_start,
        tol_grad: float,
        max_iter: int = 100000,
        method: str = "auto",
        context: Optional[InnerContext] = None,
) -> InnerResult:
    """
    Minimize the Moreau-reduced function to ||grad|| <= tol_grad.

    Singleton-like sets are solved exactly from the normal equations, box-like
    sets by semismooth Newton, everything else by gradient descent with step
    1/L. The gradient test accepts the rounding floor of the gradient.
    """
    lam = as_vector(lam, "multiplier", problem.dim_x)
    u = as_vector(warm_start, "warm start", problem.dim_u).copy()
    ctx = context or InnerContext(problem, beta, method)

    if ctx.singleton is not None:
        return _solve_singleton(problem, lam, beta, ctx.singleton)
    if ctx.bounds is not None:
        return _solve_newton(problem, lam, beta, u, tol_grad, max_iter, ctx)
    return _solve_gradient(problem, lam, beta, u, tol_grad, max_iter, ctx)


def _solve_singleton(problem, lam, beta, point) -> InnerResult:
    Sd = problem.S.to_dense()
    H = problem.objective.dense_hessian() + beta * (Sd.T @ Sd)
    rhs = problem.objective.b + Sd.T @ (beta * point - lam)
    u = solve_spd(0.5 * (H + H.T), rhs)
    grad, zeta, _ = moreau_gradient(problem, u, lam, beta)
    return InnerResult(u, zeta, 1, float(np.linalg.norm(grad)))


def _solve_gradient(problem, lam, beta, u, tol_grad, max_iter, ctx) -> InnerResult:
    step = 1.0 / ctx.lipschitz
    grad_norm = np.inf
    for it in range(max_iter):
        grad, zeta, scale = moreau_gradient(problem, u, lam, beta)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= max(tol_grad, NOISE_FACTOR * scale):
            return InnerResult(u, zeta, it, grad_norm)
        u = u - step * grad
    raise InnerSolverError(
        "gradient descent did not reach the inner tolerance",
        {"iterations": max_iter, "grad_norm": grad_norm, "tol": tol_grad},
    )


def _line_search(problem, lam, beta, u, direction, grad, grad_norm) -> Optional[np.ndarray]:
    """
    Backtracking along a Newton direction. Armijo decrease of the Moreau
    value is required while it exceeds the rounding level of the value;
    below that level a decrease of the gradient norm is accepted instead.
    Returns None when no step down to MIN_STEP qualifies.
    """
    value = moreau_value(problem, u, lam, beta)
    slope = float(grad @ direction)
    noise = NOISE_FACTOR * max(1.0, abs(value))
    t = 1.0
    while t >= MIN_STEP:
        candidate = u + t * direction
        drop = value - moreau_value(problem, candidate, lam, beta)
        if drop > noise and drop >= -ARMIJO * t * slope:
            return candidate
        if abs(drop) <= noise:
            candidate_grad, _, _ = moreau_gradient(problem, candidate, lam, beta)
            if np.linalg.norm(candidate_grad) <= (1.0 - ARMIJO * t) * grad_norm:
                return candidate
        t *= 0.5
    return None


def _solve_newton(problem, lam, beta, u, tol_grad, max_iter, ctx) -> InnerResult:
    """
    Semismooth Newton on the Moreau-reduced function for box-like K.

    Once the gradient is within ROUNDOFF_FACTOR of its scale, an iterate
    whose last step failed to halve the gradient is accepted as converged to
    rounding; gradient steps are only taken above that level.
    """
    lo, hi = ctx.bounds
    Sd = problem.S.to_dense()
    Qd = problem.objective.dense_hessian()
    grad_norm = previous = np.inf
    for it in range(max_iter):
        grad, zeta, scale = moreau_gradient(problem, u, lam, beta)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= max(tol_grad, NOISE_FACTOR * scale):
            return InnerResult(u, zeta, it, grad_norm)
        at_roundoff = grad_norm <= ROUNDOFF_FACTOR * max(1.0, scale)
        if at_roundoff and grad_norm > STALL_RATIO * previous:
            return InnerResult(u, zeta, it, grad_norm)
        previous = grad_norm

        w = Sd @ u + lam / beta
        active = (w < lo) | (w > hi)
        Sa = Sd[active]
        H = Qd + beta * (Sa.T @ Sa)
        direction = -solve_spd(0.5 * (H + H.T), grad)

        candidate = _line_search(problem, lam, beta, u, direction, grad, grad_norm)
        if candidate is None:
            if at_roundoff:
                return InnerResult(u, zeta, it, grad_norm)
            candidate = u - grad / ctx.lipschitz
        u = candidate
    raise InnerSolverError(
        "semismooth Newton did not reach the inner tolerance",
        {"iterations": max_iter, "grad_norm": grad_norm, "tol": tol_grad},
    )


def fejer_slack(r_prev: np.ndarray, r_next: np.ndarray, step: float, c0: float, beta: float) -> float:
    """||r+||^2 - ||r||^2 + ||r+ - r||^2 + (2 c0 / beta) ||u+ - u||^2, non-positive in exact arithmetic."""
    diff = r_next - r_prev
    return float(r_next @ r_next - r_prev @ r_prev + diff @ diff + (2.0 * c0 / beta) * step ** 2)


def _make_record(problem, k, u, zeta, lam, probes, fejer, inner_iterations, step) -> AlmRecord:
    Su = problem.S.apply(u)
    return AlmRecord(
        k=k,
        u=u,
        zeta=zeta,
        lam=lam,
        r_norm=float(np.linalg.norm(Su - zeta)),
        objective=problem.objective.value(u),
        lambda_norm=float(np.linalg.norm(lam)),
        fejer_slack=fejer,
        probe_values=probes @ problem.S.apply(lam, adjoint=True),
        inner_iterations=inner_iterations,
        step_norm=step,
        u_image=Su,
    )


def alm_solve(problem: ModelProblem, config: Optional[AlmConfig] = None) -> Tuple[Solution, AlmTrace]:
    """
    Run the outer loop until ||S u - zeta|| <= tol_primal and
    ||u^{k+1} - u^k|| <= tol_step, or max_outer steps.

    Raises:
        InnerSolverError: inner minimization failed; carries the partial trace
        FeasibilitySuspectError: residual stalled above tolerance
    """
    cfg = config or AlmConfig.from_settings()
    beta = cfg.beta
    S, K = problem.S, problem.K
    probes = cfg.probe_matrix(problem.dim_u)

    if cfg.lambda0 is None:
        lam = np.zeros(problem.dim_x)
    else:
        lam = as_vector(cfg.lambda0, "lambda0", problem.dim_x).copy()
    if problem.feasible_witness is not None:
        u = problem.feasible_witness.copy()
    else:
        u = np.zeros(problem.dim_u)

    c0 = problem.objective.c0
    ctx = InnerContext(problem, beta, cfg.inner.method)
    trace = AlmTrace(beta=beta, c0=c0, probes=probes)
    trace.records.append(_make_record(problem, 1, u, K.project(S.apply(u)), lam, probes, np.nan, 0, 0.0))

    b_norm = float(np.linalg.norm(problem.objective.b))
    for k in range(1, cfg.max_outer + 1):
        tol = cfg.inner.tolerance(k, max(b_norm, float(np.linalg.norm(lam))))
        try:
            inner = inner_solve(problem, lam, beta, u, tol, cfg.inner.max_iter, cfg.inner.method, ctx)
        except InnerSolverError as exc:
            exc.trace = trace
            exc.details["outer_iteration"] = k
            raise

        previous = trace.last
        residual = S.apply(inner.u) - inner.zeta
        step = float(np.linalg.norm(inner.u - u))
        fejer = np.nan if k < 2 else fejer_slack(previous.residual, residual, step, c0, beta)
        lam = lam + beta * residual
        u = inner.u
        record = _make_record(problem, k + 1, u, inner.zeta, lam, probes, fejer, inner.iterations, step)
        trace.records.append(record)

        if record.r_norm <= cfg.tol_primal and step <= cfg.tol_step:
            return Solution(u, inner.zeta, lam, True, "converged", k), trace
        _check_stall(trace, cfg)

    last = trace.last
    return Solution(last.u, last.zeta, last.lam, False, "max_outer", cfg.max_outer), trace


def _check_stall(trace: AlmTrace, cfg: AlmConfig) -> None:
    window = cfg.stall_window
    if len(trace) <= window + 2:
        return
    now, then = trace.records[-1], trace.records[-1 - window]
    if now.r_norm <= cfg.tol_primal:
        return
    stalled = now.r_norm >= (1.0 - cfg.stall_rel_decrease) * then.r_norm
    if stalled and now.step_norm <= then.step_norm:
        raise FeasibilitySuspectError(
            "residual stalls above tolerance while steps shrink; the problem may be infeasible",
            {"r_norm": now.r_norm, "outer_iteration": now.k - 1, "window": window},
            trace=trace,
        )
