"""
1D Poisson optimal control with pointwise state or control bounds,

    min 1/2 ||y - y_d||^2 + alpha/2 ||u||^2  s.t.  -y'' = u on (0, 1), y(0) = y(1) = 0,

discretized by centred finite differences on n interior points and written
as a model problem with y = L u, L = T^{-1}. Vectors use the Euclidean inner
product; reported norms carry the mesh weight, sqrt(h * sum(v_i^2)).
"""
import dataclasses
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from almlab.alm import AlmConfig, alm_solve
from almlab.audit.logger import AuditLogger
from almlab.config import SolverConfig
from almlab.errors import AlmLabError, InvalidProblemError
from almlab.linalg import (
    DenseOperator,
    GramOperator,
    StackedOperator,
    TridiagonalInverseOperator,
    inverse_power_iteration,
)
from almlab.problem import ModelProblem, NonlinearProblemSpec, QuadraticObjective, surrogate_kkt_equivalence
from almlab.sets import Box, Product, SamplePlan, Singleton

MeshFunction = Union[float, Sequence[float], Callable[[np.ndarray], np.ndarray], None]

CONSTRAINT_KINDS = ("state", "control", "both")
STATE_STUDY_SETTINGS = {"beta": 1e6, "max_outer": 1000, "tol_primal": 1e-8, "tol_step": 1e-6}
STUDY_COLUMNS = ["n", "h", "lambda_norm_state", "lambda_norm_control", "u_dist", "outer_iterations"]


def default_target(x: np.ndarray) -> np.ndarray:
    return 4.0 * np.sin(np.pi * x)


@dataclass(frozen=True)
class OcpSpec:
    n: int
    alpha: float = 1e-2
    y_d: MeshFunction = None
    constraint_kind: str = "control"
    state_lower: MeshFunction = None
    state_upper: MeshFunction = None
    control_lower: MeshFunction = -10.0
    control_upper: MeshFunction = 10.0
    stacked: bool = True

    def __post_init__(self):
        if self.n < 2:
            raise InvalidProblemError("need at least two interior mesh points", {"n": self.n})
        if not self.alpha > 0:
            raise InvalidProblemError("alpha must be positive", {"alpha": self.alpha})
        if self.constraint_kind not in CONSTRAINT_KINDS:
            raise InvalidProblemError(
                f"Unknown constraint kind: {self.constraint_kind}. Available kinds: {', '.join(CONSTRAINT_KINDS)}"
            )
        if not self.stacked and self.constraint_kind == "both":
            raise InvalidProblemError("the reduced form carries a single constraint block")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def mesh(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1)

    def evaluate(self, value: MeshFunction, default: float) -> np.ndarray:
        x = self.mesh
        if value is None:
            return np.full(self.n, default)
        if callable(value):
            return np.asarray(value(x), dtype=np.float64).reshape(self.n)
        arr = np.asarray(value, dtype=np.float64)
        return np.full(self.n, float(arr)) if arr.ndim == 0 else arr.reshape(self.n)

    def target(self) -> np.ndarray:
        return self.evaluate(self.y_d if self.y_d is not None else default_target, 0.0)

    def state_bounds(self):
        if self.constraint_kind == "control":
            return np.full(self.n, -np.inf), np.full(self.n, np.inf)
        return self.evaluate(self.state_lower, -np.inf), self.evaluate(self.state_upper, np.inf)

    def control_bounds(self):
        if self.constraint_kind == "state":
            return np.full(self.n, -np.inf), np.full(self.n, np.inf)
        return self.evaluate(self.control_lower, -np.inf), self.evaluate(self.control_upper, np.inf)


def laplacian(n: int) -> TridiagonalInverseOperator:
    """Dirichlet finite-difference Laplacian T = tridiag(-1, 2, -1) / h^2, kept as its inverse L."""
    h = 1.0 / (n + 1)
    return TridiagonalInverseOperator(np.full(n, 2.0 / h ** 2), np.full(n - 1, -1.0 / h ** 2))


def build_ocp(spec: OcpSpec) -> ModelProblem:
    n = spec.n
    L = laplacian(n)
    y_d = spec.target()

    if n <= SolverConfig.DENSE_LIMIT:
        Ld = L.to_dense()
        Q = Ld.T @ Ld + spec.alpha * np.eye(n)
        Q = 0.5 * (Q + Q.T)
    else:
        Q = GramOperator(L, spec.alpha)
    objective = QuadraticObjective(Q, L.apply(y_d, adjoint=True), 0.5 * float(y_d @ y_d))

    y_lo, y_hi = spec.state_bounds()
    u_lo, u_hi = spec.control_bounds()
    Y_ad, U_ad = Box(y_lo, y_hi), Box(u_lo, u_hi)

    if spec.stacked:
        S = StackedOperator([L, DenseOperator(np.eye(n))])
        K = Product([Y_ad, U_ad])
    elif spec.constraint_kind == "state":
        S, K = L, Y_ad
    else:
        S, K = DenseOperator(np.eye(n)), U_ad

    witness = np.zeros(n) if K.contains(S.apply(np.zeros(n))) else None
    return ModelProblem(objective, S, K, witness)


def discrete_l2_norm(v: np.ndarray, h: float) -> float:
    return float(np.sqrt(h * np.sum(np.asarray(v) ** 2)))


def split_multiplier(spec: OcpSpec, lam: np.ndarray):
    """(state block, control block) of a final multiplier."""
    n = spec.n
    if spec.stacked:
        return lam[:n], lam[n:]
    if spec.constraint_kind == "state":
        return lam, np.zeros(n)
    return np.zeros(n), lam


def unconstrained_state_peak(spec: OcpSpec) -> float:
    """max of the optimal state with all bounds removed."""
    free = dataclasses.replace(spec, constraint_kind="control", control_lower=None, control_upper=None, stacked=True)
    problem = build_ocp(free)
    Q = problem.objective.dense_hessian()
    u = np.linalg.solve(Q, problem.objective.b)
    return float(np.max(laplacian(spec.n).apply(u)))


def study_template(constraint_kind: str = "control", alpha: float = 1e-2, reference_n: int = 63) -> OcpSpec:
    """
    Default study setup. State constraints cap y at half the peak of the
    unconstrained state on the reference mesh, so the bound is active.
    """
    spec = OcpSpec(n=reference_n, alpha=alpha, constraint_kind=constraint_kind)
    if constraint_kind == "control":
        return spec
    return dataclasses.replace(spec, state_upper=0.5 * unconstrained_state_peak(spec))


def study_config(constraint_kind: str = "control", **overrides) -> AlmConfig:
    """
    Solver settings for a mesh study. Control studies use the configured
    defaults. State bounds get STATE_STUDY_SETTINGS: on the contact set the
    oscillatory part of the multiplier contracts by 1 / (1 + beta h^4 / (16 alpha))
    per outer step, so beta must be large on fine meshes.
    """
    if constraint_kind not in CONSTRAINT_KINDS:
        raise InvalidProblemError(
            f"Unknown constraint kind: {constraint_kind}. Available kinds: {', '.join(CONSTRAINT_KINDS)}"
        )
    settings = {} if constraint_kind == "control" else dict(STATE_STUDY_SETTINGS)
    settings.update(overrides)
    return AlmConfig.from_settings(**settings)


@dataclass
class MeshStudyRow:
    n: int
    h: float
    lambda_norm_state: float
    lambda_norm_control: float
    u_dist: float
    outer_iterations: int
    converged: bool
    error: Optional[str] = None


def mesh_refinement_study(
        template: OcpSpec,
        meshes: Sequence[int],
        cfg: Optional[AlmConfig] = None,
        run_id: str = "mesh-study",
) -> List[MeshStudyRow]:
    """
    Solve the template on every mesh and record block multiplier norms.

    The finest mesh is solved first and its control, linearly interpolated,
    is the reference for u_dist. A failing mesh gives a row with NaN values
    and the error message; the study continues.
    """
    meshes = list(meshes)
    if any(b <= a for a, b in zip(meshes[:-1], meshes[1:])):
        raise InvalidProblemError("meshes must be strictly increasing", {"meshes": meshes})
    cfg = cfg or study_config(template.constraint_kind)

    solutions = {}
    for n in reversed(meshes):
        spec = dataclasses.replace(template, n=n)
        start = time.time()
        try:
            solution, _ = alm_solve(build_ocp(spec), cfg)
            solutions[n] = (spec, solution, None)
            AuditLogger.log(
                run_id=run_id,
                command="ocp-mesh",
                parameters={"n": n, "constraint": spec.constraint_kind},
                termination=solution.termination_reason,
                outer_iterations=solution.outer_iterations,
                latency_ms=(time.time() - start) * 1000,
                final_outcome="success",
            )
        except AlmLabError as exc:
            solutions[n] = (spec, None, exc.message)
            AuditLogger.log(
                run_id=run_id,
                command="ocp-mesh",
                parameters={"n": n, "constraint": spec.constraint_kind},
                latency_ms=(time.time() - start) * 1000,
                final_outcome="error",
                error=exc.message,
            )

    finest_spec, finest, _ = solutions[meshes[-1]]
    rows = []
    for n in meshes:
        spec, solution, error = solutions[n]
        if solution is None:
            rows.append(MeshStudyRow(n, spec.h, np.nan, np.nan, np.nan, 0, False, error))
            continue
        lam_y, lam_u = split_multiplier(spec, solution.lambda_final)
        u_dist = np.nan
        if finest is not None:
            reference = np.interp(spec.mesh, finest_spec.mesh, finest.u_final)
            u_dist = discrete_l2_norm(solution.u_final - reference, spec.h)
        rows.append(MeshStudyRow(
            n=n,
            h=spec.h,
            lambda_norm_state=discrete_l2_norm(lam_y, spec.h),
            lambda_norm_control=discrete_l2_norm(lam_u, spec.h),
            u_dist=u_dist,
            outer_iterations=solution.outer_iterations,
            converged=solution.converged,
        ))
    return rows


def study_frame(rows: Sequence[MeshStudyRow]) -> pd.DataFrame:
    return pd.DataFrame([{c: getattr(r, c) for c in STUDY_COLUMNS} for r in rows], columns=STUDY_COLUMNS)


def write_study_csv(rows: Sequence[MeshStudyRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    study_frame(rows).to_csv(path, index=False, float_format="%.17g")
    return path


def multiplier_trend(rows: Sequence[MeshStudyRow], block: str = "state") -> str:
    """'bounded' when max/min <= 2, 'growing' when strictly increasing, else 'indeterminate'."""
    values = np.array([getattr(r, f"lambda_norm_{block}") for r in rows], dtype=np.float64)
    if values.size < 2 or np.any(np.isnan(values)):
        return "indeterminate"
    if np.max(values) <= 1e-6:
        return "bounded"
    if np.min(values) > 0 and np.max(values) / np.min(values) <= 2.0:
        return "bounded"
    if np.all(np.diff(values) > 0):
        return "growing"
    return "indeterminate"


def projected_gradient_oracle(spec: OcpSpec, tol: float = 1e-12, max_iter: int = 100000) -> np.ndarray:
    """Control-constrained reference solution by projected gradient on the reduced problem."""
    if spec.constraint_kind != "control":
        raise InvalidProblemError("the projected-gradient oracle handles control constraints only")
    problem = build_ocp(dataclasses.replace(spec, stacked=True))
    lo, hi = spec.control_bounds()
    objective = problem.objective
    step = 1.0 / objective.curvature[1]
    u = np.clip(np.zeros(spec.n), lo, hi)
    for _ in range(max_iter):
        u_next = np.clip(u - step * objective.gradient(u), lo, hi)
        if np.linalg.norm(u_next - u) <= tol:
            return u_next
        u = u_next
    raise InvalidProblemError("projected gradient did not converge", {"iterations": max_iter})


@dataclass
class EigenReport:
    n: int
    mu1: float
    mu1_exact: float
    eigen_error: float
    eigenvector: np.ndarray
    multiplier: float
    stationarity_residual: float
    complementarity_residual: float


def eigen_spec(n: int) -> NonlinearProblemSpec:
    """f(u) = h u^T T u, G(u) = h sum(u_i^2), constraint G(u) = 1."""
    h = 1.0 / (n + 1)
    L = laplacian(n)
    return NonlinearProblemSpec(
        f=lambda u: h * float(u @ L.apply_tridiagonal(u)),
        grad_f=lambda u: 2.0 * h * L.apply_tridiagonal(u),
        G=lambda u: np.array([h * float(u @ u)]),
        jac_G=lambda u: 2.0 * h * np.asarray(u, dtype=np.float64)[None, :],
        constraint_set=Singleton([1.0]),
    )


def eigen_example_check(n: int = 63, tol: float = 1e-12, plan: Optional[SamplePlan] = None) -> EigenReport:
    """
    First Dirichlet eigenpair by inverse power iteration, normalized to
    h ||u||^2 = 1, and the KKT residuals of the linearization at it with
    multiplier -mu_1.
    """
    if n < 3:
        raise InvalidProblemError("eigen example needs n >= 3", {"n": n})
    h = 1.0 / (n + 1)
    L = laplacian(n)
    # Residual floor of T applications grows with ||T|| / mu_1
    floor = 64 * np.finfo(float).eps * (4.0 / h ** 2) / np.pi ** 2
    mu, x = inverse_power_iteration(L.apply, L.apply_tridiagonal, n, tol=max(tol, floor))
    u = x / np.sqrt(h * float(x @ x))
    if np.sum(u) < 0:
        u = -u
    exact = 2.0 / h ** 2 * (1.0 - np.cos(np.pi * h))
    kkt = surrogate_kkt_equivalence(eigen_spec(n), u, [-mu], plan or SamplePlan(count=8))
    return EigenReport(
        n=n,
        mu1=mu,
        mu1_exact=exact,
        eigen_error=abs(mu - exact),
        eigenvector=u,
        multiplier=-mu,
        stationarity_residual=kkt.stationarity_surrogate,
        complementarity_residual=kkt.complementarity_surrogate,
    )
