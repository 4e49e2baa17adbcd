"""
Checks run on a finished ALM trace: the Fejér-type residual inequality,
the Bregman telescoping identity and weak asymptotic KKT residuals.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from almlab.alm import AlmTrace, fejer_slack
from almlab.errors import InfeasiblePointError
from almlab.linalg import as_vector
from almlab.problem import ModelProblem
from almlab.sets import SamplePlan

REFERENCE_TOL = 1e-9
DEFAULT_T_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0)


@dataclass
class ConvergenceReport:
    fejer_slacks: np.ndarray
    max_fejer_slack: float
    fejer_ok: bool
    partial_sums: np.ndarray
    partial_sums_monotone: bool
    tail_increment: float
    cauchy_ok: bool
    lambda_update_residual: float


def convergence_monitors(trace: AlmTrace, c0: float, beta: float, slack: float) -> ConvergenceReport:
    """
    Fejér slacks for every step between records k >= 2 and the partial
    sums of ||r^k||^2. The sums must be nondecreasing (trivially) and the
    last quarter of the run must add no more than half the total.
    """
    records = trace.records[1:]
    slacks = np.array([
        fejer_slack(a.residual, b.residual, float(np.linalg.norm(b.u - a.u)), c0, beta)
        for a, b in zip(records[:-1], records[1:])
    ])
    squares = np.array([r.r_norm ** 2 for r in records])
    sums = np.cumsum(squares)
    lambda_update = max(
        [float(np.linalg.norm(b.lam - a.lam - beta * b.residual)) for a, b in zip(trace.records[:-1], trace.records[1:])],
        default=0.0,
    )
    max_slack = float(np.max(slacks)) if slacks.size else -np.inf

    if sums.size >= 4:
        cut = (3 * sums.size) // 4
        tail = float(sums[-1] - sums[cut - 1])
        cauchy_ok = tail <= max(slack, 0.5 * float(sums[-1]))
    else:
        tail, cauchy_ok = 0.0, True

    return ConvergenceReport(
        fejer_slacks=slacks,
        max_fejer_slack=max_slack,
        fejer_ok=bool(max_slack <= slack),
        partial_sums=sums,
        partial_sums_monotone=bool(np.all(np.diff(sums) >= 0.0)),
        tail_increment=tail,
        cauchy_ok=cauchy_ok,
        lambda_update_residual=lambda_update,
    )


@dataclass
class BregmanReport:
    distances: np.ndarray
    steps: np.ndarray
    identity_residuals: np.ndarray
    telescoping_residual: float
    min_distance: float
    cauchy_violation: float
    ok: bool


def bregman_monitor(
        trace: AlmTrace,
        problem: ModelProblem,
        reference: Tuple[np.ndarray, np.ndarray],
        slack: float,
) -> BregmanReport:
    """
    Bregman-type distances to a feasible reference (u_hat, zeta_hat):

        D_k = theta(u_hat) - theta(u^k) - <grad theta(u^k), u_hat - u^k> - <lam^k, zeta_hat - zeta^k>

    and checks D-step_k + beta ||r^{k+1}||^2 = D_k - D_{k+1} for k >= 2, its
    telescoped sum, D_k >= -slack and the Cauchy bound
    ||u^k - u^n||^2 <= (2 / c0) (beta sum ||r^i||^2 + |D_k - D_n|).
    """
    u_hat = as_vector(reference[0], "reference u", problem.dim_u)
    zeta_hat = as_vector(reference[1], "reference zeta", problem.dim_x)
    if not problem.K.contains(zeta_hat, REFERENCE_TOL):
        raise InfeasiblePointError("reference zeta is not in K", {"distance": problem.K.distance(zeta_hat)})
    gap = float(np.linalg.norm(problem.S.apply(u_hat) - zeta_hat))
    if gap > REFERENCE_TOL:
        raise InfeasiblePointError("reference does not satisfy S u = zeta", {"gap": gap})

    objective = problem.objective
    beta = trace.beta
    records = trace.records[1:]
    theta_hat = objective.value(u_hat)

    distances, steps, identity = [], [], []
    for rec in records:
        grad = objective.gradient(rec.u)
        distances.append(theta_hat - rec.objective - float(grad @ (u_hat - rec.u)) - float(rec.lam @ (zeta_hat - rec.zeta)))
    for a, b, d_a, d_b in zip(records[:-1], records[1:], distances[:-1], distances[1:]):
        grad = objective.gradient(a.u)
        step = b.objective - a.objective - float(grad @ (b.u - a.u)) - float(a.lam @ (b.zeta - a.zeta))
        steps.append(step)
        identity.append(step + beta * b.r_norm ** 2 - (d_a - d_b))

    distances = np.array(distances)
    steps = np.array(steps)
    identity = np.array(identity)
    telescoping = 0.0
    if steps.size:
        squares = np.array([r.r_norm ** 2 for r in records[1:]])
        telescoping = float(abs(np.sum(steps + beta * squares) - (distances[0] - distances[-1])))

    cauchy = 0.0
    c0 = objective.c0
    if len(records) > 1:
        last = records[-1]
        squares = np.array([r.r_norm ** 2 for r in records])
        for n, rec in enumerate(records[:-1]):
            lhs = float(np.sum((last.u - rec.u) ** 2))
            rhs = (2.0 / c0) * (beta * float(np.sum(squares[n:])) + abs(distances[-1] - distances[n]))
            cauchy = max(cauchy, lhs - rhs)

    min_distance = float(np.min(distances)) if distances.size else 0.0
    max_identity = float(np.max(np.abs(identity))) if identity.size else 0.0
    ok = min_distance >= -slack and max_identity <= slack and telescoping <= slack and cauchy <= slack
    return BregmanReport(distances, steps, identity, telescoping, min_distance, cauchy, bool(ok))


@dataclass
class WakktReport:
    stationarity: np.ndarray
    complementarity: np.ndarray
    combined: np.ndarray

    @property
    def stationarity_tail(self) -> float:
        return float(np.max(np.abs(self.stationarity[(3 * self.stationarity.shape[0]) // 4:])))

    @property
    def complementarity_tail(self) -> float:
        return float(np.max(self.complementarity[(3 * self.complementarity.shape[0]) // 4:]))


def wakkt_residuals(
        problem: ModelProblem,
        trace: AlmTrace,
        test_dirs: Optional[np.ndarray] = None,
        plan: Optional[SamplePlan] = None,
        t_grid: Sequence[float] = DEFAULT_T_GRID,
) -> WakktReport:
    """
    Weak asymptotic KKT residuals against u_final = last iterate, for
    records k >= 2:

        stationarity[k, j]    = <grad theta(u_final), v_j> + <lam^k, S v_j>
        complementarity[k, i] = <lam^k, zeta_i - S u_final>
        combined[k, j]        = max over i, t of stationarity + t * complementarity
    """
    plan = plan or SamplePlan()
    V = trace.probes if test_dirs is None else np.atleast_2d(np.asarray(test_dirs, dtype=np.float64))
    records = trace.records[1:]
    u_final = trace.last.u
    Su = problem.S.apply(u_final)
    grad = problem.objective.gradient(u_final)
    anchor = problem.K.project(Su)
    samples = np.array([anchor] + problem.K.sample(plan, anchor))
    SV = np.array([problem.S.apply(v) for v in V])
    lams = np.array([r.lam for r in records])

    stationarity = (V @ grad)[None, :] + lams @ SV.T
    complementarity = lams @ (samples - Su).T
    t = np.asarray(t_grid, dtype=np.float64)
    best_comp = np.max(complementarity[:, :, None] * t[None, None, :], axis=(1, 2))
    combined = stationarity + best_comp[:, None]
    return WakktReport(stationarity, complementarity, combined)
