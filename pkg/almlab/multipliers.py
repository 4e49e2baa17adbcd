"""
Multiplier analysis at a candidate solution u* of min theta(u) s.t. S u in K.

The essential multiplier lambda* is the element of range(S) with
S* lambda* = -grad theta(u*); it exists whenever that equation is solvable
(always when range(S) is closed). A proper multiplier is any lambda with
S* lambda = -grad theta(u*) and lambda in N(S u*, K); it may fail to exist
even when lambda* does.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from almlab.alm import AlmTrace
from almlab.errors import AssumptionViolatedError, ConsistencyError, InfeasiblePointError, InvalidProblemError
from almlab.linalg import DEFAULT_RANK_TOL, LinearOperator, as_vector, min_norm_solve, spectral_estimates
from almlab.problem import FEASIBILITY_TOL, ModelProblem
from almlab.sets import SamplePlan, normal_cone_residual

RANGE_MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class RangeGeometry:
    """Orthonormal bases of range(S) and Ker(S*)"""
    range_basis: np.ndarray
    kernel_adjoint_basis: np.ndarray
    gram: np.ndarray

    @property
    def rank(self) -> int:
        return self.range_basis.shape[1]

    def project_range(self, x: np.ndarray) -> np.ndarray:
        U = self.range_basis
        return U @ (U.T @ x)


def range_geometry(S: LinearOperator, rank_tol: float = DEFAULT_RANK_TOL) -> RangeGeometry:
    D = S.to_dense()
    G = S.gram_dense()
    w, V = scipy.linalg.eigh(G)
    top = float(np.max(w)) if w.size else 0.0
    keep = w > rank_tol * top if top > 0 else np.zeros(w.shape, dtype=bool)
    range_basis = (D @ V[:, keep]) / np.sqrt(w[keep])

    SSt = D @ D.T
    w2, V2 = scipy.linalg.eigh(0.5 * (SSt + SSt.T))
    top2 = float(np.max(w2)) if w2.size else 0.0
    kernel = V2[:, w2 <= rank_tol * top2] if top2 > 0 else np.eye(D.shape[0])
    return RangeGeometry(range_basis, kernel, G)


@dataclass
class OptimalityCertificate:
    certified: bool
    feasible: bool
    multiplier_exists: bool
    vi_violation: float
    tol: float


@dataclass
class MultiplierReport:
    u_star: np.ndarray
    lambda_star: np.ndarray
    stationarity_residual: float
    exists_verdict: bool
    vi_violation: float
    kernel_basis: np.ndarray
    sigma_min_positive: float
    rank: int
    certificate: Optional[OptimalityCertificate] = None


def _vi_points(problem: ModelProblem, geometry: RangeGeometry, anchor: np.ndarray, plan: SamplePlan,
               extra_points: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Sampled points of K pushed into range(S), kept when still in K, plus anchor and extras."""
    points = [anchor]
    for z in problem.K.sample(plan, anchor):
        projected = geometry.project_range(z)
        if problem.K.contains(projected, RANGE_MEMBERSHIP_TOL):
            points.append(projected)
    points.extend(as_vector(p, "extra point", problem.dim_x) for p in extra_points)
    return points


def essential_multiplier(
        problem: ModelProblem,
        u_star,
        rank_tol: float = DEFAULT_RANK_TOL,
        plan: Optional[SamplePlan] = None,
        extra_points: Sequence[np.ndarray] = (),
) -> MultiplierReport:
    """
    Solve (S*S) y = -grad theta(u*) in the minimum-norm sense and set
    lambda* = S y. The variational inequality <lambda*, zeta - S u*> <= 0 is
    tested on points of K within range(S); ALM iterates zeta^k can be
    passed as extra_points.
    """
    plan = plan or SamplePlan()
    u_star = as_vector(u_star, "u_star", problem.dim_u)
    anchor = problem.S.apply(u_star)
    if not problem.K.contains(anchor, FEASIBILITY_TOL):
        raise InfeasiblePointError("u* is not feasible", {"distance": problem.K.distance(anchor)})

    g = problem.objective.gradient(u_star)
    geometry = range_geometry(problem.S, rank_tol)
    solution = min_norm_solve(geometry.gram, -g, rank_tol)
    lam_star = problem.S.apply(solution.y)
    residual = float(np.linalg.norm(problem.S.apply(lam_star, adjoint=True) + g))

    points = _vi_points(problem, geometry, anchor, plan, extra_points)
    vi = max(0.0, max(float(lam_star @ (z - anchor)) for z in points))
    spectrum = spectral_estimates(geometry.gram, rank_tol)

    return MultiplierReport(
        u_star=u_star,
        lambda_star=lam_star,
        stationarity_residual=residual,
        exists_verdict=bool(residual <= rank_tol * (1.0 + np.linalg.norm(g))),
        vi_violation=vi,
        kernel_basis=geometry.kernel_adjoint_basis,
        sigma_min_positive=float(np.sqrt(max(spectrum.smallest_positive, 0.0))),
        rank=geometry.rank,
    )


def optimality_certificate(
        problem: ModelProblem,
        u,
        tol: float = 1e-8,
        rank_tol: float = DEFAULT_RANK_TOL,
        plan: Optional[SamplePlan] = None,
        extra_points: Sequence[np.ndarray] = (),
) -> Tuple[bool, Optional[MultiplierReport]]:
    """
    u is certified optimal when it is feasible, an essential multiplier
    exists and the sampled variational inequality holds to tol. Infeasible
    points get no report.
    """
    u = as_vector(u, "u", problem.dim_u)
    if not problem.is_feasible(u):
        return False, None
    report = essential_multiplier(problem, u, rank_tol, plan, extra_points)
    certified = report.exists_verdict and report.vi_violation <= tol
    report.certificate = OptimalityCertificate(certified, True, report.exists_verdict, report.vi_violation, tol)
    return certified, report


@dataclass
class ProperCandidateAnalysis:
    candidate: np.ndarray
    stationarity: float
    normal_cone_residual: float
    restriction_gap: float
    passes: bool
    compatibility: Optional[bool] = None
    consistency: Optional[bool] = None


def proper_candidate_check(
        problem: ModelProblem,
        u_star,
        lam_bar,
        tol: float = 1e-8,
        plan: Optional[SamplePlan] = None,
        report: Optional[MultiplierReport] = None,
        rank_tol: float = DEFAULT_RANK_TOL,
) -> ProperCandidateAnalysis:
    """
    Is lam_bar a proper multiplier at u*? Tests stationarity
    ||grad theta(u*) + S* lam_bar||, the sampled normal-cone condition and
    that its restriction to range(S) equals lambda*.
    """
    plan = plan or SamplePlan()
    u_star = as_vector(u_star, "u_star", problem.dim_u)
    lam_bar = as_vector(lam_bar, "candidate multiplier", problem.dim_x)
    if report is None:
        report = essential_multiplier(problem, u_star, rank_tol, plan)

    g = problem.objective.gradient(u_star)
    stationarity = float(np.linalg.norm(g + problem.S.apply(lam_bar, adjoint=True)))
    cone = normal_cone_residual(problem.K, problem.S.apply(u_star), lam_bar, plan)
    geometry = range_geometry(problem.S, rank_tol)
    gap = float(np.linalg.norm(geometry.project_range(lam_bar) - report.lambda_star))

    return ProperCandidateAnalysis(
        candidate=lam_bar,
        stationarity=stationarity,
        normal_cone_residual=cone,
        restriction_gap=gap,
        passes=bool(stationarity <= tol and cone <= tol and gap <= tol),
    )


@dataclass
class CompatibilityResult:
    compatibility: bool
    consistency: bool
    in_normal_cone: bool
    t0: Optional[float] = None
    constructed: Optional[np.ndarray] = None
    analysis: Optional[ProperCandidateAnalysis] = None


def _kernel_in_range(geometry: RangeGeometry, functional: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of Ker(functional) within range(S)."""
    coords = geometry.range_basis.T @ functional
    if np.linalg.norm(coords) <= tol:
        return geometry.range_basis
    return geometry.range_basis @ scipy.linalg.null_space(coords[None, :])


def _same_subspace(A: np.ndarray, B: np.ndarray, tol: float) -> bool:
    """Equal dimension and largest principal angle at most tol."""
    if A.shape[1] != B.shape[1]:
        return False
    if A.shape[1] == 0:
        return True
    return bool(np.max(scipy.linalg.subspace_angles(A, B)) <= tol)


def compatibility_consistency_check(
        problem: ModelProblem,
        u_star,
        lam_star,
        lam_tilde,
        zeta_bar0,
        tol: float = 1e-8,
        plan: Optional[SamplePlan] = None,
        rank_tol: float = DEFAULT_RANK_TOL,
) -> CompatibilityResult:
    """
    Build a proper multiplier from a normal-cone element lam_tilde.

    Compatibility: Ker(lam_tilde) and Ker(lambda*) coincide within range(S).
    Consistency: <lam_tilde, zeta_bar0> > 0 and <lambda*, zeta_bar0> > 0 for
    zeta_bar0 in range(S). When both hold and lam_tilde is in the normal
    cone, lam_bar = t0 lam_tilde with t0 = <lambda*, zeta_bar0> / <lam_tilde, zeta_bar0>
    is a proper multiplier.

    Raises:
        AssumptionViolatedError: lambda* = 0, where lam_bar = 0 is proper
    """
    plan = plan or SamplePlan()
    u_star = as_vector(u_star, "u_star", problem.dim_u)
    lam_star = as_vector(lam_star, "lambda*", problem.dim_x)
    lam_tilde = as_vector(lam_tilde, "normal-cone element", problem.dim_x)
    zeta_bar0 = as_vector(zeta_bar0, "zeta_bar0", problem.dim_x)

    if np.linalg.norm(lam_star) <= tol:
        raise AssumptionViolatedError("Assumption violated: the essential multiplier is zero; lambda = 0 is proper")
    geometry = range_geometry(problem.S, rank_tol)
    if np.linalg.norm(zeta_bar0 - geometry.project_range(zeta_bar0)) > tol * (1.0 + np.linalg.norm(zeta_bar0)):
        raise InvalidProblemError("zeta_bar0 must lie in range(S)")

    compatibility = _same_subspace(
        _kernel_in_range(geometry, lam_tilde, tol),
        _kernel_in_range(geometry, lam_star, tol),
        tol,
    )
    tilde_pair = float(lam_tilde @ zeta_bar0)
    star_pair = float(lam_star @ zeta_bar0)
    consistency = tilde_pair > tol and star_pair > tol
    in_cone = normal_cone_residual(problem.K, problem.S.apply(u_star), lam_tilde, plan) <= tol

    result = CompatibilityResult(compatibility, consistency, in_cone)
    if compatibility and consistency and in_cone:
        result.t0 = star_pair / tilde_pair
        result.constructed = result.t0 * lam_tilde
        analysis = proper_candidate_check(problem, u_star, result.constructed, tol, plan, rank_tol=rank_tol)
        analysis.compatibility, analysis.consistency = True, True
        if not analysis.passes:
            raise ConsistencyError(
                "constructed multiplier fails the proper-multiplier check",
                {"stationarity": analysis.stationarity, "normal_cone_residual": analysis.normal_cone_residual,
                 "restriction_gap": analysis.restriction_gap},
            )
        result.analysis = analysis
    return result


@dataclass
class ProbeGapTable:
    ks: np.ndarray
    gaps: np.ndarray

    @property
    def last_quarter_max(self) -> float:
        if self.gaps.size == 0:
            return 0.0
        return float(np.max(self.gaps[(3 * self.gaps.shape[0]) // 4:]))


def multiplier_convergence_probe(trace: AlmTrace, lam_star, S: LinearOperator, probes=None) -> ProbeGapTable:
    """|<lam^k - lambda*, S v_j>| for records k >= 2 and probe directions v_j."""
    V = trace.probes if probes is None else np.atleast_2d(np.asarray(probes, dtype=np.float64))
    lam_star = as_vector(lam_star, "lambda*", S.shape[0])
    SV = np.array([S.apply(v) for v in V])
    records = trace.records[1:]
    lams = np.array([r.lam for r in records]).reshape(len(records), S.shape[0])
    gaps = np.abs((lams - lam_star) @ SV.T)
    return ProbeGapTable(np.array([r.k for r in records]), gaps)


def probe_limit_functional(trace: AlmTrace, problem: ModelProblem, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """
    The element mu of range(S) whose probe values <mu, S v_j> match the
    last record's, in the least-squares sense. For a bounded-probe limit it
    equals lambda*, even when the multipliers themselves diverge.
    """
    V = trace.probes
    G = problem.S.gram_dense()
    y, *_ = scipy.linalg.lstsq(V @ G, trace.last.probe_values, cond=rank_tol)
    return problem.S.apply(y)


def stationarity_set_distance(problem: ModelProblem, u, lam, rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """||S (S*S)^+ (S* lam + grad theta(u))||, the distance from lam to {S* lam = -grad theta(u)}."""
    u = as_vector(u, "u", problem.dim_u)
    lam = as_vector(lam, "multiplier", problem.dim_x)
    v = problem.S.apply(lam, adjoint=True) + problem.objective.gradient(u)
    y = min_norm_solve(problem.S.gram_dense(), v, rank_tol).y
    return float(np.linalg.norm(problem.S.apply(y)))


@dataclass
class ClosedRangeRow:
    index: int
    sigma_min_positive: float
    sigma_max: float
    rank: int


def closed_range_diagnostic(operators: Sequence[LinearOperator], rank_tol: float = DEFAULT_RANK_TOL) -> List[ClosedRangeRow]:
    """Smallest positive singular value per operator; a decay to zero across a family signals a non-closed range."""
    rows = []
    for index, S in enumerate(operators):
        w = scipy.linalg.eigvalsh(S.gram_dense())
        top = float(np.max(w)) if w.size else 0.0
        positive = w[w > rank_tol * top] if top > 0 else np.zeros(0)
        rows.append(ClosedRangeRow(
            index=index,
            sigma_min_positive=float(np.sqrt(np.min(positive))) if positive.size else 0.0,
            sigma_max=float(np.sqrt(max(top, 0.0))),
            rank=int(positive.size),
        ))
    return rows


def is_nonincreasing(rows: Sequence[ClosedRangeRow]) -> bool:
    values = [r.sigma_min_positive for r in rows]
    return all(b <= a for a, b in zip(values[:-1], values[1:]))


@dataclass
class RobinsonReport:
    holds: bool
    witness: Optional[np.ndarray] = None
    generators: List[np.ndarray] = field(default_factory=list)


def robinson_condition_check(
        problem: ModelProblem,
        u_star,
        tol: float = 1e-9,
        rank_tol: float = DEFAULT_RANK_TOL,
) -> RobinsonReport:
    """
    Robinson's condition at u* holds iff N(S u*, K) and Ker(S*) meet only
    at zero. With normal-cone generators N, each direction +/- k_j of a
    Ker(S*) basis gets the linear program

        max <k, N w>  s.t.  w >= 0, sum(w) <= 1, P_range(S) N w = 0,

    and a positive optimum exhibits a nonzero witness N w.
    """
    u_star = as_vector(u_star, "u_star", problem.dim_u)
    zeta = problem.S.apply(u_star)
    if not problem.K.contains(zeta, FEASIBILITY_TOL):
        raise InfeasiblePointError("u* is not feasible", {"distance": problem.K.distance(zeta)})
    generators = problem.K.normal_generators(problem.K.project(zeta))
    geometry = range_geometry(problem.S, rank_tol)
    if not generators or geometry.kernel_adjoint_basis.shape[1] == 0:
        return RobinsonReport(True, None, generators)

    N = np.column_stack(generators)
    m = N.shape[1]
    A_eq = geometry.range_basis.T @ N if geometry.rank else None
    b_eq = np.zeros(geometry.rank) if geometry.rank else None
    for k in geometry.kernel_adjoint_basis.T:
        for direction in (k, -k):
            result = linprog(
                c=-(N.T @ direction),
                A_ub=np.ones((1, m)),
                b_ub=[1.0],
                A_eq=A_eq,
                b_eq=b_eq,
                bounds=[(0, None)] * m,
                method="highs",
            )
            if result.status == 0 and -result.fun > tol:
                return RobinsonReport(False, N @ result.x, generators)
    return RobinsonReport(True, None, generators)
