from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from almlab.alm import Solution
from almlab.multipliers import MultiplierReport, ProperCandidateAnalysis


class ErrorReport(BaseModel):
    """Error report printed when a command fails"""
    error: str
    details: Optional[dict] = None
    runId: Optional[str] = None


class SolutionDocument(BaseModel):
    u_final: List[float]
    zeta_final: List[float]
    lambda_final: List[float]
    converged: bool
    termination_reason: str
    outer_iterations: int

    @classmethod
    def from_solution(cls, solution: Solution) -> "SolutionDocument":
        return cls(
            u_final=solution.u_final.tolist(),
            zeta_final=solution.zeta_final.tolist(),
            lambda_final=solution.lambda_final.tolist(),
            converged=solution.converged,
            termination_reason=solution.termination_reason,
            outer_iterations=solution.outer_iterations,
        )


class CertificateDocument(BaseModel):
    certified: bool
    feasible: bool
    multiplier_exists: bool
    vi_violation: float
    tol: float


class MultiplierReportDocument(BaseModel):
    u_star: List[float]
    lambda_star: List[float]
    stationarity_residual: float
    exists_verdict: bool
    vi_violation: float
    kernel_basis: List[List[float]] = Field(..., description="Columns spanning Ker(S*)")
    sigma_min_positive: float
    rank: int
    certificate: Optional[CertificateDocument] = None

    @classmethod
    def from_report(cls, report: MultiplierReport) -> "MultiplierReportDocument":
        certificate = None
        if report.certificate is not None:
            certificate = CertificateDocument(**report.certificate.__dict__)
        return cls(
            u_star=report.u_star.tolist(),
            lambda_star=report.lambda_star.tolist(),
            stationarity_residual=report.stationarity_residual,
            exists_verdict=report.exists_verdict,
            vi_violation=report.vi_violation,
            kernel_basis=report.kernel_basis.T.tolist(),
            sigma_min_positive=report.sigma_min_positive,
            rank=report.rank,
            certificate=certificate,
        )


class CandidateAnalysisDocument(BaseModel):
    candidate: List[float]
    stationarity: float
    normal_cone_residual: float
    restriction_gap: float
    passes: bool
    compatibility: Optional[bool] = None
    consistency: Optional[bool] = None

    @classmethod
    def from_analysis(cls, analysis: ProperCandidateAnalysis) -> "CandidateAnalysisDocument":
        return cls(
            candidate=analysis.candidate.tolist(),
            stationarity=analysis.stationarity,
            normal_cone_residual=analysis.normal_cone_residual,
            restriction_gap=analysis.restriction_gap,
            passes=analysis.passes,
            compatibility=analysis.compatibility,
            consistency=analysis.consistency,
        )


class SolveSummary(BaseModel):
    """Everything needed to reproduce and diagnose a solve"""
    run_id: str
    created_at: str
    version: str
    problem: Dict[str, Any]
    config: Dict[str, Any]
    solution: SolutionDocument
    trace_path: str
    trace_rows: int
    multiplier_report: Optional[MultiplierReportDocument] = None
    notes: List[str] = Field(default_factory=list)


class DiagnosisReport(BaseModel):
    run_id: str
    summary_path: str
    point: List[float]
    samples: int
    seed: int
    multiplier_report: MultiplierReportDocument
    candidate_analysis: Optional[CandidateAnalysisDocument] = None
