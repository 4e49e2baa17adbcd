from .problem_file import (
    ProblemFile,
    ObjectiveDocument,
    OperatorDocument,
    load_problem_file,
    parse_problem_text,
    problem_from_file,
    problem_to_file,
)
from .report import (
    CandidateAnalysisDocument,
    DiagnosisReport,
    ErrorReport,
    MultiplierReportDocument,
    SolutionDocument,
    SolveSummary,
)

__all__ = [
    "ProblemFile", "ObjectiveDocument", "OperatorDocument", "load_problem_file", "parse_problem_text",
    "problem_from_file", "problem_to_file", "CandidateAnalysisDocument", "DiagnosisReport", "ErrorReport",
    "MultiplierReportDocument", "SolutionDocument", "SolveSummary",
]
