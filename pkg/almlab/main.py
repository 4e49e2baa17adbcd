"""
Command-line entry point: solve, example, ocp and diagnose.

Exit codes: 0 success, 1 input error, 2 numerical failure or a failed check.
Reports go to stdout, structured logs and error reports to stderr.
"""
import argparse
import dataclasses
import functools
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from almlab import __version__
from almlab.alm import AlmConfig, alm_solve
from almlab.audit.logger import AuditLogger
from almlab.config import SolverConfig, resolve_out_dir
from almlab.errors import AlmLabError, InfeasiblePointError, InnerSolverError, FeasibilitySuspectError, InvalidProblemError
from almlab.example_registry import ExampleRegistry
from almlab.middleware.logging import CommandLoggingMiddleware
from almlab.models import (
    CandidateAnalysisDocument,
    DiagnosisReport,
    ErrorReport,
    MultiplierReportDocument,
    ProblemFile,
    SolutionDocument,
    SolveSummary,
    load_problem_file,
    problem_from_file,
)
from almlab.multipliers import optimality_certificate, proper_candidate_check
from almlab.ocp import (
    CONSTRAINT_KINDS,
    mesh_refinement_study,
    multiplier_trend,
    study_config,
    study_template,
    write_study_csv,
)
from almlab.sets import SamplePlan

SUMMARY_FILE = "summary.json"
TRACE_FILE = "trace.csv"
STUDY_FILE = "ocp_study.csv"
DIAGNOSIS_FILE = "diagnosis.json"


class CliParser(argparse.ArgumentParser):
    """Argument errors are input errors and exit with 1"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(ErrorReport(error=message).model_dump_json(exclude_none=True), file=sys.stderr)
        self.exit(1)


def _report_error(run_id: str, command: str, start_time: float, error: str, details: Optional[dict] = None):
    AuditLogger.log(
        run_id=run_id,
        command=command,
        latency_ms=(time.time() - start_time) * 1000,
        final_outcome="error",
        error=error,
    )
    print(ErrorReport(error=error, details=details, runId=run_id).model_dump_json(exclude_none=True), file=sys.stderr)


def guarded(command: str) -> Callable:
    """Map exceptions raised by a command handler to exit codes."""

    def wrap(handler: Callable[[argparse.Namespace, str], int]) -> Callable[[argparse.Namespace, str], int]:
        def run(args: argparse.Namespace, run_id: str) -> int:
            start_time = time.time()
            try:
                return handler(args, run_id)
            except AlmLabError as e:
                _report_error(run_id, command, start_time, e.message, e.details)
                return e.exit_code
            except ValueError as e:
                _report_error(run_id, command, start_time, str(e))
                return 1
            except OSError as e:
                _report_error(run_id, command, start_time, f"I/O error: {e}")
                return 1
            except Exception as e:
                _report_error(run_id, command, start_time, f"Internal error: {e}")
                return 1

        return run

    return wrap


def _float_list(text: str) -> List[float]:
    try:
        values = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidProblemError(f"expected a JSON vector, got {text!r}: {e.msg}")
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) for v in values):
        raise InvalidProblemError(f"expected a JSON vector of numbers, got {text!r}")
    return [float(v) for v in values]


def _meshes(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"meshes must be comma-separated integers, got {text!r}")


def _overrides(args: argparse.Namespace) -> dict:
    overrides = {}
    for flag, key in (("beta", "beta"), ("max_outer", "max_outer"), ("tol_primal", "tol_primal"),
                      ("tol_step", "tol_step"), ("probes", "probe_count"), ("seed", "seed")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return overrides


def _solver_config(args: argparse.Namespace, base: Callable[..., AlmConfig] = AlmConfig.from_settings) -> AlmConfig:
    cfg = base(**_overrides(args))
    inner_tol = getattr(args, "inner_tol", None)
    if inner_tol is not None:
        cfg = dataclasses.replace(cfg, inner=dataclasses.replace(cfg.inner, tol_grad_abs=inner_tol))
    return cfg


@guarded("solve")
def cmd_solve(args: argparse.Namespace, run_id: str) -> int:
    start_time = time.time()
    document = load_problem_file(args.problem)
    problem = problem_from_file(document)
    cfg = _solver_config(args)
    out_dir = Path(resolve_out_dir(args.out_dir))
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / TRACE_FILE

    try:
        solution, trace = alm_solve(problem, cfg)
    except (InnerSolverError, FeasibilitySuspectError) as e:
        if getattr(e, "trace", None) is not None:
            e.trace.to_csv(trace_path)
            e.details["trace_path"] = str(trace_path)
        raise
    trace.to_csv(trace_path)

    notes = []
    report_document = None
    if solution.converged:
        plan = SamplePlan(count=SolverConfig.SAMPLES, seed=cfg.seed)
        zetas = [rec.zeta for rec in trace.records[-8:]]
        certified, report = optimality_certificate(problem, solution.u_final, plan=plan, extra_points=zetas)
        if report is not None:
            report_document = MultiplierReportDocument.from_report(report)
            notes.append("certified optimal" if certified else "optimality certificate failed")
    else:
        notes.append(f"stopped after {solution.outer_iterations} outer iterations without convergence")

    summary = SolveSummary(
        run_id=run_id,
        created_at=datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
        version=__version__,
        problem=document.model_dump(by_alias=True),
        config=cfg.to_dict(),
        solution=SolutionDocument.from_solution(solution),
        trace_path=str(trace_path),
        trace_rows=len(trace),
        multiplier_report=report_document,
        notes=notes,
    )
    summary_path = out_dir / SUMMARY_FILE
    summary_path.write_text(summary.model_dump_json(indent=2), encoding="utf-8")

    AuditLogger.log(
        run_id=run_id,
        command="solve",
        parameters=cfg.to_dict(),
        termination=solution.termination_reason,
        outer_iterations=solution.outer_iterations,
        latency_ms=(time.time() - start_time) * 1000,
        final_outcome="success" if solution.converged else "not_converged",
    )

    print(f"termination: {solution.termination_reason} after {solution.outer_iterations} outer iterations")
    print(f"u = {solution.u_final.tolist()}")
    print(f"lambda = {solution.lambda_final.tolist()}")
    if report_document is not None:
        print(f"essential multiplier = {report_document.lambda_star}")
    print(f"summary: {summary_path}")
    print(f"trace: {trace_path}")
    return 0 if solution.converged else 2


@guarded("example")
def cmd_example(args: argparse.Namespace, run_id: str) -> int:
    start_time = time.time()
    registry = ExampleRegistry(SamplePlan(count=SolverConfig.SAMPLES, seed=SolverConfig.SEED))
    handlers = registry.get_example(args.name)
    params = {key: getattr(args, key) for key in ("alpha", "r", "beta", "n") if getattr(args, key) is not None}

    valid, details = handlers["validate"](params)
    if not valid:
        _report_error(run_id, "example", start_time, "Validation failed", details)
        return 1

    outcome = handlers["execute"](params)
    print(handlers["report"](outcome))
    AuditLogger.log(
        run_id=run_id,
        command="example",
        parameters={"name": args.name, **params},
        latency_ms=(time.time() - start_time) * 1000,
        final_outcome="pass" if outcome.passed else "fail",
    )
    return 0 if outcome.passed else 2


@guarded("ocp")
def cmd_ocp(args: argparse.Namespace, run_id: str) -> int:
    start_time = time.time()
    meshes = sorted(set(args.meshes))
    if len(meshes) < 2:
        raise InvalidProblemError("a mesh study needs at least two meshes", {"meshes": meshes})

    template = study_template(args.constraint, args.alpha, reference_n=meshes[-1])
    cfg = _solver_config(args, functools.partial(study_config, args.constraint))
    rows = mesh_refinement_study(template, meshes, cfg, run_id=run_id)

    out = Path(args.out) if args.out else Path(resolve_out_dir(SolverConfig.OUT_DIR)) / STUDY_FILE
    write_study_csv(rows, out)

    blocks = ("state", "control") if args.constraint == "both" else (args.constraint,)
    for block in blocks:
        print(f"{block} multiplier norms: {multiplier_trend(rows, block)}")
    print(f"study: {out}")

    failed = [r.n for r in rows if r.error is not None]
    AuditLogger.log(
        run_id=run_id,
        command="ocp",
        parameters={"constraint": args.constraint, "meshes": meshes, "alpha": args.alpha, "beta": cfg.beta},
        latency_ms=(time.time() - start_time) * 1000,
        final_outcome="success" if not failed else "partial",
        error=f"meshes failed: {failed}" if failed else None,
    )
    return 0 if not failed else 2


@guarded("diagnose")
def cmd_diagnose(args: argparse.Namespace, run_id: str) -> int:
    start_time = time.time()
    summary_path = Path(args.summary)
    if not summary_path.is_file():
        raise InvalidProblemError(f"summary file not found: {summary_path}")
    summary = SolveSummary.model_validate_json(summary_path.read_text(encoding="utf-8"))
    problem = problem_from_file(ProblemFile.model_validate(summary.problem))

    point = _float_list(args.point) if args.point else summary.solution.u_final
    plan = SamplePlan(count=args.samples, seed=args.seed)
    extra = [np.asarray(summary.solution.zeta_final)]
    _, report = optimality_certificate(problem, point, plan=plan, extra_points=extra)
    if report is None:
        raise InfeasiblePointError("the diagnosed point is not feasible", {"point": point})

    analysis_document = None
    if args.candidate:
        analysis = proper_candidate_check(problem, point, _float_list(args.candidate), plan=plan, report=report)
        analysis_document = CandidateAnalysisDocument.from_analysis(analysis)

    diagnosis = DiagnosisReport(
        run_id=run_id,
        summary_path=str(summary_path),
        point=list(report.u_star.tolist()),
        samples=args.samples,
        seed=args.seed,
        multiplier_report=MultiplierReportDocument.from_report(report),
        candidate_analysis=analysis_document,
    )
    out = Path(args.out) if args.out else summary_path.parent / DIAGNOSIS_FILE
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(diagnosis.model_dump_json(indent=2), encoding="utf-8")

    print(f"essential multiplier = {report.lambda_star.tolist()} (exists: {report.exists_verdict})")
    print(f"variational inequality violation: {report.vi_violation:.3e}")
    if analysis_document is not None:
        print(f"candidate stationarity {analysis_document.stationarity:.3e}, "
              f"normal-cone residual {analysis_document.normal_cone_residual:.3e}, "
              f"restriction gap {analysis_document.restriction_gap:.3e}: "
              + ("proper" if analysis_document.passes else "not proper"))
    print(f"report: {out}")

    AuditLogger.log(
        run_id=run_id,
        command="diagnose",
        parameters={"summary": str(summary_path), "samples": args.samples, "seed": args.seed},
        latency_ms=(time.time() - start_time) * 1000,
        final_outcome="success",
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="almlab", description="Augmented Lagrangian solver and multiplier diagnostics")
    parser.add_argument("--version", action="version", version=f"almlab {__version__}")
    parser.add_argument("--run-id", dest="run_id", default=None, help="Identifier carried by every log line")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    solve = commands.add_parser("solve", help="Run ALM on a problem file")
    solve.add_argument("problem", help="Problem JSON file")
    solve.add_argument("--beta", type=float)
    solve.add_argument("--max-outer", dest="max_outer", type=int)
    solve.add_argument("--tol-primal", dest="tol_primal", type=float)
    solve.add_argument("--tol-step", dest="tol_step", type=float)
    solve.add_argument("--inner-tol", dest="inner_tol", type=float)
    solve.add_argument("--probes", type=int, help="Number of random probe directions")
    solve.add_argument("--seed", type=int)
    solve.add_argument("--out-dir", dest="out_dir", default=SolverConfig.OUT_DIR)
    solve.set_defaults(handler=cmd_solve)

    example = commands.add_parser("example", help="Run a built-in example and check its known results")
    example.add_argument("name", help=f"One of: {', '.join(ExampleRegistry().names)}")
    example.add_argument("--alpha", type=float)
    example.add_argument("--r", type=float)
    example.add_argument("--beta", type=float)
    example.add_argument("--n", type=int)
    example.set_defaults(handler=cmd_example)

    ocp = commands.add_parser("ocp", help="Mesh-refinement study for the 1D control problem")
    ocp.add_argument("--constraint", choices=CONSTRAINT_KINDS, default="control")
    ocp.add_argument("--meshes", type=_meshes, default=[15, 31, 63])
    ocp.add_argument("--alpha", type=float, default=1e-2)
    ocp.add_argument("--beta", type=float)
    ocp.add_argument("--max-outer", dest="max_outer", type=int)
    ocp.add_argument("--out", default=None, help="Study CSV path")
    ocp.set_defaults(handler=cmd_ocp)

    diagnose = commands.add_parser("diagnose", help="Multiplier diagnostics for a finished solve")
    diagnose.add_argument("summary", help="summary.json written by solve")
    diagnose.add_argument("--candidate", help="Candidate multiplier as a JSON vector")
    diagnose.add_argument("--point", help="Point to diagnose as a JSON vector; defaults to the solution")
    diagnose.add_argument("--samples", type=int, default=SolverConfig.SAMPLES)
    diagnose.add_argument("--seed", type=int, default=SolverConfig.SEED)
    diagnose.add_argument("--out", default=None, help="Report path")
    diagnose.set_defaults(handler=cmd_diagnose)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    return CommandLoggingMiddleware(args.handler)(args)


if __name__ == "__main__":
    sys.exit(main())
