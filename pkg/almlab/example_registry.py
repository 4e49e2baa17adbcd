from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from almlab.alm import AlmConfig, InnerConfig, alm_solve
from almlab.monitors import convergence_monitors
from almlab.multipliers import (
    compatibility_consistency_check,
    essential_multiplier,
    optimality_certificate,
    proper_candidate_check,
    robinson_condition_check,
    stationarity_set_distance,
)
from almlab.instances import offset_problem, tangent_problem, toy_problem
from almlab.ocp import eigen_example_check
from almlab.sets import SamplePlan, normal_cone_candidates

EPS = np.finfo(float).eps
FEJER_FACTOR = 10.0


@dataclass
class ExampleOutcome:
    """Result of one built-in example"""
    name: str
    checks: Dict[str, bool] = field(default_factory=dict)
    lines: List[str] = field(default_factory=list)
    data: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def check(self, label: str, ok: bool):
        self.checks[label] = bool(ok)

    def say(self, text: str):
        self.lines.append(text)


def _fmt(v) -> str:
    return np.array2string(np.asarray(v, dtype=float), precision=10, separator=", ")


class ExampleRegistry:
    """Maps example names to parameter validation, execution and report rendering"""

    def __init__(self, plan: Optional[SamplePlan] = None):
        self.plan = plan or SamplePlan()
        self.examples = {
            "ex1-k1": {
                "validate": self._validate_planar,
                "execute": self._execute_tangent_disc,
                "report": self._report,
            },
            "ex1-k2": {
                "validate": self._validate_planar,
                "execute": self._execute_tangent_wedge,
                "report": self._report,
            },
            "ex2-k3": {
                "validate": self._validate_offset,
                "execute": self._execute_offset_disc,
                "report": self._report,
            },
            "ex2-k4": {
                "validate": self._validate_offset,
                "execute": self._execute_half_disc,
                "report": self._report,
            },
            "alm-toy": {
                "validate": self._validate_beta,
                "execute": self._execute_toy,
                "report": self._report,
            },
            "eigen": {
                "validate": self._validate_eigen,
                "execute": self._execute_eigen,
                "report": self._report,
            },
        }

    @property
    def names(self) -> List[str]:
        return list(self.examples.keys())

    def get_example(self, name: str) -> Dict[str, Callable]:
        """Get handlers for a given example name"""
        if name not in self.examples:
            raise ValueError(f"Unknown example: {name}. Available examples: {', '.join(self.names)}")
        return self.examples[name]

    def run(self, name: str, params: Dict[str, Any]) -> ExampleOutcome:
        handlers = self.get_example(name)
        valid, details = handlers["validate"](params)
        if not valid:
            raise ValueError(details["reason"])
        return handlers["execute"](params)

    @staticmethod
    def _validate_beta(params: Dict[str, Any]) -> Tuple[bool, Optional[Dict[str, Any]]]:
        if params.get("beta", 1.0) <= 0:
            return False, {"field": "beta", "reason": "beta must be positive"}
        return True, None

    @classmethod
    def _validate_planar(cls, params: Dict[str, Any]) -> Tuple[bool, Optional[Dict[str, Any]]]:
        return cls._validate_beta(params)

    @classmethod
    def _validate_offset(cls, params: Dict[str, Any]) -> Tuple[bool, Optional[Dict[str, Any]]]:
        alpha, r = params.get("alpha", 1.0), params.get("r", 0.25)
        if r <= 0:
            return False, {"field": "r", "reason": "r must be positive"}
        if alpha <= 2 * r:
            return False, {"field": "alpha", "reason": "alpha must exceed 2r so the constraint is active"}
        return cls._validate_beta(params)

    @staticmethod
    def _validate_eigen(params: Dict[str, Any]) -> Tuple[bool, Optional[Dict[str, Any]]]:
        if params.get("n", 63) < 3:
            return False, {"field": "n", "reason": "n must be at least 3"}
        return True, None

    @staticmethod
    def _alm_config(params: Dict[str, Any], **overrides) -> AlmConfig:
        settings = dict(beta=params.get("beta", 1.0), max_outer=params.get("max_outer", 300), inner=InnerConfig())
        settings.update(overrides)
        return AlmConfig(**settings)

    def _check_fejer(self, outcome: ExampleOutcome, problem, trace, cfg: AlmConfig):
        monitors = convergence_monitors(trace, problem.objective.c0, cfg.beta, FEJER_FACTOR * cfg.inner.tol_grad_abs)
        outcome.say(f"max Fejér slack: {monitors.max_fejer_slack:.3e}")
        outcome.check("fejer", monitors.fejer_ok)

    def _execute_tangent_disc(self, params: Dict[str, Any]) -> ExampleOutcome:
        alpha = params.get("alpha", 1.0)
        outcome = ExampleOutcome("ex1-k1")
        problem = tangent_problem(alpha)
        u_star = np.zeros(2)

        report = essential_multiplier(problem, u_star, plan=self.plan)
        outcome.say(f"minimizer u* = {_fmt(u_star)}")
        outcome.say(f"essential multiplier = {_fmt(report.lambda_star)}")
        outcome.check("essential", np.linalg.norm(report.lambda_star - [alpha, 0.0]) <= 1e-8)

        cfg = self._alm_config(params)
        solution, trace = alm_solve(problem, cfg)
        norms = np.linalg.norm(trace.iterates()[1:], axis=1)
        outcome.say(f"ALM after {solution.outer_iterations} steps: u = {_fmt(solution.u_final)}")
        self._check_fejer(outcome, problem, trace, cfg)

        if alpha == 0.0:
            analysis = proper_candidate_check(problem, u_star, [0.0, 0.0], plan=self.plan, report=report)
            outcome.say("proper multiplier (0, 0) " + ("passes" if analysis.passes else "fails"))
            outcome.check("proper-zero", analysis.passes)
            outcome.check("alm-converged", solution.converged)
        else:
            residuals = []
            for t in np.linspace(-2.0, 2.0, 9):
                analysis = proper_candidate_check(problem, u_star, [alpha, t], plan=self.plan, report=report)
                residuals.append(analysis.normal_cone_residual)
            outcome.say(f"no proper multiplier: smallest normal-cone residual over (alpha, t) = {min(residuals):.3e}")
            outcome.check("no-proper", min(residuals) > 0.0)
            outcome.check("alm-decreasing", norms[-1] < norms[len(norms) // 2] < norms[0])
            lam2 = trace.lambdas()[:, 1]
            outcome.say(f"lambda2 drifts to {lam2[-1]:.4f}")
            outcome.check("multiplier-unbounded", lam2[-1] < lam2[len(lam2) // 2] < 0.0)
            robinson = robinson_condition_check(problem, u_star)
            outcome.say("Robinson condition " + ("holds" if robinson.holds else "fails"))
            outcome.check("robinson-fails", not robinson.holds)
        return outcome

    def _execute_tangent_wedge(self, params: Dict[str, Any]) -> ExampleOutcome:
        alpha = params.get("alpha", 1.0)
        outcome = ExampleOutcome("ex1-k2")
        problem = tangent_problem(alpha, wedge=True)
        u_star = np.zeros(2)
        report = essential_multiplier(problem, u_star, plan=self.plan)
        outcome.say(f"essential multiplier = {_fmt(report.lambda_star)}")
        outcome.check("essential", np.linalg.norm(report.lambda_star - [alpha, 0.0]) <= 1e-8)

        if alpha == 0.0:
            analysis = proper_candidate_check(problem, u_star, [0.0, 0.0], plan=self.plan, report=report)
            outcome.say("essential multiplier is zero; (0, 0) is proper")
            outcome.check("proper-zero", analysis.passes)
            return outcome

        constructed = []
        for candidate in normal_cone_candidates(problem.K, problem.S.apply(u_star), count=100, seed=self.plan.seed):
            result = compatibility_consistency_check(problem, u_star, report.lambda_star, candidate,
                                                     report.lambda_star, plan=self.plan)
            if result.constructed is not None:
                constructed.append(result)
        outcome.data["constructed"] = [r.constructed for r in constructed]
        if alpha > 0:
            outcome.say(f"constructed {len(constructed)} proper multipliers, e.g. {_fmt(constructed[0].constructed) if constructed else '-'}")
            outcome.check("constructed", bool(constructed) and all(r.analysis.passes for r in constructed))
        else:
            outcome.say("consistency fails for every normal-cone candidate; no proper multiplier")
            outcome.check("none-consistent", not constructed)
        return outcome

    def _offset_common(self, name: str, params: Dict[str, Any], half: bool) -> Tuple[ExampleOutcome, Any, Any, Any]:
        alpha, r = params.get("alpha", 1.0), params.get("r", 0.25)
        outcome = ExampleOutcome(name)
        problem = offset_problem(alpha, r, half)
        u_star = np.array([2 * r, 0.0])

        cfg = self._alm_config(params)
        solution, trace = alm_solve(problem, cfg)
        outcome.say(f"ALM minimizer = {_fmt(solution.u_final)} after {solution.outer_iterations} steps")
        outcome.check("alm", np.linalg.norm(solution.u_final - u_star) <= 1e-6)
        self._check_fejer(outcome, problem, trace, cfg)

        certified, report = optimality_certificate(problem, u_star, plan=self.plan)
        outcome.say(f"essential multiplier = {_fmt(report.lambda_star)}")
        outcome.check("essential", np.linalg.norm(report.lambda_star - [alpha - 2 * r, 0.0]) <= 1e-8)
        outcome.check("certified", certified)
        return outcome, problem, u_star, report

    def _execute_offset_disc(self, params: Dict[str, Any]) -> ExampleOutcome:
        outcome, problem, u_star, report = self._offset_common("ex2-k3", params, half=False)
        lam = report.lambda_star
        analysis = proper_candidate_check(problem, u_star, lam, plan=self.plan, report=report)
        outcome.say(f"proper multiplier {_fmt(lam)} " + ("passes" if analysis.passes else "fails")
                    + f" (stationarity {analysis.stationarity:.1e}, cone {analysis.normal_cone_residual:.1e})")
        outcome.check("proper", analysis.passes)
        for shift in (0.1, -0.1):
            perturbed = proper_candidate_check(problem, u_star, lam + [0.0, shift], plan=self.plan, report=report)
            outcome.check(f"perturbed {shift:+.1f} fails", not perturbed.passes)
        built = compatibility_consistency_check(problem, u_star, lam, [1.0, 0.0], lam, plan=self.plan)
        outcome.check("construction", built.constructed is not None and np.allclose(built.constructed, lam, atol=1e-10))
        robinson = robinson_condition_check(problem, u_star)
        outcome.say("unique proper multiplier; Robinson condition " + ("holds" if robinson.holds else "fails"))
        outcome.check("robinson-holds", robinson.holds)
        return outcome

    def _execute_half_disc(self, params: Dict[str, Any]) -> ExampleOutcome:
        outcome, problem, u_star, report = self._offset_common("ex2-k4", params, half=True)
        first = report.lambda_star[0]
        for t in (0.0, -0.1, -0.5):
            analysis = proper_candidate_check(problem, u_star, [first, t], plan=self.plan, report=report)
            outcome.say(f"({first:.4f}, {t:+.1f}) " + ("passes" if analysis.passes else "fails"))
            outcome.check(f"t={t:+.1f} passes", analysis.passes)
        wrong = proper_candidate_check(problem, u_star, [first, 0.1], plan=self.plan, report=report)
        outcome.say(f"({first:.4f}, +0.1) " + ("passes" if wrong.passes else "fails"))
        outcome.check("t=+0.1 fails", not wrong.passes)
        robinson = robinson_condition_check(problem, u_star)
        outcome.say("proper multipliers not unique; Robinson condition " + ("holds" if robinson.holds else "fails"))
        outcome.check("robinson-fails", not robinson.holds)
        return outcome

    def _execute_toy(self, params: Dict[str, Any]) -> ExampleOutcome:
        beta = params.get("beta", 1.0)
        outcome = ExampleOutcome("alm-toy")
        problem = toy_problem()
        q = 1.0 / (1.0 + 5.0 * beta)
        cfg = AlmConfig(beta=beta, max_outer=30, tol_primal=1e-300, tol_step=1e-300)
        _, trace = alm_solve(problem, cfg)

        xs = np.array([rec.u[0] for rec in trace.records])
        s = np.array([rec.lam[0] + 2 * rec.lam[1] for rec in trace.records])

        def ratios_ok(errors: np.ndarray, steps: int) -> bool:
            # one update rounds each error by about (1 + 5 beta) eps
            noise = 16.0 * (1.0 + 5.0 * beta) * EPS
            ok = True
            for a, b in list(zip(errors[:-1], errors[1:]))[:steps]:
                if abs(a) <= 1e-14:
                    continue
                ok &= abs(b / a - q) <= 1e-10 + noise / abs(a)
            return bool(ok)

        outcome.say(f"contraction factor 1/(1 + 5 beta) = {q:.12f}")
        outcome.check("x-ratio", ratios_ok(xs[1:] - 1.0, 20))
        outcome.check("s-ratio", ratios_ok(s + 1.0, 20))
        outcome.check("s30", abs(s[min(29, s.size - 1)] + 1.0) <= 1e-8)
        dist = np.array([stationarity_set_distance(problem, [1.0], rec.lam) for rec in trace.records])
        outcome.check("distance-monotone", bool(np.all(np.diff(dist) <= 1e-14)))
        report = essential_multiplier(problem, [1.0], plan=self.plan)
        outcome.say(f"essential multiplier = {_fmt(report.lambda_star)}")
        outcome.check("essential", np.linalg.norm(report.lambda_star + np.array([1.0, 2.0]) / 5.0) <= 1e-10)
        outcome.data["trace"] = trace
        return outcome

    def _execute_eigen(self, params: Dict[str, Any]) -> ExampleOutcome:
        n = params.get("n", 63)
        outcome = ExampleOutcome("eigen")
        report = eigen_example_check(n)
        outcome.say(f"mu1 = {report.mu1:.12f} (discrete formula {report.mu1_exact:.12f})")
        outcome.say(f"surrogate stationarity residual with multiplier {report.multiplier:.6f}: {report.stationarity_residual:.3e}")
        outcome.check("eigenvalue", report.eigen_error <= 1e-10)
        outcome.check("stationarity", report.stationarity_residual <= 1e-8)
        return outcome

    @staticmethod
    def _report(outcome: ExampleOutcome) -> str:
        lines = [f"example {outcome.name}"]
        lines.extend(f"  {line}" for line in outcome.lines)
        for label, ok in outcome.checks.items():
            lines.append(f"  [{'ok' if ok else 'FAILED'}] {label}")
        lines.append("  verdict: " + ("pass" if outcome.passed else "fail"))
        return "\n".join(lines)
