import itertools

import numpy as np
import pandas as pd
import pytest

from almlab.alm import (
    AlmConfig,
    InnerConfig,
    InnerContext,
    alm_solve,
    fejer_slack,
    inner_solve,
    moreau_gradient,
    moreau_value,
)
from almlab.errors import FeasibilitySuspectError, InnerSolverError, InvalidProblemError
from almlab.linalg import DenseOperator
from almlab.problem import ModelProblem, QuadraticObjective
from almlab.instances import PROJECTOR
from almlab.sets import Ball, Box


def _box_qp_oracle(Qv, bv, lo, hi):
    """Exact minimizer of 1/2 v'Qv - b'v over lo <= v <= hi by active-set enumeration."""
    n = len(bv)
    best, best_value = None, np.inf
    for pattern in itertools.product((0, -1, 1), repeat=n):
        v = np.zeros(n)
        free = [i for i in range(n) if pattern[i] == 0]
        fixed = [i for i in range(n) if pattern[i] != 0]
        for i in fixed:
            v[i] = lo[i] if pattern[i] < 0 else hi[i]
        if free:
            rhs = bv[free] - Qv[np.ix_(free, fixed)] @ v[fixed]
            v[free] = np.linalg.solve(Qv[np.ix_(free, free)], rhs)
        if np.any(v < lo - 1e-12) or np.any(v > hi + 1e-12):
            continue
        value = 0.5 * v @ Qv @ v - bv @ v
        if value < best_value:
            best, best_value = v, value
    return best


class TestConfig:
    """Test solver configuration"""

    def test_tolerance_schedule(self):
        """Test tol / k^p with a floor"""
        inner = InnerConfig(tol_grad_abs=1e-6, tol_exponent=2.0, tol_floor=1e-10)
        assert inner.tolerance(1) == pytest.approx(1e-6)
        assert inner.tolerance(10) == pytest.approx(1e-8)
        assert inner.tolerance(1000) == pytest.approx(1e-10)

    def test_invalid_beta(self):
        """Test beta must be positive"""
        with pytest.raises(InvalidProblemError):
            AlmConfig(beta=0.0)

    def test_unknown_inner_method(self):
        """Test unknown inner methods are listed"""
        with pytest.raises(InvalidProblemError, match="Available methods"):
            InnerConfig(method="bfgs")

    def test_probe_matrix(self):
        """Test canonical probes for small and seeded unit probes for large problems"""
        assert np.array_equal(AlmConfig().probe_matrix(3), np.eye(3))
        P = AlmConfig(seed=4).probe_matrix(40)
        assert P.shape == (8, 40)
        assert np.allclose(np.linalg.norm(P, axis=1), 1.0)
        assert np.array_equal(P, AlmConfig(seed=4).probe_matrix(40))


class TestInnerSolver:
    """Test the Moreau-reduced subproblem"""

    def test_gradient_matches_finite_differences(self, offset):
        """Test the reduced gradient against central differences"""
        u, lam, beta = np.array([0.7, -0.3]), np.array([0.2, 0.1]), 2.0
        grad, _, _ = moreau_gradient(offset, u, lam, beta)
        fd = np.zeros(2)
        for i in range(2):
            e = np.zeros(2)
            e[i] = 1e-6
            fd[i] = (moreau_value(offset, u + e, lam, beta) - moreau_value(offset, u - e, lam, beta)) / 2e-6
        assert np.allclose(grad, fd, atol=1e-6)

    def test_singleton_is_exact(self, toy):
        """Test singleton sets are solved from the normal equations"""
        result = inner_solve(toy, np.zeros(2), 1.0, [0.0], 1e-12)
        assert result.iterations == 1
        assert result.u[0] == pytest.approx(5.0 / 6.0, abs=1e-14)

    def test_newton_on_box(self, box_qp):
        """Test semismooth Newton on box sets"""
        result = inner_solve(box_qp, np.zeros(3), 10.0, np.zeros(3), 1e-11)
        assert result.grad_norm <= 1e-11
        assert np.allclose(result.u, [12.0 / 11.0, -12.0 / 11.0, 0.5], atol=1e-10)
        assert InnerContext(box_qp, 10.0).bounds is not None

    def test_gradient_method_forced(self, box_qp):
        """Test method='gradient' skips the Newton path"""
        assert InnerContext(box_qp, 10.0, "gradient").bounds is None
        result = inner_solve(box_qp, np.zeros(3), 1.0, np.zeros(3), 1e-10, method="gradient")
        assert result.grad_norm <= 1e-10

    def test_iteration_cap(self, offset):
        """Test the inner solver reports failure"""
        with pytest.raises(InnerSolverError):
            inner_solve(offset, np.array([50.0, 50.0]), 1000.0, np.array([10.0, 10.0]), 1e-15, max_iter=2)

    def test_fejer_slack_formula(self):
        """Test the Fejér slack expression"""
        value = fejer_slack(np.array([1.0, 0.0]), np.array([0.5, 0.0]), 0.1, 1.0, 2.0)
        assert value == pytest.approx(0.25 - 1.0 + 0.25 + 0.01)


class TestAlmSolve:
    """Test the outer loop"""

    def test_toy_contraction(self, toy):
        """Test x^k - 1 contracts by 1/(1 + 5 beta)"""
        _, trace = alm_solve(toy, AlmConfig(beta=1.0, max_outer=12, tol_primal=1e-300, tol_step=1e-300))
        errors = np.array([rec.u[0] - 1.0 for rec in trace.records[1:6]])
        assert np.allclose(errors[1:] / errors[:-1], 1.0 / 6.0, atol=1e-10)

    def test_trace_layout(self, toy):
        """Test record 1 is the start and fejer slacks begin at record 3"""
        _, trace = alm_solve(toy, AlmConfig(max_outer=5, tol_primal=1e-300, tol_step=1e-300))
        assert trace[1].k == 1
        assert np.array_equal(trace[1].lam, [0.0, 0.0])
        assert np.allclose(trace[1].zeta, [1.0, 2.0])
        assert np.isnan(trace[1].fejer_slack) and np.isnan(trace[2].fejer_slack)
        assert not np.isnan(trace[3].fejer_slack)
        assert len(trace) == 6

    def test_multiplier_update(self, offset):
        """Test lam^{k+1} = lam^k + beta (S u^{k+1} - zeta^{k+1})"""
        _, trace = alm_solve(offset, AlmConfig(beta=3.0, max_outer=20))
        for prev, rec in zip(trace.records[:-1], trace.records[1:]):
            assert np.allclose(rec.lam, prev.lam + 3.0 * rec.residual, atol=1e-14)

    def test_zeta_in_k(self, offset):
        """Test zeta^k stays in K"""
        _, trace = alm_solve(offset, AlmConfig(max_outer=20))
        assert all(offset.K.contains(rec.zeta, 1e-10) for rec in trace.records)

    def test_offset_disc_solution(self, offset):
        """Test convergence to (2r, 0) with multiplier (alpha - 2r, 0)"""
        solution, _ = alm_solve(offset, AlmConfig(beta=1.0, max_outer=500))
        assert solution.converged
        assert solution.termination_reason == "converged"
        assert np.allclose(solution.u_final, [0.5, 0.0], atol=1e-6)
        assert np.allclose(solution.lambda_final, [0.5, 0.0], atol=1e-6)

    def test_max_outer(self, offset):
        """Test non-convergence is reported, not raised"""
        solution, trace = alm_solve(offset, AlmConfig(max_outer=3, tol_primal=1e-14))
        assert not solution.converged
        assert solution.termination_reason == "max_outer"
        assert len(trace) == 4

    def test_infeasible_stall(self):
        """Test residual stalls on an infeasible problem raise"""
        problem = ModelProblem(QuadraticObjective(np.eye(2), [0.0, 0.0]), DenseOperator(PROJECTOR), Ball([0.0, 2.0], 1.0))
        with pytest.raises(FeasibilitySuspectError) as exc:
            alm_solve(problem, AlmConfig(max_outer=200))
        assert exc.value.trace is not None
        assert exc.value.details["r_norm"] == pytest.approx(1.0)

    def test_trace_frame(self, toy, tmp_path):
        """Test trace columns and CSV export"""
        _, trace = alm_solve(toy, AlmConfig(max_outer=4, tol_primal=1e-300, tol_step=1e-300))
        frame = trace.to_frame()
        assert list(frame.columns[:6]) == ["k", "r_norm", "objective", "lambda_norm", "fejer_slack", "inner_iterations"]
        assert "probe_0" in frame.columns
        path = trace.to_csv(tmp_path / "trace.csv")
        assert len(pd.read_csv(path)) == len(trace)

    @pytest.mark.slow
    @pytest.mark.parametrize("dim", [2, 3, 4, 5, 6])
    def test_random_box_qps(self, dim):
        """Test ALM against active-set enumeration on 100 seeded QPs per dimension"""
        for seed in range(100):
            rng = np.random.default_rng([dim, seed])
            A = rng.standard_normal((dim, dim))
            Q = A @ A.T + 0.1 * np.eye(dim)
            b = 3.0 * rng.standard_normal(dim)
            S = np.eye(dim) + (0.2 / np.sqrt(dim)) * rng.standard_normal((dim, dim))
            lo, hi = -np.ones(dim), np.ones(dim)
            problem = ModelProblem(QuadraticObjective(Q, b), DenseOperator(S), Box(lo, hi), np.zeros(dim))
            solution, _ = alm_solve(problem, AlmConfig(beta=10.0, max_outer=500, tol_primal=1e-10, tol_step=1e-10))

            S_inv = np.linalg.inv(S)
            Qv = S_inv.T @ Q @ S_inv
            v = _box_qp_oracle(0.5 * (Qv + Qv.T), S_inv.T @ b, lo, hi)
            assert solution.converged, f"seed {seed}"
            assert np.allclose(S @ solution.u_final, v, atol=1e-6), f"seed {seed}"

    def test_ball_gradient_path(self):
        """Test the gradient inner solver on a ball constraint"""
        objective = QuadraticObjective(np.eye(2), [3.0, 4.0], 12.5)
        problem = ModelProblem(objective, DenseOperator(np.eye(2)), Ball([0.0, 0.0], 1.0), np.zeros(2))
        solution, _ = alm_solve(problem, AlmConfig(beta=2.0, max_outer=300))
        assert np.allclose(solution.u_final, [0.6, 0.8], atol=1e-6)
