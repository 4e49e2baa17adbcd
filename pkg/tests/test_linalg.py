import numpy as np
import pytest

from almlab.errors import DimensionMismatchError, InvalidProblemError, NotPositiveDefiniteError
from almlab.linalg import (
    DenseOperator,
    GramOperator,
    StackedOperator,
    TridiagonalInverseOperator,
    as_vector,
    inverse_power_iteration,
    min_norm_solve,
    power_iteration,
    solve_spd,
    spectral_estimates,
)


def _laplacian_inverse(n):
    h = 1.0 / (n + 1)
    return TridiagonalInverseOperator(np.full(n, 2.0 / h ** 2), np.full(n - 1, -1.0 / h ** 2))


class TestAsVector:
    """Test vector coercion"""

    def test_scalar_becomes_length_one(self):
        """Test scalars are promoted"""
        assert as_vector(3.0).shape == (1,)

    def test_wrong_length(self):
        """Test dimension check"""
        with pytest.raises(DimensionMismatchError, match="expected 3"):
            as_vector([1.0, 2.0], "u", 3)

    def test_non_finite(self):
        """Test NaN entries are rejected"""
        with pytest.raises(InvalidProblemError):
            as_vector([1.0, np.nan])


class TestOperators:
    """Test operator application and adjoints"""

    @pytest.mark.parametrize("build", [
        lambda: DenseOperator(np.random.default_rng(1).standard_normal((4, 3))),
        lambda: _laplacian_inverse(15),
        lambda: TridiagonalInverseOperator([4.0, 5.0, 6.0, 7.0], [1.0, -2.0, 0.5]),
        lambda: StackedOperator([_laplacian_inverse(6), DenseOperator(np.eye(6))]),
        lambda: GramOperator(_laplacian_inverse(6), 1e-2),
    ], ids=["dense", "laplacian-inverse", "tridiagonal-inverse", "stacked", "gram"])
    def test_adjoint(self, build):
        """Test <S v, w> = <v, S* w> on 100 random pairs"""
        S = build()
        m, n = S.shape
        rng = np.random.default_rng(11)
        for _ in range(100):
            v, w = rng.standard_normal(n), rng.standard_normal(m)
            Sv, Stw = S.apply(v), S.apply(w, adjoint=True)
            scale = np.linalg.norm(Sv) * np.linalg.norm(w) + np.linalg.norm(v) * np.linalg.norm(Stw)
            assert abs(Sv @ w - v @ Stw) <= 1e-10 * max(1.0, scale)

    def test_tridiagonal_inverse_solves(self):
        """Test L = T^-1 inverts the stored tridiagonal matrix"""
        L = _laplacian_inverse(31)
        rng = np.random.default_rng(2)
        v = rng.standard_normal(31)
        assert np.allclose(L.apply_tridiagonal(L.apply(v)), v, atol=1e-10)

    def test_tridiagonal_inverse_self_adjoint(self):
        """Test the inverse Laplacian is symmetric"""
        D = _laplacian_inverse(15).to_dense()
        assert np.allclose(D, D.T, atol=1e-14)

    def test_maximum_principle(self):
        """Test T^-1 maps nonnegative vectors to nonnegative vectors"""
        L = _laplacian_inverse(31)
        rng = np.random.default_rng(3)
        for _ in range(20):
            assert np.all(L.apply(rng.uniform(0.0, 1.0, 31)) >= 0.0)

    def test_indefinite_tridiagonal_rejected(self):
        """Test factorization failure is reported"""
        with pytest.raises(NotPositiveDefiniteError):
            TridiagonalInverseOperator([1.0, 1.0], [2.0])

    def test_stacked_blocks(self):
        """Test stacking and block slices"""
        A = DenseOperator([[1.0, 0.0], [0.0, 2.0]])
        B = DenseOperator([[1.0, 1.0]])
        S = StackedOperator([A, B])
        assert S.shape == (3, 2)
        assert np.allclose(S.apply([1.0, 1.0]), [1.0, 2.0, 2.0])
        assert np.allclose(S.apply([1.0, 1.0, 1.0], adjoint=True), [2.0, 3.0])
        assert [s.stop - s.start for s in S.block_slices()] == [2, 1]

    def test_stacked_domain_mismatch(self):
        """Test blocks must share a domain"""
        with pytest.raises(DimensionMismatchError):
            StackedOperator([DenseOperator(np.eye(2)), DenseOperator(np.eye(3))])

    def test_gram_operator(self):
        """Test S*S + shift I matches the dense product"""
        L = _laplacian_inverse(7)
        G = GramOperator(L, 0.5)
        D = L.to_dense()
        assert np.allclose(G.to_dense(), D.T @ D + 0.5 * np.eye(7), atol=1e-12)


class TestDenseSolvers:
    """Test dense linear algebra helpers"""

    def test_solve_spd(self):
        """Test Cholesky solve"""
        A = np.array([[4.0, 1.0], [1.0, 3.0]])
        x = solve_spd(A, [1.0, 2.0])
        assert np.allclose(A @ x, [1.0, 2.0])

    def test_solve_spd_indefinite(self):
        """Test indefinite matrices raise"""
        with pytest.raises(NotPositiveDefiniteError):
            solve_spd(np.array([[1.0, 0.0], [0.0, -1.0]]), [1.0, 1.0])

    def test_min_norm_singular(self):
        """Test minimum-norm solution drops the null space"""
        A = np.diag([2.0, 0.0])
        result = min_norm_solve(A, [4.0, 0.0])
        assert np.allclose(result.y, [2.0, 0.0])
        assert result.rank == 1
        assert result.residual == pytest.approx(0.0, abs=1e-14)

    def test_min_norm_inconsistent(self):
        """Test residual is reported when g leaves the range"""
        result = min_norm_solve(np.diag([1.0, 0.0]), [1.0, 1.0])
        assert result.residual == pytest.approx(1.0)

    def test_spectral_estimates_operator(self):
        """Test operators are analysed through S*S"""
        estimate = spectral_estimates(DenseOperator([[1.0], [2.0]]))
        assert estimate.largest == pytest.approx(5.0)
        assert estimate.smallest_positive == pytest.approx(5.0)

    def test_spectral_estimates_rank_deficient(self):
        """Test the smallest positive eigenvalue skips zeros"""
        estimate = spectral_estimates(np.diag([0.0, 3.0, 1.0]))
        assert estimate.smallest_positive == pytest.approx(1.0)

    def test_power_iteration(self):
        """Test largest eigenvalue from the action only"""
        A = np.diag([1.0, 2.0, 7.0])
        assert power_iteration(lambda x: A @ x, 3) == pytest.approx(7.0, rel=1e-8)

    def test_inverse_power_iteration(self):
        """Test smallest eigenpair of the discrete Laplacian"""
        n = 31
        h = 1.0 / (n + 1)
        L = _laplacian_inverse(n)
        mu, x = inverse_power_iteration(L.apply, L.apply_tridiagonal, n)
        assert mu == pytest.approx(4.0 / h ** 2 * np.sin(np.pi * h / 2) ** 2, rel=1e-10)
        assert np.linalg.norm(x) == pytest.approx(1.0)
