"""Unit tests for the dense linear-algebra kernels."""

import math

import numpy as np
import pytest

from itsketch.linalg import (
    QrFactors,
    SingularMatrixError,
    cond_est,
    householder_qr_econ,
    lambert_w0,
    rand_power_norm_est,
    svd_values,
    tri_solve_upper,
    tri_solve_upper_transpose,
)

U = 2.0**-53


class TestHouseholderQrEcon:
    def test_identity(self):
        qr = householder_qr_econ(np.eye(5))
        np.testing.assert_array_equal(qr.q, np.eye(5))
        np.testing.assert_array_equal(qr.r, np.eye(5))

    def test_single_column_3_4(self):
        qr = householder_qr_econ(np.array([[3.0], [4.0]]))
        np.testing.assert_allclose(qr.r, [[5.0]], rtol=1e-15)
        np.testing.assert_allclose(qr.q, [[0.6], [0.8]], rtol=1e-15)

    def test_random_20x5_reconstruction(self):
        a = np.random.default_rng(0).standard_normal((20, 5))
        qr = householder_qr_econ(a)
        assert np.linalg.norm(qr.q @ qr.r - a) / np.linalg.norm(a) <= 1e-14
        assert np.linalg.norm(qr.q.T @ qr.q - np.eye(5)) <= 1e-14

    def test_wide_matrix_rejected(self):
        with pytest.raises(ValueError):
            householder_qr_econ(np.ones((3, 5)))

    @pytest.mark.parametrize("m,n,seed", [(10, 3, 1), (50, 20, 2), (200, 40, 3)])
    def test_reconstruction_invariant(self, m, n, seed):
        a = np.random.default_rng(seed).standard_normal((m, n))
        qr = householder_qr_econ(a)
        assert np.linalg.norm(qr.q @ qr.r - a) <= 100 * m * n * U * np.linalg.norm(a)
        assert np.linalg.norm(qr.q.T @ qr.q - np.eye(n)) <= 100 * n * U

    def test_nonnegative_diagonal_and_triangular(self):
        a = np.random.default_rng(7).standard_normal((12, 6))
        qr = householder_qr_econ(-a)
        assert np.all(np.diag(qr.r) >= 0)
        assert np.array_equal(qr.r, np.triu(qr.r))

    def test_bitwise_reproducible(self):
        a = np.random.default_rng(9).standard_normal((15, 4))
        q1, q2 = householder_qr_econ(a), householder_qr_econ(a)
        assert np.array_equal(q1.q, q2.q) and np.array_equal(q1.r, q2.r)


class TestTriangularSolves:
    def test_identity(self):
        c = np.array([3.0, -1.0, 2.0])
        np.testing.assert_array_equal(tri_solve_upper(np.eye(3), c), c)
        np.testing.assert_array_equal(tri_solve_upper_transpose(np.eye(3), c), c)

    def test_diagonal(self):
        r = np.diag([2.0, 4.0])
        np.testing.assert_allclose(tri_solve_upper(r, np.array([2.0, 4.0])), [1.0, 1.0])

    def test_transpose_2x2_hand_case(self):
        r = np.array([[1.0, 1.0], [0.0, 1.0]])
        y = tri_solve_upper_transpose(r, np.array([1.0, 2.0]))
        np.testing.assert_allclose(y, [1.0, 1.0], rtol=1e-15)

    def test_random_residual(self):
        rng = np.random.default_rng(4)
        r = np.triu(rng.standard_normal((10, 10))) + 5.0 * np.eye(10)
        c = rng.standard_normal(10)
        y = tri_solve_upper(r, c)
        assert np.linalg.norm(r @ y - c) / np.linalg.norm(c) <= 1e-13

    def test_composition_matches_dense_normal_equations(self):
        rng = np.random.default_rng(5)
        r = np.triu(rng.standard_normal((8, 8))) + 4.0 * np.eye(8)
        c = rng.standard_normal(8)
        y = tri_solve_upper(r, tri_solve_upper_transpose(r, c))
        y_dense = np.linalg.solve(r.T @ r, c)
        assert np.linalg.norm(y - y_dense) / np.linalg.norm(y_dense) <= 1e-12

    def test_residual_invariant_conditioned(self):
        rng = np.random.default_rng(6)
        for n in (5, 20, 50):
            r = np.triu(rng.standard_normal((n, n))) + (2.0 + n) * np.eye(n)
            kappa = cond_est(r)
            assert kappa <= 1e8
            c = rng.standard_normal(n)
            y = tri_solve_upper(r, c)
            assert np.linalg.norm(r @ y - c) <= 100 * n * U * kappa * np.linalg.norm(c)

    def test_zero_diagonal_raises(self):
        r = np.array([[1.0, 2.0], [0.0, 0.0]])
        with pytest.raises(SingularMatrixError):
            tri_solve_upper(r, np.ones(2))
        with pytest.raises(SingularMatrixError):
            tri_solve_upper_transpose(r, np.ones(2))


class TestSvdValues:
    def test_diagonal(self):
        np.testing.assert_allclose(svd_values(np.diag([3.0, 1.0, 2.0])), [3.0, 2.0, 1.0])

    def test_orthonormal_columns(self):
        q = householder_qr_econ(np.random.default_rng(2).standard_normal((9, 4))).q
        np.testing.assert_allclose(svd_values(q), np.ones(4), atol=1e-13)

    def test_matches_gram_eigenvalues(self):
        a = np.random.default_rng(3).standard_normal((8, 3))
        sv = svd_values(a)
        gram_eigs = np.sort(np.linalg.eigvalsh(a.T @ a))[::-1]
        np.testing.assert_allclose(sv, np.sqrt(gram_eigs), rtol=1e-10)

    def test_orthogonal_invariance(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((12, 5))
        ql = householder_qr_econ(rng.standard_normal((12, 12))).q
        qr_ = householder_qr_econ(rng.standard_normal((5, 5))).q
        sv = svd_values(a)
        for transformed in (ql @ a, a @ qr_, ql @ a @ qr_):
            np.testing.assert_allclose(svd_values(transformed), sv, rtol=1e-10)


class TestRandPowerNormEst:
    def test_identity_exact(self):
        assert rand_power_norm_est(np.eye(6), rng_seed=0) == 1.0

    def test_upper_bound_with_null_direction(self):
        est = rand_power_norm_est(np.diag([5.0, 0.0]), steps=1, rng_seed=1)
        assert 0.0 <= est <= 5.0

    def test_usually_tight(self):
        rng = np.random.default_rng(12)
        hits = 0
        for seed in range(100):
            r = np.triu(rng.standard_normal((50, 50))) + np.eye(50)
            sigma_max = svd_values(r)[0]
            est = rand_power_norm_est(r, steps=6, rng_seed=seed)
            assert est <= sigma_max * (1 + 1e-12)
            hits += est >= 0.5 * sigma_max
        assert hits >= 99

    def test_deterministic(self):
        r = np.triu(np.random.default_rng(13).standard_normal((20, 20))) + np.eye(20)
        assert rand_power_norm_est(r, rng_seed=5) == rand_power_norm_est(r, rng_seed=5)


class TestCondEst:
    def test_identity(self):
        assert cond_est(np.eye(4)) == 1.0

    def test_diagonal(self):
        assert cond_est(np.diag([1.0, 1e-8])) == pytest.approx(1e8, rel=1e-12)

    def test_matches_svd_ratio(self):
        r = np.triu(np.random.default_rng(14).standard_normal((9, 9))) + 3 * np.eye(9)
        sv = svd_values(r)
        assert cond_est(r) == pytest.approx(sv[0] / sv[-1], rel=1e-10)

    def test_zero_diagonal_raises(self):
        with pytest.raises(SingularMatrixError):
            cond_est(np.diag([1.0, 0.0]))


class TestLambertW0:
    def test_zero(self):
        assert lambert_w0(0.0) == 0.0

    def test_e_maps_to_one(self):
        assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-12)

    def test_unity(self):
        w = lambert_w0(1.0)
        assert w * math.exp(w) == pytest.approx(1.0, rel=1e-12)
        assert w == pytest.approx(0.567143, abs=1e-6)

    def test_defining_equation_on_grid(self):
        for x in np.arange(0.1, 100.0, 0.1):
            w = lambert_w0(float(x))
            assert w * math.exp(w) == pytest.approx(x, rel=1e-12)

    def test_monotone_on_grid(self):
        grid = np.arange(0.0, 100.1, 0.1)
        vals = [lambert_w0(float(x)) for x in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_negative_raises(self):
        with pytest.raises(ValueError):
            lambert_w0(-0.5)


def test_qrfactors_holds_factors():
    qr = QrFactors(q=np.eye(3), r=np.eye(3))
    assert qr.q.shape == qr.r.shape == (3, 3)
