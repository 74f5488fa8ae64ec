import math

import numpy as np
import pytest

from spheremcmc.gaussian import (
    CovarianceModel,
    GaussianSampleStream,
    NotPositiveDefiniteError,
    eigendecompose_kernel_matrix,
    gaussian_sample,
    precision_quadratic,
)
from spheremcmc.levelset import whittle_matern_cov

from conftest import COUNTER_C


def _cov_se(C, n):
    return np.sqrt((np.outer(np.diag(C), np.diag(C)) + C**2) / n)


def test_rejects_non_spd():
    with pytest.raises(NotPositiveDefiniteError):
        CovarianceModel.dense([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NotPositiveDefiniteError):
        CovarianceModel.dense([[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(NotPositiveDefiniteError):
        CovarianceModel.diagonal([1.0, 0.0])


def test_spectral_basis_checks():
    with pytest.raises(ValueError):
        CovarianceModel.spectral([2.0, 1.0], [[1.0, 0.1], [0.0, 1.0]])
    with pytest.raises(ValueError):
        CovarianceModel.spectral([1.0, 2.0], np.eye(2))


@pytest.mark.parametrize("C", [np.eye(2), COUNTER_C])
def test_sample_covariance(C, rng):
    n = 100_000
    x = gaussian_sample(CovarianceModel.dense(C), rng, n)
    assert np.all(np.abs(np.cov(x.T, bias=True) - C) < 3.5 * _cov_se(C, n))


def test_spectral_sample_covariance(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    lam = np.array([3.0, 2.0, 0.5, 0.1])
    cov = CovarianceModel.spectral(lam, Q)
    C = cov.matrix()
    x = cov.sample(rng, 100_000)
    assert np.all(np.abs(np.cov(x.T, bias=True) - C) < 3.5 * _cov_se(C, 100_000))


def test_seed_replay():
    cov = CovarianceModel.dense(COUNTER_C)
    s1, s2 = GaussianSampleStream(cov, seed=11), GaussianSampleStream(cov, seed=11)
    a = np.array([next(s1) for _ in range(100)])
    b = np.array([next(s2) for _ in range(100)])
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, GaussianSampleStream(cov, seed=12).take(100))


def test_precision_quadratic_examples():
    x = np.array([0.3, -1.2, 2.0])
    assert precision_quadratic(CovarianceModel.identity(3), x) == pytest.approx(x @ x, rel=1e-15)
    assert precision_quadratic(CovarianceModel.diagonal([4.0, 1.0]), [1.0, 0.0]) == 0.25
    oracle = np.array([1.0, 0, 0]) @ np.linalg.inv(COUNTER_C) @ np.array([1.0, 0, 0])
    assert precision_quadratic(CovarianceModel.dense(COUNTER_C), [1.0, 0, 0]) == pytest.approx(oracle, abs=1e-8)
    assert precision_quadratic(CovarianceModel.dense(COUNTER_C), np.zeros(3)) == 0.0


def test_precision_quadratic_spectral_form(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    lam = np.array([5.0, 3.0, 1.0, 0.2, 0.01])
    cov = CovarianceModel.spectral(lam, Q)
    x = rng.standard_normal((20, 5))
    want = np.sum((x @ Q) ** 2 / lam, axis=1)
    np.testing.assert_allclose(cov.precision_quadratic(x), want, rtol=1e-10)
    dense = CovarianceModel.dense(cov.matrix())
    np.testing.assert_allclose(dense.precision_quadratic(x), want, rtol=1e-8)


def test_precision_quadratic_batch_shapes(counter_cov, rng):
    x = rng.standard_normal((4, 6, 3))
    out = counter_cov.precision_quadratic(x)
    assert out.shape == (4, 6)
    assert out[2, 3] == pytest.approx(counter_cov.precision_quadratic(x[2, 3]))


def test_eigendecompose_identity_kernel():
    grid = np.linspace(0, 1, 51)
    kl = eigendecompose_kernel_matrix(grid, lambda s, t: (s == t).astype(float))
    np.testing.assert_allclose(kl.eigenvalues, 0.02, rtol=1e-12)


def test_eigendecompose_matern(kl):
    lam = kl.eigenvalues
    assert np.all(np.diff(lam[:50]) < 0)
    # trace identity: sum of rectangle-rule eigenvalues equals dt * sum_k c(t_k, t_k)
    assert lam.sum() == pytest.approx(1.0, abs=2e-3)
    gram = kl.dt * kl.eigenfunctions.T[:20] @ kl.eigenfunctions[:, :20]
    np.testing.assert_allclose(gram, np.eye(20), atol=1e-8)


def test_eigendecompose_reconstruction():
    grid = np.linspace(0, 1, 201)
    kl = eigendecompose_kernel_matrix(grid, whittle_matern_cov)
    assert kl.rank == grid.size
    r = np.random.default_rng(3)
    i, j = r.integers(0, grid.size, 10), r.integers(0, grid.size, 10)
    np.testing.assert_allclose(kl.reconstruct(i, j), whittle_matern_cov(grid[i], grid[j]), atol=1e-6)


def test_eigenfunction_sign_convention(kl):
    assert np.all(kl.eigenfunctions[0] > 0)


def test_eigendecompose_rejects_indefinite():
    grid = np.linspace(0, 1, 20)
    with pytest.raises(NotPositiveDefiniteError):
        eigendecompose_kernel_matrix(grid, lambda s, t: np.cos(5 * (s - t)) - 0.5)


def test_truncate(kl):
    cov = kl.truncate(5)
    assert cov.dim == 5
    np.testing.assert_array_equal(cov.eigenvalues, kl.eigenvalues[:5])
    with pytest.raises(ValueError):
        kl.truncate(10**6)


def test_scaled_and_logdet(counter_cov):
    assert counter_cov.scaled(2.0).logdet() == pytest.approx(counter_cov.logdet() + 3 * math.log(2))
    assert counter_cov.logdet() == pytest.approx(math.log(np.linalg.det(COUNTER_C)))
