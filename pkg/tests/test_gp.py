import numpy as np
import pytest
from scipy.stats import norm

from hybridml.hyperopt import (
    GpError,
    ei_closed_form,
    expected_improvement,
    gp_extend,
    gp_fit,
    gp_fit_fixed,
    gp_posterior,
    se_kernel,
)
from hybridml.hyperopt.gp import LENGTH_GRID


def test_identical_points_fit():
    gp = gp_fit(np.array([[0.5], [0.5]]), [1.0, 1.0])
    mu, sd = gp_posterior(gp, [[0.5]])
    assert mu[0] == pytest.approx(1.0)
    assert np.isfinite(sd[0])


def test_needs_two_points():
    with pytest.raises(GpError):
        gp_fit(np.array([[0.1]]), [1.0])


def test_interpolation_with_tiny_noise():
    X = np.array([[0.1, 0.2], [0.7, 0.4], [0.3, 0.9]])
    f = np.array([1.0, -0.5, 2.0])
    gp = gp_fit_fixed(X, f, 0.3, 1.0, noise=1e-12)
    mu, sd = gp_posterior(gp, X)
    np.testing.assert_allclose(mu, f, atol=1e-8)
    assert sd.max() < 1e-4


def test_prior_reversion_far_from_data():
    X = np.array([[0.0], [0.1]])
    gp = gp_fit_fixed(X, [1.0, 3.0], 0.05, 2.0)
    mu, sd = gp_posterior(gp, [[50.0]])
    assert mu[0] == pytest.approx(2.0, abs=1e-6)
    assert sd[0] ** 2 == pytest.approx(2.0, abs=1e-6)


def test_dense_solve_oracle():
    rng = np.random.default_rng(1)
    X = rng.random((3, 2))
    f = rng.normal(size=3)
    gp = gp_fit_fixed(X, f, 0.5, 1.7)
    x = rng.random((5, 2))
    K = se_kernel(X, X, 0.5, 1.7) + gp.noise * np.eye(3)
    ks = se_kernel(X, x, 0.5, 1.7)
    Kinv = np.linalg.inv(K)
    mu = f.mean() + ks.T @ Kinv @ (f - f.mean())
    var = 1.7 - np.einsum("ij,ij->j", ks, Kinv @ ks)
    m, s = gp_posterior(gp, x)
    np.testing.assert_allclose(m, mu, atol=1e-10)
    np.testing.assert_allclose(s, np.sqrt(var), atol=1e-10)


def test_rank_one_extension_matches_refit():
    rng = np.random.default_rng(2)
    X = rng.random((12, 3))
    f = rng.normal(size=12)
    gp = gp_fit_fixed(X[:8], f[:8], 0.4, 1.3)
    for i in range(8, 12):
        gp = gp_extend(gp, X[i], f[i])
    full = gp_fit_fixed(X, f, 0.4, 1.3)
    np.testing.assert_allclose(gp.L, full.L, atol=1e-8)
    q = rng.random((4, 3))
    np.testing.assert_allclose(gp_posterior(gp, q)[0], gp_posterior(full, q)[0], atol=1e-8)


@pytest.mark.parametrize("ell0", [0.1, 0.3])
def test_length_scale_recovery(ell0):
    k = np.searchsorted(LENGTH_GRID, ell0)
    cell = {LENGTH_GRID[k - 1], LENGTH_GRID[k]}
    for seed in range(5):
        rng = np.random.default_rng(seed)
        X = rng.random((40, 1))
        K = se_kernel(X, X, ell0, 1.0) + 1e-6 * np.eye(40)
        f = np.linalg.cholesky(K) @ rng.standard_normal(40)
        assert gp_fit(X, f).ell in cell


def test_fit_deterministic():
    rng = np.random.default_rng(0)
    X, f = rng.random((6, 2)), rng.normal(size=6)
    a, b = gp_fit(X, f), gp_fit(X, f)
    assert (a.ell, a.sf2) == (b.ell, b.sf2)
    np.testing.assert_array_equal(a.L, b.L)


def test_ei_known_values():
    assert ei_closed_form(0.7, 0.0, 1.0) == pytest.approx(0.3)
    assert ei_closed_form(1.5, 0.0, 1.0) == 0.0
    assert ei_closed_form(1.0, 1.0, 1.0) == pytest.approx(norm.pdf(0), abs=1e-12)
    assert ei_closed_form(0.5, 0.5, 1.0) == pytest.approx(0.5 * (norm.cdf(1) + norm.pdf(1)), abs=1e-12)


def test_ei_nonnegative_and_monotone_in_sigma():
    mu = np.linspace(-3, 3, 61)
    for s in (1e-6, 0.1, 1.0, 10.0):
        assert np.all(ei_closed_form(mu, s, 0.0) >= 0)
    sig = np.linspace(0, 5, 101)
    for m in (-1.0, -0.1, 0.5):
        assert np.all(np.diff(ei_closed_form(m, sig, 0.0)) >= -1e-15)


def test_ei_from_gp():
    gp = gp_fit_fixed(np.array([[0.2], [0.8]]), [1.0, 0.0], 0.2, 1.0)
    ei = expected_improvement(gp, [[0.8], [0.5]], 0.0)
    assert ei[0] < 1e-3 < ei[1]
