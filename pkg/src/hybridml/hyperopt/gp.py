"""Squared-exponential Gaussian-process surrogate on the unit cube."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.stats import norm

NOISE_VAR = 1e-6
JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
LENGTH_GRID = np.geomspace(0.05, 2.0, 8)
SIGNAL_GRID = np.geomspace(0.1, 10.0, 8)  # multiples of the std of observed values


class GpError(RuntimeError):
    pass


def se_kernel(A, B, ell: float, sf2: float) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1)
    return sf2 * np.exp(-0.5 * d2 / (ell * ell))


def _cholesky(K):
    n = K.shape[0]
    for j in JITTERS:
        try:
            return np.linalg.cholesky(K + j * np.eye(n)), j
        except np.linalg.LinAlgError:
            continue
    raise GpError("kernel matrix not positive definite even with jitter 1e-6")


@dataclass(frozen=True)
class GpSurrogate:
    X: np.ndarray
    f: np.ndarray
    ell: float
    sf2: float
    noise: float
    mean: float
    L: np.ndarray
    alpha: np.ndarray
    jitter: float
    log_ml: float

    @property
    def n(self) -> int:
        return len(self.f)


def _assemble(X, f, ell, sf2, noise, L, jitter) -> GpSurrogate:
    mean = float(f.mean())
    r = f - mean
    alpha = solve_triangular(L.T, solve_triangular(L, r, lower=True), lower=False)
    log_ml = float(-0.5 * r @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(f) * math.log(2 * math.pi))
    return GpSurrogate(X, f, ell, sf2, noise, mean, L, alpha, jitter, log_ml)


def gp_fit_fixed(X, f, ell: float, sf2: float, noise: float = NOISE_VAR) -> GpSurrogate:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    f = np.asarray(f, dtype=float)
    K = se_kernel(X, X, ell, sf2) + noise * np.eye(len(f))
    L, jitter = _cholesky(K)
    return _assemble(X, f, ell, sf2, noise, L, jitter)


def hyper_grid(f) -> list[tuple[float, float]]:
    scale = float(np.std(f))
    if scale == 0.0:
        scale = 1.0
    return [(float(ell), float((scale * s) ** 2)) for ell in LENGTH_GRID for s in SIGNAL_GRID]


def gp_fit(X, f, noise: float = NOISE_VAR) -> GpSurrogate:
    """Fit with ``(ell, sigma_f)`` chosen by log marginal likelihood over an 8x8 grid.

    Ties keep the first grid point, so the fit is deterministic.
    """
    f = np.asarray(f, dtype=float)
    if len(f) < 2:
        raise GpError("need at least 2 observations")
    best = None
    for ell, sf2 in hyper_grid(f):
        try:
            gp = gp_fit_fixed(X, f, ell, sf2, noise)
        except GpError:
            continue
        if best is None or gp.log_ml > best.log_ml:
            best = gp
    if best is None:
        raise GpError("no grid point gave a valid Cholesky factor")
    return best


def gp_extend(gp: GpSurrogate, x, fx: float) -> GpSurrogate:
    """Add one observation by a rank-one extension of the Cholesky factor."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    k = se_kernel(gp.X, x, gp.ell, gp.sf2)[:, 0]
    l = solve_triangular(gp.L, k, lower=True)
    d2 = gp.sf2 + gp.noise + gp.jitter - l @ l
    if d2 <= 0:
        raise GpError("rank-one extension lost positive definiteness")
    n = gp.n
    L = np.zeros((n + 1, n + 1))
    L[:n, :n] = gp.L
    L[n, :n] = l
    L[n, n] = math.sqrt(d2)
    X = np.vstack([gp.X, x])
    f = np.append(gp.f, fx)
    return _assemble(X, f, gp.ell, gp.sf2, gp.noise, L, gp.jitter)


def gp_posterior(gp: GpSurrogate, x) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and standard deviation at the rows of ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    Ks = se_kernel(gp.X, x, gp.ell, gp.sf2)
    mu = gp.mean + Ks.T @ gp.alpha
    v = solve_triangular(gp.L, Ks, lower=True)
    var = gp.sf2 - (v * v).sum(axis=0)
    return mu, np.sqrt(np.maximum(var, 0.0))


def ei_closed_form(mu, sigma, f_star) -> np.ndarray:
    """Expected improvement below ``f_star`` for a normal with mean ``mu`` and std ``sigma``."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    gap = f_star - mu
    out = np.maximum(gap, 0.0)
    pos = sigma > 0
    if np.any(pos):
        s = np.where(pos, sigma, 1.0)
        z = gap / s
        val = gap * norm.cdf(z) + s * norm.pdf(z)
        out = np.where(pos, np.maximum(val, 0.0), out)
    return out


def expected_improvement(gp: GpSurrogate, x, f_star: float) -> np.ndarray:
    mu, sigma = gp_posterior(gp, x)
    return ei_closed_form(mu, sigma, f_star)
