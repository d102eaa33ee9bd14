"""Bayesian neural network with a mean-field Gaussian variational posterior.

One tanh hidden layer, Bernoulli likelihood on a logit output. Training
maximizes the evidence lower bound with reparameterized gradients; all
derivatives are written out by hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._common import LearnerError, check_xy, sigmoid, softplus

MIN_STD = 1e-6


class BnnTrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class BnnConfig:
    hidden: int = 16
    prior_std: float = 1.0
    learning_rate: float = 0.02
    epochs: int = 1500
    mc_train: int = 4
    n_mc: int = 200
    init_log_std: float = -4.0
    seed: int = 0


@dataclass
class BnnModel:
    n_features: int
    hidden: int
    mu: np.ndarray
    log_std: np.ndarray
    prior_std: float
    n_mc: int
    seed: int
    elbo: float = math.nan
    elbo_trace: list = field(default_factory=list, repr=False)

    kind = "bnn"

    @property
    def n_params(self) -> int:
        return _n_params(self.n_features, self.hidden)

    def std(self) -> np.ndarray:
        return np.exp(np.maximum(self.log_std, math.log(MIN_STD)))

    def forward(self, X, weights=None) -> np.ndarray:
        """Class-1 probabilities for one weight vector (means by default)."""
        X = check_xy(X, n_features=self.n_features)
        w = self.mu if weights is None else weights
        return sigmoid(_forward(X, w, self.n_features, self.hidden)[0])

    def predict_proba(self, X) -> np.ndarray:
        return bnn_predict_samples(self, X, self.n_mc).mean(axis=0)


def _n_params(d: int, h: int) -> int:
    return d * h + h + h + 1


def _unpack(w, d, h):
    i = d * h
    W1 = w[:i].reshape(d, h)
    b1 = w[i:i + h]
    W2 = w[i + h:i + 2 * h]
    b2 = w[i + 2 * h]
    return W1, b1, W2, b2


def _forward(X, w, d, h):
    W1, b1, W2, b2 = _unpack(w, d, h)
    H = np.tanh(X @ W1 + b1)
    return H @ W2 + b2, H


def _loglik_grad(X, y, w, d, h):
    """Bernoulli log-likelihood of all rows and its gradient wrt ``w``."""
    W1, _, W2, _ = _unpack(w, d, h)
    a, H = _forward(X, w, d, h)
    ll = float(np.sum(y * a - softplus(a)))
    da = y - sigmoid(a)
    dH = np.outer(da, W2) * (1.0 - H ** 2)
    grad = np.concatenate([(X.T @ dH).ravel(), dH.sum(axis=0), H.T @ da, [da.sum()]])
    return ll, grad


def elbo_and_grad(theta, X, y, eps, d, h, prior_std):
    """Monte-Carlo ELBO for fixed noise draws ``eps`` (shape S x P).

    ``theta`` stacks the variational means and log-stds. Holding ``eps``
    fixed makes the estimate a deterministic, differentiable function of
    ``theta``.
    """
    P = _n_params(d, h)
    mu, s = theta[:P], theta[P:]
    sd = np.exp(s)
    ll_sum = 0.0
    g_mu = np.zeros(P)
    g_s = np.zeros(P)
    for e in eps:
        ll, g = _loglik_grad(X, y, mu + sd * e, d, h)
        ll_sum += ll
        g_mu += g
        g_s += g * sd * e
    S = len(eps)
    var_p = prior_std ** 2
    kl = float(np.sum(math.log(prior_std) - s + (sd ** 2 + mu ** 2) / (2 * var_p) - 0.5))
    elbo = ll_sum / S - kl
    g_mu = g_mu / S - mu / var_p
    g_s = g_s / S - (sd ** 2 / var_p - 1.0)
    return elbo, np.concatenate([g_mu, g_s])


def init_params(d: int, cfg: BnnConfig, rng) -> np.ndarray:
    h = cfg.hidden
    W1 = rng.normal(0.0, 1.0 / math.sqrt(d), size=(d, h))
    W2 = rng.normal(0.0, 0.1 / math.sqrt(h), size=h)
    mu = np.concatenate([W1.ravel(), np.zeros(h), W2, [0.0]])
    s = np.full(mu.size, cfg.init_log_std)
    return np.concatenate([mu, s])


def bnn_train(X, y, cfg: BnnConfig = BnnConfig()) -> BnnModel:
    """Fit the variational posterior with full-batch Adam on -ELBO / n."""
    X, y = check_xy(X, y)
    if cfg.hidden < 1 or cfg.prior_std <= 0:
        raise LearnerError("hidden size must be >= 1 and prior_std > 0")
    n, d = X.shape
    h = cfg.hidden
    rng = np.random.default_rng(cfg.seed)
    theta = init_params(d, cfg, rng)
    P = _n_params(d, h)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    b1, b2, adam_eps = 0.9, 0.999, 1e-8
    trace = []
    elbo = math.nan
    for epoch in range(1, cfg.epochs + 1):
        eps = rng.standard_normal((cfg.mc_train, P))
        elbo, grad = elbo_and_grad(theta, X, y, eps, d, h, cfg.prior_std)
        if not (math.isfinite(elbo) and np.all(np.isfinite(grad))):
            raise BnnTrainingError(f"non-finite ELBO at epoch {epoch}")
        g = -grad / n
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** epoch)
        vhat = v / (1 - b2 ** epoch)
        theta = theta - cfg.learning_rate * mhat / (np.sqrt(vhat) + adam_eps)
        trace.append(elbo)
    if cfg.epochs > 0:
        eps = rng.standard_normal((cfg.mc_train, P))
        elbo, _ = elbo_and_grad(theta, X, y, eps, d, h, cfg.prior_std)
    return BnnModel(d, h, theta[:P].copy(), theta[P:].copy(), cfg.prior_std,
                    cfg.n_mc, cfg.seed, float(elbo), trace)


def bnn_predict_samples(m: BnnModel, X, N: int, seed=None) -> np.ndarray:
    """``N`` posterior weight draws; returns an ``(N, n_rows)`` probability array."""
    if N < 1:
        raise LearnerError("N must be >= 1")
    X = check_xy(X, n_features=m.n_features)
    rng = np.random.default_rng([m.seed, 7919] if seed is None else seed)
    sd = m.std()
    out = np.empty((N, X.shape[0]))
    for k in range(N):
        w = m.mu + sd * rng.standard_normal(m.mu.size)
        out[k] = sigmoid(_forward(X, w, m.n_features, m.hidden)[0])
    return out


@dataclass(frozen=True)
class OutputDensity:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    degenerate: bool


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float)
    sd = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * x.size ** (-0.2)


def bnn_output_density(samples, n_grid: int = 512) -> OutputDensity:
    """Gaussian KDE of one row's predictive samples on [0, 1].

    The estimate is renormalized on the grid so that mass lost past the
    boundaries is absorbed; an all-equal sample is returned as a flagged
    spike.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 10:
        raise LearnerError("need at least 10 samples for a density estimate")
    grid = np.linspace(0.0, 1.0, n_grid)
    bw = silverman_bandwidth(x) if np.ptp(x) > 0 else 0.0
    if not bw > 0:
        dens = np.zeros(n_grid)
        dens[np.argmin(np.abs(grid - x[0]))] = 1.0
        return OutputDensity(grid, dens / np.trapezoid(dens, grid), 0.0, True)
    z = (grid[:, None] - x[None, :]) / bw
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (x.size * bw * math.sqrt(2 * math.pi))
    dens /= np.trapezoid(dens, grid)
    return OutputDensity(grid, dens, float(bw), False)


def ks_degeneracy_check(samples, threshold: float = 0.05) -> tuple[float, bool]:
    """KS distance between the sample CDF and a point mass at the sample mean.

    Returns ``(statistic, non_degenerate)``. Zero-variance samples are
    declared degenerate without consulting the statistic.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 20:
        raise LearnerError("need at least 20 samples for the KS check")
    mean = x.mean()
    below = np.count_nonzero(x < mean) / x.size
    above = np.count_nonzero(x > mean) / x.size
    stat = max(below, above)
    if np.ptp(x) == 0.0:
        return 0.0, False
    return stat, stat > threshold


@dataclass(frozen=True)
class UncertaintyReport:
    epistemic: np.ndarray
    aleatoric: np.ndarray
    total: np.ndarray


def uncertainty_from_samples(samples) -> UncertaintyReport:
    p = np.asarray(samples, dtype=float)
    epi = p.var(axis=0)
    ale = (p * (1.0 - p)).mean(axis=0)
    return UncertaintyReport(epi, ale, epi + ale)


def bnn_uncertainty(m: BnnModel, X, N: int = 200, seed=None) -> UncertaintyReport:
    """Law-of-total-variance split of the Bernoulli predictive mixture."""
    if N < 100:
        raise LearnerError("N must be >= 100 for the uncertainty decomposition")
    return uncertainty_from_samples(bnn_predict_samples(m, X, N, seed))


def logistic_synthetic(n: int, rng, slope: float = 2.0, low: float = -3.0, high: float = 3.0):
    """1-D data with ``P(y=1|x) = sigmoid(slope * x)``."""
    x = rng.uniform(low, high, size=(n, 1))
    p = sigmoid(slope * x[:, 0])
    y = (rng.uniform(size=n) < p).astype(int)
    return x, y, p


def epistemic_shrinkage_probe(sizes, seeds=(0, 1, 2, 3, 4), cfg: BnnConfig | None = None,
                              slope: float = 2.0, probe=None):
    """Mean epistemic/aleatoric variance on a probe grid versus training size.

    Returns a list of dicts with keys ``n``, ``epistemic``, ``aleatoric``,
    ``true_noise`` (mean of p(1-p) of the generator on the probe grid),
    each averaged over ``seeds``.
    """
    sizes = list(sizes)
    if len(sizes) < 2 or any(b < a for a, b in zip(sizes, sizes[1:])):
        raise LearnerError("sizes must be nondecreasing with at least 2 entries")
    if cfg is None:
        cfg = BnnConfig(hidden=8, epochs=800, learning_rate=0.02, n_mc=300)
    grid = np.linspace(-2.5, 2.5, 21)[:, None] if probe is None else np.asarray(probe)
    p_true = sigmoid(slope * grid[:, 0])
    table = []
    for n in sizes:
        epi, ale = [], []
        for s in seeds:
            rng = np.random.default_rng([s, n])
            X, y, _ = logistic_synthetic(n, rng, slope)
            model = bnn_train(X, y, BnnConfig(**{**cfg.__dict__, "seed": int(s)}))
            rep = bnn_uncertainty(model, grid, cfg.n_mc)
            epi.append(rep.epistemic.mean())
            ale.append(rep.aleatoric.mean())
        table.append({"n": n, "epistemic": float(np.mean(epi)),
                      "aleatoric": float(np.mean(ale)),
                      "true_noise": float(np.mean(p_true * (1 - p_true)))})
    return table
