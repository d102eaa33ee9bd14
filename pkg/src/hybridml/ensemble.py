"""Weighted ensembling driven by per-model error rates and residual correlations."""

from __future__ import annotations

import csv
import io
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True)
class RiskMatrix:
    names: tuple[str, ...]
    eps: np.ndarray
    rho: np.ndarray
    flagged: tuple[int, ...] = ()

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        n = len(self.names)
        if eps.shape != (n,) or rho.shape != (n, n):
            raise EnsembleError("risk matrix dimensions do not match the model names")
        if np.any((eps < 0) | (eps > 1)):
            raise EnsembleError("error rates must lie in [0, 1]")
        if not np.allclose(rho, rho.T, rtol=0, atol=1e-12):
            raise EnsembleError("correlation matrix is not symmetric")
        if np.any(np.abs(rho) > 1 + 1e-12) or not np.allclose(np.diag(rho), 1.0):
            raise EnsembleError("correlations must lie in [-1, 1] with unit diagonal")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n(self) -> int:
        return len(self.names)

    def quadratic(self) -> np.ndarray:
        """``A`` with ``A_ii = eps_i`` and ``A_ij = 2 rho_ij eps_i eps_j``."""
        A = 2.0 * self.rho * np.outer(self.eps, self.eps)
        np.fill_diagonal(A, self.eps)
        return A

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "eps", *self.names])
        for i, name in enumerate(self.names):
            w.writerow([name, repr(float(self.eps[i])), *(repr(float(r)) for r in self.rho[i])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RiskMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        names = tuple(rows[0][2:])
        eps = [float(r[1]) for r in rows[1:]]
        rho = [[float(v) for v in r[2:]] for r in rows[1:]]
        return cls(names, np.array(eps), np.array(rho))


@dataclass(frozen=True)
class EnsembleConfig:
    alpha: float = 1.0
    beta: float = 0.0
    simplex: bool = True

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise EnsembleError("alpha and beta must be nonnegative")


@dataclass(frozen=True)
class EnsembleWeights:
    names: tuple[str, ...]
    w: np.ndarray
    lam: float
    objective: float
    solver: str
    hessian_pd: bool
    meta: dict = field(default_factory=dict, compare=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["model", "weight"])
        for name, wi in zip(self.names, self.w):
            wr.writerow([name, repr(float(wi))])
        wr.writerow(["lambda", repr(float(self.lam))])
        wr.writerow(["objective", repr(float(self.objective))])
        wr.writerow(["solver", self.solver])
        wr.writerow(["hessian_pd", str(self.hessian_pd)])
        return buf.getvalue()


def estimate_errors(prob_columns, y) -> np.ndarray:
    """Misclassification rate at threshold 0.5 of each column of an ``(n_rows, n_models)`` array."""
    P = np.asarray(prob_columns, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    y = np.asarray(y)
    if len(y) == 0 or P.shape[0] != len(y):
        raise EnsembleError("validation rows missing or misaligned with labels")
    return ((P >= 0.5).astype(int) != y[:, None]).mean(axis=0)


def residual_correlation(prob_columns, y) -> tuple[np.ndarray, tuple[int, ...]]:
    """Pearson correlation of residuals ``p_i - y`` between every pair of models.

    ``prob_columns`` is ``(n_rows, n_models)``. Models whose residuals have
    zero variance get zero correlation with every other model and are
    returned in the flagged tuple.
    """
    P = np.asarray(prob_columns, dtype=float)
    y = np.asarray(y, dtype=float)
    if P.shape[0] < 3:
        raise EnsembleError("need at least 3 validation rows")
    R = P - y[:, None]
    R = R - R.mean(axis=0)
    sd = np.sqrt((R * R).sum(axis=0))
    flagged = tuple(int(i) for i in np.flatnonzero(sd == 0))
    safe = np.where(sd == 0, 1.0, sd)
    rho = (R.T @ R) / np.outer(safe, safe)
    rho[flagged, :] = 0.0
    rho[:, flagged] = 0.0
    rho = np.clip(0.5 * (rho + rho.T), -1.0, 1.0)
    np.fill_diagonal(rho, 1.0)
    return rho, flagged


def build_risk(names, prob_columns, y) -> RiskMatrix:
    eps = estimate_errors(prob_columns, y)
    rho, flagged = residual_correlation(prob_columns, y)
    if flagged:
        log.warning("zero-variance residuals for models %s", [names[i] for i in flagged])
    return RiskMatrix(tuple(names), eps, rho, flagged)


def ensemble_error(w, risk: RiskMatrix) -> float:
    """``sum w_i^2 eps_i + 2 sum_i sum_{j!=i} w_i w_j rho_ij eps_i eps_j``."""
    w = np.asarray(w, dtype=float)
    if w.shape != (risk.n,):
        raise EnsembleError("weight vector length does not match the risk matrix")
    return float(w @ risk.quadratic() @ w)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{w >= 0, sum w = 1}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    r = np.flatnonzero(u - css / k > 0)[-1]
    return np.maximum(v - css[r] / (r + 1), 0.0)


def _is_pd(M) -> bool:
    try:
        np.linalg.cholesky(M)
        return True
    except np.linalg.LinAlgError:
        return False


def _pgd(A, w0, tol=1e-10, max_iter=200000):
    """Projected gradient on the simplex until the gradient mapping norm is below ``tol``."""
    L = 2.0 * np.max(np.abs(np.linalg.eigvalsh(A)))
    step = 1.0 / max(L, 1e-12)
    w = project_simplex(w0)
    gm = np.inf
    for it in range(max_iter):
        g = 2.0 * A @ w
        w_new = project_simplex(w - step * g)
        gm = np.linalg.norm(w - w_new) / step
        w = w_new
        if gm < tol:
            break
    return w, gm, it + 1


def projected_gradient_norm(w, risk: RiskMatrix) -> float:
    """Norm of the simplex gradient mapping at ``w`` (zero at a KKT point)."""
    A = risk.quadratic()
    L = 2.0 * np.max(np.abs(np.linalg.eigvalsh(A)))
    step = 1.0 / max(L, 1e-12)
    return float(np.linalg.norm(w - project_simplex(w - step * 2.0 * A @ w)) / step)


def closed_form_weights(A) -> np.ndarray | None:
    """Stationary point ``A^-1 1 / (1^T A^-1 1)``, or ``None`` if ``A`` is not PD."""
    try:
        c = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return None
    ones = np.ones(A.shape[0])
    z = np.linalg.solve(c.T, np.linalg.solve(c, ones))
    s = z.sum()
    if not np.isfinite(s) or s == 0:
        return None
    return z / s


def optimize_weights(risk: RiskMatrix, cfg: EnsembleConfig = EnsembleConfig()) -> EnsembleWeights:
    """Minimize the ensemble error under ``sum w = 1`` (and ``w >= 0`` in simplex mode).

    The Lagrangian stationary point is used when ``A`` is positive definite
    and, in simplex mode, nonnegative. Otherwise projected gradient descent
    runs from the uniform start; because an indefinite ``A`` makes the
    problem nonconvex, the vertices are also tried as starts and the best
    stationary point wins.
    """
    A = risk.quadratic()
    n = risk.n
    hess_pd = _is_pd(2.0 * A)
    w = closed_form_weights(A) if hess_pd else None
    solver = "closed-form"
    meta = {}
    if w is not None:
        w = w / w.sum()
    if w is None or (cfg.simplex and np.any(w < 0)):
        if cfg.simplex:
            starts = [np.full(n, 1.0 / n), *np.eye(n)]
            best = None
            for s in starts:
                cand, gm, iters = _pgd(A, s)
                val = float(cand @ A @ cand)
                if best is None or val < best[1] - 1e-15:
                    best = (cand, val, gm, iters)
            w = best[0]
            solver = "projected-gradient"
            meta = {"gradient_mapping": best[2], "iterations": best[3]}
        else:
            w, solver = _affine_fallback(A)
    w = w / w.sum()
    E = float(w @ A @ w)
    # KKT: w_i (grad_i - lam) = 0 for all i, so lam = w . grad = 2E when sum w = 1
    lam = 2.0 * E
    return EnsembleWeights(risk.names, w, lam, E, solver, hess_pd, meta)


def _affine_fallback(A):
    n = A.shape[0]
    # basis of {d : sum d = 0}
    Z = np.linalg.qr(np.vstack([np.ones(n), np.eye(n)[:-1]]).T)[0][:, 1:]
    w0 = np.full(n, 1.0 / n)
    reduced = Z.T @ A @ Z
    if np.linalg.eigvalsh(reduced).min() > 1e-14:
        u = np.linalg.solve(reduced, -Z.T @ A @ w0)
        return w0 + Z @ u, "affine-kkt"
    log.warning("objective unbounded on the affine set; using simplex solution")
    starts = [w0, *np.eye(n)]
    cands = [_pgd(A, s)[0] for s in starts]
    vals = [float(c @ A @ c) for c in cands]
    return cands[int(np.argmin(vals))], "projected-gradient"


def diversity_score(rho) -> float:
    """One minus the mean correlation over unordered model pairs."""
    rho = np.asarray(rho, dtype=float)
    n = rho.shape[0]
    if n < 2:
        raise EnsembleError("diversity needs at least two models")
    iu = np.triu_indices(n, 1)
    return float(1.0 - rho[iu].mean())


def combined_loss(w, risk: RiskMatrix, cfg: EnsembleConfig) -> float:
    """``alpha * sum w_i eps_i - beta * diversity``."""
    w = np.asarray(w, dtype=float)
    return float(cfg.alpha * np.dot(w, risk.eps) - cfg.beta * diversity_score(risk.rho))


def tradeoff_sweep(w, risk: RiskMatrix, alphas=(0.0, 0.5, 1.0), betas=(0.0, 0.5, 1.0)):
    """Rows ``(alpha, beta, combined_loss)`` over a grid of trade-off coefficients."""
    return [(a, b, combined_loss(w, risk, EnsembleConfig(a, b)))
            for a, b in itertools.product(alphas, betas)]


def ensemble_predict(prob_columns, w) -> np.ndarray:
    """Row-wise ``sum_M w_M p_M`` from an ``(n_rows, n_models)`` array, clipped to [0, 1]."""
    P = np.asarray(prob_columns, dtype=float)
    w = np.asarray(w, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if P.shape[1] != w.size:
        raise EnsembleError(f"{P.shape[1]} model columns but {w.size} weights")
    return np.clip(P @ w, 0.0, 1.0)
