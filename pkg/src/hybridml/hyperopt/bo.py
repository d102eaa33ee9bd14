"""Bayesian optimization loop with EI acquisition and restart policies."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .gp import GpError, GpSurrogate, expected_improvement, gp_extend, gp_fit, gp_posterior

log = logging.getLogger(__name__)


class SearchError(ValueError):
    pass


@dataclass(frozen=True)
class Dim:
    name: str
    lower: float
    upper: float
    integer: bool = False
    log: bool = False

    def __post_init__(self):
        if not self.lower < self.upper:
            raise SearchError(f"dimension {self.name!r}: lower must be below upper")
        if self.log and self.lower <= 0:
            raise SearchError(f"dimension {self.name!r}: log scale needs a positive lower bound")


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple[Dim, ...]

    def __post_init__(self):
        if not self.dims:
            raise SearchError("search space has no dimensions")
        object.__setattr__(self, "dims", tuple(self.dims))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dims)

    @property
    def d(self) -> int:
        return len(self.dims)

    def from_unit(self, u) -> dict:
        out = {}
        for d, ui in zip(self.dims, np.clip(np.asarray(u, dtype=float), 0.0, 1.0)):
            if d.log:
                v = math.exp(math.log(d.lower) + ui * (math.log(d.upper) - math.log(d.lower)))
            else:
                v = d.lower + ui * (d.upper - d.lower)
            out[d.name] = int(round(v)) if d.integer else float(v)
        return out

    def to_unit(self, x: dict) -> np.ndarray:
        u = []
        for d in self.dims:
            v = float(x[d.name])
            if d.log:
                u.append((math.log(v) - math.log(d.lower)) / (math.log(d.upper) - math.log(d.lower)))
            else:
                u.append((v - d.lower) / (d.upper - d.lower))
        return np.clip(np.array(u), 0.0, 1.0)

    def snap(self, u) -> np.ndarray:
        """Unit coordinates of the point actually evaluated (integers rounded)."""
        return self.to_unit(self.from_unit(u))


@dataclass(frozen=True)
class RestartPolicy:
    kind: str = "adaptive"
    window: int = 5
    delta: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("random", "adaptive"):
            raise SearchError(f"unknown restart policy {self.kind!r}")
        if self.kind == "adaptive" and (self.window < 1 or not self.delta > 0):
            raise SearchError("adaptive policy needs window >= 1 and delta > 0")


def stalled(history, window: int, delta: float) -> bool:
    """True when the last ``window`` steps improved by less than ``delta`` relative."""
    if len(history) <= window:
        return False
    old, new = history[-window - 1], history[-1]
    return (old - new) < delta * max(abs(old), 1e-12)


@dataclass
class Proposal:
    u: np.ndarray
    ei: float
    explore: bool = False


def _pattern_search(fn, starts, min_step=1e-4, init_step=0.25, max_rounds=200):
    """Maximize ``fn`` from every start at once by coordinate moves with step halving."""
    P = np.array(starts, dtype=float)
    val = fn(P)
    step = np.full(len(P), init_step)
    for _ in range(max_rounds):
        active = step >= min_step
        if not active.any():
            break
        improved = np.zeros(len(P), dtype=bool)
        for j in range(P.shape[1]):
            for sgn in (1.0, -1.0):
                cand = P.copy()
                cand[:, j] = np.clip(P[:, j] + sgn * step, 0.0, 1.0)
                v = fn(cand)
                better = active & (v > val)
                P[better] = cand[better]
                val[better] = v[better]
                improved |= better
        step[active & ~improved] *= 0.5
    i = int(np.argmax(val))
    return P[i], float(val[i])


def propose_next(gp: GpSurrogate, space: SearchSpace, f_star: float, rng, memory=(),
                 n_starts: int = 32, min_step: float = 1e-4, explore: bool = False) -> Proposal:
    """Maximize EI from uniform random starts plus any remembered points.

    With ``explore`` set the posterior standard deviation is maximized
    instead, giving a pure-exploration point.
    """
    starts = rng.random((n_starts, space.d))
    if len(memory):
        starts = np.vstack([starts, np.asarray(memory)])
    if explore:
        u, _ = _pattern_search(lambda U: gp_posterior(gp, U)[1], starts, min_step)
        ei = float(expected_improvement(gp, u, f_star)[0])
        return Proposal(u, ei, True)
    u, ei = _pattern_search(lambda U: expected_improvement(gp, U, f_star), starts, min_step)
    return Proposal(u, ei)


@dataclass
class BoTrace:
    names: tuple[str, ...]
    xs: list = field(default_factory=list)
    fs: list = field(default_factory=list)
    incumbent: list = field(default_factory=list)
    max_ei: list = field(default_factory=list)
    events: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.fs)

    def record(self, x: dict, f: float, ei: float, event: str = ""):
        best = f if not self.incumbent else min(self.incumbent[-1], f)
        self.xs.append(x)
        self.fs.append(f)
        self.incumbent.append(best)
        self.max_ei.append(ei)
        self.events.append(event)

    def best(self) -> tuple[dict, float]:
        i = int(np.argmin(self.fs))
        return self.xs[i], self.fs[i]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", *self.names, "f", "incumbent", "max_ei", "event"])
        for i in range(self.n):
            ei = self.max_ei[i]
            w.writerow([i + 1, *(repr(self.xs[i][k]) for k in self.names), repr(self.fs[i]),
                        repr(self.incumbent[i]), "" if ei is None else repr(ei), self.events[i]])
        return buf.getvalue()


def initial_design(space: SearchSpace, n: int, rng) -> np.ndarray:
    return qmc.LatinHypercube(d=space.d, seed=rng).random(n)


def bo_minimize(objective, space: SearchSpace, budget: int, policy: RestartPolicy = RestartPolicy(),
                seed: int = 0, n_init: int = 3) -> BoTrace:
    """Minimize ``objective(params: dict) -> float`` with a GP/EI loop.

    Hyperparameters are re-selected every iteration; when the selection is
    unchanged the Cholesky factor is extended by one row instead of refit.
    Non-finite objective values are replaced by ten times the worst finite
    value seen and marked ``penalty`` in the trace.
    """
    if budget < n_init:
        raise SearchError(f"budget {budget} is below the {n_init} initial points")
    rng = np.random.default_rng(seed)
    trace = BoTrace(space.names)
    U: list[np.ndarray] = []

    def evaluate(u, ei, event=""):
        x = space.from_unit(u)
        f = float(objective(x))
        if not math.isfinite(f):
            finite = [v for v in trace.fs if math.isfinite(v)]
            worst = max(finite) if finite else 1.0
            f = 10.0 * abs(worst) if worst != 0 else 1.0
            event = (event + " penalty").strip()
            log.warning("objective non-finite at %s; recorded penalty %g", x, f)
        U.append(space.snap(u))
        trace.record(x, f, ei, event)

    for u in initial_design(space, n_init, rng):
        evaluate(u, None, "init")

    memory: list[np.ndarray] = []
    gp = None
    force_explore = False
    last_restart = trace.n
    while trace.n < budget:
        X = np.array(U)
        f = np.array(trace.fs)
        try:
            fresh = gp_fit(X, f)
        except GpError as exc:
            raise SearchError(f"surrogate fit failed at iteration {trace.n + 1}: {exc}") from exc
        if gp is not None and (fresh.ell, fresh.sf2) == (gp.ell, gp.sf2) and gp.n == len(f) - 1:
            gp = gp_extend(gp, X[-1], f[-1])
        else:
            gp = fresh
        f_star = float(f.min())
        mem = memory if policy.kind == "adaptive" else ()
        prop = propose_next(gp, space, f_star, rng, mem, explore=force_explore)
        event = "restart-explore" if force_explore else ""
        force_explore = False
        evaluate(prop.u, prop.ei, event)
        memory = (memory + [prop.u])[-5:]
        if (policy.kind == "adaptive" and trace.n - last_restart >= policy.window
                and stalled(trace.incumbent, policy.window, policy.delta)):
            memory = []
            force_explore = True
            last_restart = trace.n
    return trace
