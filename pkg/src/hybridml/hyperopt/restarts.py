"""Restart strategies for local search: convergence probability and iteration benchmarks."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .bo import RestartPolicy, stalled


def two_basin(q: float):
    """1-D objective on [0, 1] whose global basin is ``[0, q)``.

    Both wells are quadratic and meet continuously at a ridge of height 1
    at ``x = q``. Global minimum -1 at ``q/2``, local minimum 0 at ``(1+q)/2``.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    a, wa = q / 2, q / 2
    b, wb = (1 + q) / 2, (1 - q) / 2

    def f(x):
        x = float(x)
        if x < q:
            return -1.0 + 2.0 * ((x - a) / wa) ** 2
        return ((x - b) / wb) ** 2

    return f


def plateau(x) -> float:
    """A narrow global well at 0.05 beside a nearly flat plateau sloping gently to the right."""
    x = float(x)
    return min(1.0 + 1e-4 * (1.0 - x), 400.0 * (x - 0.05) ** 2)


def convex(x) -> float:
    return (float(x) - 0.3) ** 2


@dataclass
class ClimbResult:
    x: float
    f: float
    iterations: int
    path: list


def hill_climb(f, x0: float, step: float = 0.005, min_step: float = 1e-6, max_iter: int = 100000,
               stop=None) -> ClimbResult:
    """Deterministic 1-D climb: try ``+step`` then ``-step``, halve the step on failure.

    ``stop(path)`` may end the run early; ``path`` holds the value after each iteration.
    """
    x, fx = float(x0), f(x0)
    path = [fx]
    it = 0
    while step >= min_step and it < max_iter:
        it += 1
        for cand in (min(x + step, 1.0), max(x - step, 0.0)):
            fc = f(cand)
            if fc < fx:
                x, fx = cand, fc
                break
        else:
            step *= 0.5
        path.append(fx)
        if stop is not None and stop(path):
            break
    return ClimbResult(x, fx, it, path)


def basin_fraction(f, global_min: float, tol: float, n_grid: int = 10000, **climb) -> float:
    """Share of evenly spaced starts from which :func:`hill_climb` reaches the global minimum."""
    starts = (np.arange(n_grid) + 0.5) / n_grid
    return float(np.mean([hill_climb(f, s, **climb).f <= global_min + tol for s in starts]))


def mc_convergence_probability(f, global_min: float, restarts: int, trials: int = 400,
                               seed: int = 0, tol: float = 1e-6) -> float:
    """Fraction of trials whose best value after ``restarts`` climbs is still above the optimum.

    Trial ``i`` draws its starts from a stream keyed on ``(seed, i)``, so the
    starts for ``R`` restarts are a prefix of those for ``R + 1`` and the
    estimate is nonincreasing in ``R`` for a fixed seed.
    """
    if trials < 30:
        raise ValueError("use at least 30 trials")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    fails = 0
    for i in range(trials):
        starts = np.random.default_rng([seed, i]).random(restarts)
        best = min(hill_climb(f, s).f for s in starts)
        fails += best > global_min + tol
    return fails / trials


@dataclass
class BenchmarkResult:
    random_iters: np.ndarray
    adaptive_iters: np.ndarray
    random_capped: int
    adaptive_capped: int
    statistic: float
    p_value: float

    @property
    def mean_random(self) -> float:
        return float(self.random_iters.mean())

    @property
    def mean_adaptive(self) -> float:
        return float(self.adaptive_iters.mean())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "random_iterations", "adaptive_iterations"])
        for i, (r, a) in enumerate(zip(self.random_iters, self.adaptive_iters)):
            w.writerow([i, int(r), int(a)])
        return buf.getvalue()


def iterations_to_optimum(f, global_min: float, policy: RestartPolicy, rng, tol: float = 1e-4,
                          cap: int = 100000) -> tuple[int, bool]:
    """Total climb iterations over restarts until a value within ``tol`` of the optimum.

    A random policy restarts only when a climb has converged; an adaptive
    policy also restarts once its windowed relative improvement drops below
    ``delta``. Returns ``(iterations, capped)``.
    """
    total = 0
    reached = lambda path: path[-1] <= global_min + tol  # noqa: E731
    if policy.kind == "adaptive":
        def stop(path):
            return reached(path) or stalled(path, policy.window, policy.delta)
    else:
        stop = reached
    while total < cap:
        res = hill_climb(f, rng.random(), stop=stop, max_iter=cap - total)
        total += res.iterations
        if res.f <= global_min + tol:
            return total, False
    return cap, True


def restart_benchmark(f, global_min: float, random_policy: RestartPolicy,
                      adaptive_policy: RestartPolicy, trials: int = 100, seed: int = 0,
                      tol: float = 1e-4, cap: int = 100000) -> BenchmarkResult:
    """Compare iterations-to-optimum for two policies on paired start streams.

    The statistic is a one-sided Welch t-test that the adaptive mean is lower.
    """
    r_it, a_it, r_cap, a_cap = [], [], 0, 0
    for i in range(trials):
        n, c = iterations_to_optimum(f, global_min, random_policy,
                                     np.random.default_rng([seed, i]), tol, cap)
        r_it.append(n)
        r_cap += c
        n, c = iterations_to_optimum(f, global_min, adaptive_policy,
                                     np.random.default_rng([seed, i]), tol, cap)
        a_it.append(n)
        a_cap += c
    r_it, a_it = np.array(r_it), np.array(a_it)
    if np.array_equal(r_it, a_it):
        t, p = 0.0, 0.5
    else:
        res = stats.ttest_ind(a_it, r_it, equal_var=False, alternative="less")
        t, p = float(res.statistic), float(res.pvalue)
    return BenchmarkResult(r_it, a_it, r_cap, a_cap, t, p)
