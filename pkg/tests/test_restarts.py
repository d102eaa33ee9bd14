import math

import numpy as np
import pytest

from hybridml.hyperopt import (
    RestartPolicy,
    basin_fraction,
    convex,
    hill_climb,
    mc_convergence_probability,
    plateau,
    restart_benchmark,
    two_basin,
)


def test_two_basin_shape():
    f = two_basin(0.3)
    assert f(0.15) == -1.0
    assert f(0.65) == 0.0
    assert f(0.3) == pytest.approx(1.0)
    assert f(0.3 - 1e-12) == pytest.approx(1.0)


def test_hill_climb_reaches_local_minima():
    f = two_basin(0.3)
    assert hill_climb(f, 0.05).f == pytest.approx(-1.0, abs=1e-9)
    assert hill_climb(f, 0.9).f == pytest.approx(0.0, abs=1e-9)


def test_basin_fraction_close_to_volume():
    assert basin_fraction(two_basin(0.3), -1.0, 1e-6, n_grid=2000) == pytest.approx(0.3, abs=0.01)


def test_single_basin_never_fails():
    for R in (1, 3):
        assert mc_convergence_probability(convex, 0.0, R, 40, tol=1e-6) == 0.0


def test_probability_nonincreasing_and_geometric():
    f = two_basin(0.3)
    q = basin_fraction(f, -1.0, 1e-6)
    prev = 1.0
    for R in (1, 2, 4, 8):
        p = mc_convergence_probability(f, -1.0, R, 300, seed=1)
        model = (1 - q) ** R
        assert p <= prev
        assert abs(p - model) <= 3 * math.sqrt(model * (1 - model) / 300)
        prev = p


def test_mc_argument_checks():
    with pytest.raises(ValueError):
        mc_convergence_probability(convex, 0.0, 1, 10)
    with pytest.raises(ValueError):
        mc_convergence_probability(convex, 0.0, 0, 40)


def test_plateau_benchmark_favours_adaptive():
    r = restart_benchmark(plateau, 0.0, RestartPolicy("random"), RestartPolicy("adaptive"), 60, seed=0)
    assert r.mean_adaptive < r.mean_random
    assert r.p_value < 0.05
    assert r.random_capped == r.adaptive_capped == 0


def test_convex_benchmark_indistinguishable():
    r = restart_benchmark(convex, 0.0, RestartPolicy("random"), RestartPolicy("adaptive"), 30, seed=0)
    assert r.p_value > 0.05
    np.testing.assert_array_equal(r.random_iters, r.adaptive_iters)


def test_benchmark_deterministic_and_cap():
    a = restart_benchmark(plateau, 0.0, RestartPolicy("random"), RestartPolicy("adaptive"), 5, seed=2)
    b = restart_benchmark(plateau, 0.0, RestartPolicy("random"), RestartPolicy("adaptive"), 5, seed=2)
    assert a.to_csv() == b.to_csv()
    c = restart_benchmark(plateau, -5.0, RestartPolicy("random"), RestartPolicy("adaptive"), 3, cap=200)
    assert c.random_capped == 3 and c.random_iters.max() == 200
