"""Brute-force oracle: enumeration, tiny exact laws, all-open closed forms."""

import math

import numpy as np
import pytest

from opgrowth import dynamics as dyn
from opgrowth import oracle
from opgrowth.config import LatticeParams, Site, split_seed
from opgrowth.errors import ResourceLimitError

P1 = LatticeParams(1, 1.0, 0)


def test_trinomial_endpoints():
    res = oracle.enumerate_paths_count(P1, 2)
    assert res.counts == {(-2,): 1, (-1,): 2, (0,): 3, (1,): 2, (2,): 1}
    assert res.total_examined == 9
    assert res.total_open() == 9


def test_p0_enumeration():
    res = oracle.enumerate_paths_count(LatticeParams(1, 0.0, 3), 4)
    assert res.counts == {}
    assert res.total_examined == 81


def test_enumeration_guard():
    with pytest.raises(ResourceLimitError):
        oracle.enumerate_paths_count(P1, 30)


def test_d2_enumeration_total():
    res = oracle.enumerate_paths_count(LatticeParams(2, 1.0, 0), 3)
    assert res.total_open() == 5**3
    assert sum(res.counts.values()) == 125


def test_tiny_stats_one_layer():
    ts = oracle.exact_tiny_stats(LatticeParams(1, 0.5, 0), 1)
    assert ts.edge_count == 3
    assert abs(ts.expected_count - 1.5) < 1e-12
    assert abs(sum(ts.tau_law.values()) - 1.0) < 1e-12


def test_tiny_stats_two_layers():
    ts = oracle.exact_tiny_stats(LatticeParams(1, 0.5, 0), 2)
    assert ts.edge_count == 12
    assert abs(ts.expected_count - 2.25) < 1e-12
    assert abs(ts.tau_law[1] - 0.125) < 1e-12


def test_tiny_stats_p1_degenerate():
    ts = oracle.exact_tiny_stats(LatticeParams(1, 1.0, 0), 1)
    assert abs(ts.expected_count - 3.0) < 1e-12
    assert ts.tau_law == {1: 1.0}


def test_tiny_stats_guard():
    with pytest.raises(ResourceLimitError):
        oracle.exact_tiny_stats(LatticeParams(1, 0.5, 0), 3)


def test_tiny_stats_matches_monte_carlo():
    # exact tau law vs empirical frequencies at 3 sigma
    params = LatticeParams(1, 0.6, 11)
    ts = oracle.exact_tiny_stats(params, 2)
    reps = 3000
    freq = {}
    for i in range(reps):
        child = params.with_seed(split_seed(params.seed, 0, i))
        tau = dyn.run_cluster(child, [Site((0,), 0)], 2).tau
        key = 2 if tau is None else min(tau, 2)
        freq[key] = freq.get(key, 0) + 1
    for k, want in ts.tau_law.items():
        got = freq.get(k, 0) / reps
        se = math.sqrt(want * (1 - want) / reps)
        assert abs(got - want) < 3 * se + 1e-9, (k, got, want)


def test_p1_reference_growth():
    assert oracle.p1_reference("growth", 0.0) == math.log(3)
    # symmetric rate function
    assert abs(oracle.p1_reference("growth", 0.4) - oracle.p1_reference("growth", -0.4)) < 1e-12
    with pytest.raises(ValueError):
        oracle.p1_reference("growth", 1.0)
    with pytest.raises(ValueError):
        oracle.p1_reference("bogus", 0)


def test_p1_reference_shape_sigma():
    assert oracle.p1_reference("shape", (2,)) == 2.0
    assert oracle.p1_reference("shape", (1, -2, 3)) == 6.0
    assert oracle.p1_reference("sigma", (0,)) == 1
    assert oracle.p1_reference("sigma", (-3,)) == 3


def test_rate_function_against_grid_supremum():
    # independent check: coarse maximization over lambda
    for t in (0.1, 0.3, 0.6, 0.9):
        lams = np.linspace(-12, 12, 200001)
        vals = lams * t - np.log((1 + 2 * np.cosh(lams)) / 3.0)
        want = float(vals.max())
        got = oracle.step_rate_function(t)
        assert abs(got - want) < 1e-6
        assert got >= want - 1e-12


def test_rate_function_matches_exact_counts():
    # log(3) - I(x/n) approximates (1/n) log N_{x,n} at p=1
    from opgrowth import counting as cnt
    n = 400
    layer = cnt.count_final(P1, n, "log")
    for x in (0, 40, 120, 200):
        approx = oracle.p1_reference("growth", x / n)
        got = layer.log_value_at((x,)) / n
        assert abs(got - approx) < 0.02, (x, got, approx)
