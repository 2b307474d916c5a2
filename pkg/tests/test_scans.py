import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wexlab.grid import Grid, GridFunction, power_weight
from wexlab.scans import (
    buckley_sharpness_scan, empirical_norm_probe, fit_slope, fs_vector_scan, power_probes,
    random_probe, sparse_bound_scan,
)
from wexlab.rng import trial_rng

G = Grid(0.0, 1.0, 1024)
ONE = GridFunction.constant(G)


def test_constant_probe_ratio_is_one():
    assert empirical_norm_probe("uncentered_maximal", 2, ONE, trials=0) == pytest.approx(1.0, rel=1e-14)
    assert empirical_norm_probe("dyadic_maximal", 3, ONE, trials=0) == pytest.approx(1.0, rel=1e-14)


def test_unweighted_probe_within_buckley():
    ratio = empirical_norm_probe("uncentered_maximal", 2, ONE, trials=100)
    assert 1.0 <= ratio <= 486


def test_probe_grows_with_weight_exponent():
    lo = empirical_norm_probe("uncentered_maximal", 2, power_weight(G, 0.5), trials=10,
                              probes=power_probes(G, 0.5, 2))
    hi = empirical_norm_probe("uncentered_maximal", 2, power_weight(G, 0.9), trials=10,
                              probes=power_probes(G, 0.9, 2))
    assert hi > lo > 1


def test_random_probe_is_nonnegative_and_nonzero():
    for t in range(20):
        f = random_probe(G, trial_rng(4, t))
        assert np.all(f.values >= 0) and np.any(f.values > 0)


def test_unknown_operator():
    with pytest.raises(ValueError):
        empirical_norm_probe("hilbert", 2, ONE)


def test_fit_slope_exact_line():
    fit = fit_slope([0, 1, 2, 3], [1, 3, 5, 7])
    assert fit.slope == pytest.approx(2.0) and fit.intercept == pytest.approx(1.0)
    assert fit.ci[0] == pytest.approx(2.0) and fit.ci[1] == pytest.approx(2.0)
    assert math.isnan(fit_slope([1, 1], [2, 3]).slope)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=3, max_size=12))
def test_slope_contributions_sum_to_slope(pts):
    x, y = zip(*pts)
    if np.ptp(x) < 1e-3:
        return
    fit = fit_slope(x, y)
    assert sum(fit.contributions) == pytest.approx(fit.slope, rel=1e-9, abs=1e-9)


def test_buckley_scan_small_grid():
    rep = buckley_sharpness_scan(2, [0.0, 0.5, 0.9], n_cells=1024, trials=5)
    names = {c.name: c for c in rep.checks}
    assert all(names[f"probe <= Buckley bound (a={a:g})"].status == "PASS" for a in (0.0, 0.5, 0.9))
    rows = rep.data["rows"]
    assert [r["parameter"] for r in rows] == [0.0, 0.5, 0.9]
    # the measured norm grows with the characteristic
    assert rows[2]["measured"] > rows[0]["measured"]
    assert 0 < rep.data["fit"]["slope"] < 1.2


def test_buckley_scan_rejects_out_of_range_weight():
    with pytest.raises(ValueError):
        buckley_sharpness_scan(2, [1.0], n_cells=64)


def test_fs_scan_small_grid():
    rep = fs_vector_scan(2, 2, [0.0, 0.5, 0.9], n_cells=1024, trials=3)
    assert rep.data["target_exponent"] == 1.0
    assert all(r["measured"] >= 1.0 - 1e-12 for r in rep.data["rows"])


def test_sparse_bound_scan_passes():
    rep = sparse_bound_scan(2, [0.0, 0.3, 0.6, 0.9], n_cells=1024, trials=5)
    assert rep.passed, rep.summary()
    assert rep.data["fit"]["slope"] <= 1.1
