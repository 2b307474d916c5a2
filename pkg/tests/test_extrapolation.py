from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wexlab.exponents import EndpointError, IncompatibleExponentError
from wexlab.extrapolation import (
    extrapolate_weight_diag, extrapolate_weight_offdiag, interpolate_weight, rdf_certify,
    rdf_iterate, stein_weiss_combine,
)
from wexlab.grid import Grid, GridFunction, lp_norm, power_weight
from wexlab.report import INCONCLUSIVE, PASS
from wexlab.rng import trial_rng

G = Grid(0.0, 1.0, 4096)
GS = Grid(-1.0, 1.0, 1024)
ONE = GridFunction.constant(G)


def positive(grid, seed):
    return GridFunction(grid, trial_rng(seed, 0).exponential(size=grid.n_cells) + 1e-3)


def test_rdf_constant_geometric_sum():
    res = rdf_iterate(ONE, 2, ONE, 40)
    assert res.norm_bound == 486
    assert np.allclose(res.function.values, 972 / 971, rtol=1e-12, atol=0)


def test_rdf_certify_constant():
    rep = rdf_certify(ONE, 2, ONE)
    assert rep.passed
    assert rep.data["a1_lower"] == pytest.approx(1.0, rel=1e-12)


def test_rdf_certify_power_weight():
    h = positive(G, 1)
    rep = rdf_certify(h, 2, power_weight(G, -0.5))
    assert rep.passed


def test_rdf_zero_truncation():
    h = GridFunction(G, np.r_[np.ones(2048), np.zeros(2048)] + 1e-9)
    rep = rdf_certify(h, 2, ONE, k_max=0)
    status = {c.name: c.status for c in rep.checks}
    assert status["h <= Rh cellwise"] == PASS
    assert status["||Rh|| <= 2||h||"] == PASS
    assert status["lower[Rh]_A1 <= 2B"] in (PASS, INCONCLUSIVE)


def test_rdf_monotone_in_k_max():
    h, w = positive(GS, 2), power_weight(GS, 0.3)
    prev = None
    for k in (0, 1, 3, 8):
        cur = rdf_iterate(h, 3, w, k).function.values
        if prev is not None:
            assert np.all(cur >= prev)
            assert lp_norm(GridFunction(GS, cur), 3, w) <= 2 * lp_norm(h, 3, w)
        prev = cur


def test_diag_identity_branch():
    f, g = positive(GS, 3), positive(GS, 4)
    w = power_weight(GS, 0.1)
    v, rep = extrapolate_weight_diag(f, g, w, 3, 3)
    assert v is w and rep.passed


def test_diag_constant_example():
    f = g = GridFunction.constant(G)
    v, rep = extrapolate_weight_diag(f, g, ONE, 2, 4)
    assert rep.passed
    assert np.allclose(v.values, (972 / 971) ** -0.5, rtol=1e-9)


@pytest.mark.parametrize("p, q, a", [(2, 4, 0.0), (4, 2, -0.25), (F(3, 2), 3, -0.3)])
def test_diag_random(p, q, a):
    f, g = positive(GS, 5), positive(GS, 6)
    _, rep = extrapolate_weight_diag(f, g, power_weight(GS, a), p, q)
    assert rep.passed, rep.summary()


def test_offdiag_full_range_reduces_to_diag():
    f, g = positive(GS, 7), positive(GS, 8)
    w = power_weight(GS, -0.2)
    v1, _ = extrapolate_weight_diag(f, g, w, 2, 3)
    v2, rep = extrapolate_weight_offdiag(f, g, w, 2, 2, 3, 3, (1, "inf"), "down")
    assert rep.passed
    assert np.max(np.abs(v1.values / v2.values - 1)) < 1e-12
    v1, _ = extrapolate_weight_diag(f, g, w, 3, 2)
    v2, rep = extrapolate_weight_offdiag(f, g, w, 3, 3, 2, 2, (1, "inf"), "up")
    assert rep.passed
    assert np.max(np.abs(v1.values / v2.values - 1)) < 1e-12


def test_offdiag_case2_example():
    f, g = positive(GS, 9), positive(GS, 10)
    _, rep = extrapolate_weight_offdiag(f, g, GridFunction.constant(GS), 3, 3, 2, 2, (1, "inf"), "up",
                                        construction="case2")
    assert rep.passed, rep.summary()


def test_offdiag_limited_range():
    f, g = positive(GS, 11), positive(GS, 12)
    w = power_weight(GS, 0.1)
    for args, direction in [((2, 4, 3, 12), "down"), ((2, 2, 6, 6), "down"),
                            ((2, 2, F(3, 2), F(3, 2)), "up")]:
        _, rep = extrapolate_weight_offdiag(f, g, w, *args, (F(3, 2), 6), direction)
        assert rep.passed, (args, rep.summary())


def test_offdiag_identity_and_errors():
    f, g = positive(GS, 13), positive(GS, 14)
    w = power_weight(GS, 0.1)
    v, rep = extrapolate_weight_offdiag(f, g, w, 2, 2, 2, 2, (1, 4), "down")
    assert v is w and rep.passed
    with pytest.raises(EndpointError):
        extrapolate_weight_offdiag(f, g, w, F(3, 2), F(3, 2), 2, 2, (F(3, 2), 6), "down")
    with pytest.raises(IncompatibleExponentError):
        extrapolate_weight_offdiag(f, g, w, 2, 4, 6, 12, (F(3, 2), 6), "down")
    with pytest.raises(IncompatibleExponentError):
        extrapolate_weight_offdiag(f, g, w, 2, 2, 3, 3, (1, 4), "up")


def test_stein_weiss_examples():
    assert stein_weiss_combine(3.0, 7.0, 0) == 3.0
    assert stein_weiss_combine(4.0, 9.0, F(1, 2)) == pytest.approx(6.0, rel=1e-15)
    assert stein_weiss_combine(1.0, 1.0, F(2, 5)) == 1.0
    with pytest.raises(ValueError):
        stein_weiss_combine(1.0, 1.0, F(3, 2))


def test_interpolate_weight():
    w0, w1 = power_weight(G, 0.5), power_weight(G, -0.5)
    p, w = interpolate_weight(2, w0, 4, w1, F(1, 2))
    assert p == F(8, 3)
    # w^(1/p) = w0^(1/4) w1^(1/8) = x^(1/8 - 1/16)
    assert np.allclose(w.values ** (3 / 8), G.midpoints() ** (1 / 16), rtol=1e-12)


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([(2, 4), (4, 2), ("3/2", 3)]),
       st.floats(-0.2, 0.2))
def test_diag_pairing_property(seed, pq, a):
    grid = Grid(0, 1, 256)
    f, g = positive(grid, seed), positive(grid, seed + 1)
    _, rep = extrapolate_weight_diag(f, g, power_weight(grid, a), *pq)
    assert all(c.status == PASS for c in rep.checks if c.name.startswith("pairing"))
