import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from wexlab.grid import (
    Grid, GridError, GridFunction, average, build_lattices, lp_norm, power_weight,
    read_grid_function, write_grid_function,
)
from wexlab.maximal import (
    dyadic_maximal, maximal_r, multilinear_maximal, sharp_maximal, uncentered_maximal,
    vector_maximal, weighted_maximal,
)

UNIT = Grid(0.0, 1.0, 4096)


def brute_uncentered(x):
    n = x.size
    out = np.zeros(n)
    c = np.concatenate([[0.0], np.cumsum(x)])
    for a in range(n):
        for b in range(a + 1, n + 1):
            m = (c[b] - c[a]) / (b - a)
            out[a:b] = np.maximum(out[a:b], m)
    return out


def test_grid_rejects_bad_sizes():
    with pytest.raises(GridError):
        Grid(0, 1, 12)
    with pytest.raises(GridError):
        Grid(1, 0, 8)
    with pytest.raises(GridError):
        GridFunction(Grid(0, 1, 4), [1, 2, 3])
    with pytest.raises(GridError):
        GridFunction(Grid(0, 1, 4), [1, -1, 1, 1])


def test_average_examples():
    g = Grid(0, 1, 1024)
    assert average(GridFunction.constant(g, 3.0), (5, 70)) == 3.0
    x = GridFunction.from_callable(g, lambda m: m)
    assert abs(average(x, (0, 1024)) - 0.5) < g.cell_width
    assert average(GridFunction.indicator(g, 0, 0.5), (0, 1024)) == 0.5


def test_lp_norm_examples():
    one = GridFunction.constant(UNIT)
    assert lp_norm(one, 2, one) == pytest.approx(1.0, abs=1e-15)
    x = GridFunction.from_callable(UNIT, lambda m: m)
    assert abs(lp_norm(x, 2) - 1 / math.sqrt(3)) < 1e-3
    assert abs(lp_norm(one, 1, power_weight(UNIT, 0.5)) - 2 / 3) < 1e-3
    assert lp_norm(x, "inf") == UNIT.midpoints()[-1]


def test_power_weight():
    assert np.all(power_weight(UNIT, 0).values == 1)
    assert np.all(np.diff(power_weight(UNIT, 0.5).values) > 0)


def test_lattice_counts():
    assert len(build_lattices(Grid(0, 1, 4))[0]) == 7
    assert len(build_lattices(Grid(0, 1, 8))[0]) == 15
    for n in (8, 64, 1024):
        lats = build_lattices(Grid(0, 1, n))
        assert all(len(L) <= len(lats[0]) for L in lats[1:])
        for L in lats:
            for a, b in L.intervals:
                assert 0 <= a < b <= n


def test_shifted_lattice_is_a_forest():
    L = build_lattices(Grid(0, 1, 64))[1]
    counts = [lv.count for lv in L.levels]
    assert counts[0] == 64
    # shifted generations clip, so the coarsest ones thin out
    assert counts[-1] <= 1
    for j in range(1, len(L.levels)):
        lv = L.levels[j]
        for i in range(lv.count):
            kids = L.children(j, i)
            a, b = L.interval(j, i)
            for k in kids:
                ca, cb = L.interval(j - 1, k)
                assert a <= ca and cb <= b


def test_text_format_roundtrip(tmp_path):
    g = Grid(-1.5, 2.25, 16)
    f = GridFunction(g, np.linspace(0.1, 3.0, 16) ** 2)
    path = tmp_path / "f.txt"
    write_grid_function(f, path)
    back = read_grid_function(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)
    path.write_text("4 0 1\n1\n2\n")
    with pytest.raises(GridError):
        read_grid_function(path)


def test_dyadic_maximal_examples():
    g = Grid(0, 1, 4)
    L = build_lattices(g)[0]
    assert np.all(dyadic_maximal(GridFunction.constant(g), L).values == 1)
    half = GridFunction(g, [1, 1, 0, 0])
    assert list(dyadic_maximal(half, L).values) == [1, 1, 0.5, 0.5]
    spike = GridFunction(g, [4, 0, 0, 0])
    assert np.all(dyadic_maximal(spike, L).values >= 1)


def test_uncentered_maximal_examples():
    g = Grid(0, 2, 256)
    f = GridFunction.indicator(g, 0, 1.0)
    for method in ("oracle", "fast"):
        Mf = uncentered_maximal(f, method=method).values
        x = g.midpoints()
        right = x > 1 + g.cell_width
        assert np.all(np.abs(Mf[right] - 1 / x[right]) < 2 * g.cell_width)
    one = GridFunction.constant(Grid(0, 1, 64))
    assert np.allclose(uncentered_maximal(one).values, 1.0, rtol=1e-15)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 32, elements=st.floats(0, 1e3)))
def test_uncentered_matches_brute_force(x):
    g = Grid(0, 1, 32)
    f = GridFunction(g, x)
    ref = brute_uncentered(x)
    for method in ("oracle", "fast"):
        got = uncentered_maximal(f, method=method).values
        assert np.allclose(got, ref, rtol=1e-12, atol=1e-12)
        assert np.all(got >= x * (1 - 1e-15))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 64, elements=st.floats(0, 100)))
def test_dyadic_maximal_is_max_over_ancestors(x):
    g = Grid(0, 1, 64)
    f = GridFunction(g, x)
    for L in build_lattices(g):
        got = dyadic_maximal(f, L).values
        ref = np.zeros(64)
        for a, b in L.intervals:
            ref[a:b] = np.maximum(ref[a:b], x[a:b].mean())
        assert np.allclose(got, ref, rtol=1e-13, atol=0)


def test_maximal_r_and_weighted():
    g = Grid(0, 1, 128)
    rng = np.random.default_rng(0)
    f = GridFunction(g, rng.exponential(size=128))
    assert np.allclose(maximal_r(f, 1).values, uncentered_maximal(f).values)
    ind = GridFunction.indicator(g, 0, 0.3)
    assert np.all(maximal_r(ind, 2).values >= uncentered_maximal(ind).values - 1e-15)
    one = GridFunction.constant(g)
    assert np.allclose(weighted_maximal(f, one).values, uncentered_maximal(f).values)
    w = power_weight(g, 0.5)
    assert np.allclose(weighted_maximal(one, w).values, 1.0)
    left = GridFunction.indicator(g, 0, 0.5)
    wm = weighted_maximal(left, w, method="oracle").values
    assert np.allclose(weighted_maximal(left, w, method="fast").values, wm, rtol=1e-12)
    assert np.all(np.diff(wm[64:]) <= 1e-15)


def test_multilinear_and_sharp():
    g = Grid(0, 1, 64)
    rng = np.random.default_rng(1)
    f, h = (GridFunction(g, rng.exponential(size=64)) for _ in range(2))
    assert np.allclose(multilinear_maximal([f]).values, uncentered_maximal(f).values)
    prod = uncentered_maximal(f).values * uncentered_maximal(h).values
    assert np.all(multilinear_maximal([f, h]).values <= prod * (1 + 1e-12))
    assert np.allclose(sharp_maximal(GridFunction.constant(g, 5.0)).values, 0)
    left = GridFunction(g, np.r_[np.ones(32), np.zeros(32)])
    assert np.all(sharp_maximal(left).values >= 0.5 - 1e-15)
    assert np.all(sharp_maximal(f).values <= 2 * uncentered_maximal(f).values * (1 + 1e-12))


def test_vector_maximal_single_component():
    g = Grid(0, 1, 64)
    f = GridFunction(g, np.arange(64.0))
    assert np.allclose(vector_maximal([f], 2).values, uncentered_maximal(f, method="fast").values)
    assert np.allclose(vector_maximal([f, f], "inf").values, uncentered_maximal(f, method="fast").values)
