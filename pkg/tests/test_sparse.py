import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from wexlab.grid import Grid, GridError, GridFunction, build_lattices
from wexlab.maximal import dyadic_maximal
from wexlab.sparse import (
    SparseFamily, cz_sparse_bruteforce, cz_sparse_dominate, domination_report,
    marcinkiewicz_function, marcinkiewicz_ratio, sparse_form, sparse_operator,
)
from wexlab.rng import trial_rng

G8 = Grid(0, 1, 8)
L8 = build_lattices(G8)[0]
ONE8 = GridFunction.constant(G8)


def test_sparse_operator_root_and_left_child():
    S = SparseFamily.from_pairs(L8, [(0, 0), (1, 0)])
    assert list(sparse_operator(ONE8, S).values) == [2, 2, 2, 2, 1, 1, 1, 1]
    v = sparse_operator(ONE8, S, r=2).values
    assert np.allclose(v[:4], math.sqrt(2)) and np.allclose(v[4:], 1)


def test_sparse_operator_empty_family():
    assert np.all(sparse_operator(ONE8, SparseFamily(L8, [])).values == 0)


def test_sparse_form_examples():
    root = SparseFamily.from_pairs(L8, [(0, 0)])
    assert sparse_form([ONE8, ONE8], root, [1, 1]) == pytest.approx(1.0)
    left = SparseFamily.from_pairs(L8, [(1, 0)])
    assert sparse_form([ONE8], left, [2]) == pytest.approx(0.5)
    c = GridFunction.constant(G8, 3.0)
    quarter = SparseFamily.from_pairs(L8, [(2, 1)])
    assert sparse_form([c, c], quarter, [1, 3]) == pytest.approx(9 * 0.25)
    with pytest.raises(ValueError):
        sparse_form([ONE8], root, [F(1, 2)])


def test_pairs_roundtrip_and_certificate():
    pairs = [(0, 0), (1, 1), (3, 5)]
    S = SparseFamily.from_pairs(L8, pairs)
    assert sorted(S.pairs()) == sorted(pairs)
    assert SparseFamily.from_pairs(L8, S.pairs()) == S
    cert = S.certificate()
    assert cert["ok"] and cert["disjoint"] and cert["inside"]
    # a root whose both halves are members keeps nothing for itself
    bad = SparseFamily.from_pairs(L8, [(0, 0), (1, 0), (1, 1)])
    assert not bad.certificate()["ok"]
    with pytest.raises(GridError):
        SparseFamily.from_pairs(L8, [(1, 5)])


def test_cz_constant_is_root_only():
    S, C = cz_sparse_dominate(ONE8, L8)
    assert S.pairs() == [(0, 0)] and C == 1.0


def test_cz_first_cell_spike_chain():
    f = GridFunction(G8, [1.0, 0, 0, 0, 0, 0, 0, 0])
    S, C = cz_sparse_dominate(f, L8)
    # averages 1/8, 1/4, 1/2, 1 along the chain; the jump must strictly exceed 2x
    assert sorted(S.pairs()) == [(0, 0), (2, 0)]
    assert C == pytest.approx(2.0)
    assert S.certificate()["ok"]


def test_cz_rejects_zero_function():
    with pytest.raises(GridError):
        cz_sparse_dominate(GridFunction(G8, np.zeros(8)), L8)


def test_random_certificates_256():
    g = Grid(0, 1, 256)
    lats = build_lattices(g)
    for t in range(30):
        rng = trial_rng(11, t)
        f = GridFunction(g, rng.exponential(size=256) * (rng.random(256) < 0.3))
        if not np.any(f.values):
            continue
        rep = domination_report(f, lats[t % len(lats)])
        assert rep.passed, rep.summary()
        assert rep.data["constant"] <= 2


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([4, 16, 64]).flatmap(
    lambda n: arrays(np.float64, n, elements=st.floats(0, 1e3)).filter(lambda a: a.max() > 1e-6)),
    st.integers(0, 2))
def test_agrees_with_bruteforce(x, shift):
    g = Grid(0, 1, x.size)
    L = build_lattices(g)[shift]
    S, C = cz_sparse_dominate(GridFunction(g, x), L)
    S_ref, md_ref = cz_sparse_bruteforce(GridFunction(g, x), L)
    assert S.members == S_ref.members
    assert np.allclose(dyadic_maximal(GridFunction(g, x), L).values, md_ref, rtol=1e-12, atol=0)
    assert C <= 2 * (1 + 1e-12)


def test_marcinkiewicz_examples():
    g = Grid(0, 1, 1024)
    m = marcinkiewicz_function([(256, 768)], 1.0, g)
    x = g.midpoints()
    assert m.values[511] == pytest.approx(1.0, abs=1e-5)
    # at distance equal to the side length from the center the term is 1/2
    k = int(np.argmin(np.abs(x - 1.0)))
    d = abs(x[k] - 0.5) / 0.5
    assert m.values[k] == pytest.approx(1 / (d ** 2 + 1), rel=1e-12)
    assert abs(m.values[-1] - 0.5) < 0.01
    with pytest.raises(GridError):
        marcinkiewicz_function([(0, 10), (5, 20)], 1.0, g)
    with pytest.raises(ValueError):
        marcinkiewicz_function([(0, 10)], 0.0, g)


def test_marcinkiewicz_ratio_constant_weight():
    g = Grid(0, 1, 1024)
    out = marcinkiewicz_ratio([(0, 64), (512, 520)], 0.5, GridFunction.constant(g))
    assert out["char_upper"] == pytest.approx(1.0)
    assert out["w_omega"] == pytest.approx(72 / 1024)
    assert 0 < out["ratio"] < 10
