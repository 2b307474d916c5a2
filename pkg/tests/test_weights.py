import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wexlab.exponents import ExponentError
from wexlab.grid import Grid, GridFunction, power_weight
from wexlab.report import tolerance
from wexlab.rng import trial_rng
from wexlab.weights import (
    ClassSpec, WindowFamily, estimate_characteristic, factor_weight, interval_log_quantity,
    openness_check, openness_parameters, random_step_weight, sharp_rh_check,
    solve_embedding_exponents, verify_percube,
)

G4K = Grid(0.0, 1.0, 4096)
G256 = Grid(0.0, 1.0, 256)
ONE = GridFunction.constant(G256)


@pytest.mark.parametrize("spec", [ClassSpec.A(2), ClassSpec.A(1), ClassSpec.A("inf"), ClassSpec.RH(3),
                                  ClassSpec.RH("inf"), ClassSpec.limited(2, (1, 4))])
def test_constant_weight_has_unit_characteristic(spec):
    est = estimate_characteristic(ONE, spec)
    assert est.lower == pytest.approx(1.0, abs=1e-12)
    assert est.upper == pytest.approx(1.0, abs=1e-12)


def test_multilinear_constant_and_reduction():
    est = estimate_characteristic([ONE, ONE], ClassSpec.multilinear([2, 2], [1, 1, 1]))
    assert est.lower == pytest.approx(1.0) and est.upper == pytest.approx(1.0)
    w = random_step_weight(G256, trial_rng(0, 0))
    a = estimate_characteristic(w.power(3), ClassSpec.A(3))
    m = estimate_characteristic([w], ClassSpec.multilinear([3], [1, 1]))
    assert m.lower == pytest.approx(a.lower ** (1 / 3), rel=1e-9)
    assert m.upper == pytest.approx(a.upper ** (1 / 3), rel=1e-9)


def test_power_weight_a2_bracket():
    w = power_weight(G4K, -0.5)
    est = estimate_characteristic(w, ClassSpec.A(2))
    assert abs(est.lower - 4 / 3) / (4 / 3) < 0.02
    assert est.lower <= est.upper <= 16 * est.lower * (1 + 1e-12)
    ex = estimate_characteristic(w, ClassSpec.A(2), exhaustive=True)
    # the exhaustive sup over cell-aligned intervals is sandwiched between the two
    assert est.lower <= ex.exhaustive * (1 + 1e-12) and ex.exhaustive <= est.upper
    assert ex.upper == pytest.approx(ex.exhaustive, rel=1e-12)


def test_a_infinity_surrogate_is_noted():
    est = estimate_characteristic(power_weight(G256, 0.5), ClassSpec.A("inf"))
    assert any("64" in n for n in est.notes)


def test_invalid_class_parameters():
    with pytest.raises(ExponentError):
        ClassSpec.RH(1)
    with pytest.raises(ExponentError):
        ClassSpec.A(F(1, 2))


def test_window_family_matches_bruteforce_mean():
    g = Grid(0, 1, 16)
    x = np.arange(1.0, 17.0)
    fam = WindowFamily(g)
    means = fam.mean(x)
    for k in range(len(fam)):
        a, b = fam.interval(k)
        assert means[k] == pytest.approx(x[a:b].mean(), rel=1e-14)


def test_factor_weight_examples():
    r = factor_weight(ONE, ONE, 2, 3)
    assert np.allclose(r.weight.values, 1.0) and r.bound == pytest.approx(1.0)
    w1 = power_weight(G4K, -0.5)
    r = factor_weight(w1, GridFunction.constant(G4K), 2, 2)
    assert np.allclose(r.weight.values, power_weight(G4K, -0.25).values, rtol=1e-12)
    assert r.report.passed
    lowers = [c.measured for c in r.report.checks if "lower" in c.name]
    assert all(v <= math.sqrt(2) for v in lowers)
    r = factor_weight(w1, GridFunction.constant(G4K), 1, "inf")
    assert r.report.passed and np.allclose(r.weight.values, 1.0)


def test_percube_constant_weights():
    kw = {
        "weights_b": dict(w=ONE, p=2, s=3),
        "weights_c": dict(w=ONE, p=2, rng=(1, 4)),
        "weights_d": dict(w=ONE, p=2, rng=(1, 4)),
        "fac_a": dict(u=ONE, v=ONE, p=2, p0=3),
        "fac_b": dict(w0=ONE, w1=ONE, q0=2, q1=4, theta=F(1, 3)),
        "multi_embed": dict(ws=[ONE, ONE], p_list=[2, 3], range_list=[(1, 4), (2, 6)]),
        "product_weight": dict(ws=[ONE, ONE], p_list=[2, 3], range_list=[(1, 4), (2, 6)]),
    }
    for lemma, inputs in kw.items():
        rep = verify_percube(lemma, **inputs)
        assert rep.passed, (lemma, rep.summary())


def test_percube_examples():
    assert verify_percube("weights_b", w=power_weight(G256, -0.25), p=2, s=2).passed
    w = random_step_weight(G256, trial_rng(3, 0))
    rep = verify_percube("weights_c", w=w, p=2, rng=(1, 4))
    assert rep.passed
    assert all(c.measured <= 1e-9 for c in rep.checks if "quantities" in c.name or "identity" in c.name)
    with pytest.raises(ValueError):
        verify_percube("no_such_lemma", w=w)


def test_percube_window_family():
    w = random_step_weight(Grid(0, 1, 64), trial_rng(5, 0))
    rep = verify_percube("weights_b", w=w, p=2, s=3, family="windows")
    assert rep.passed


def test_fac_a_rejects_reversed_exponents():
    with pytest.raises(ExponentError):
        verify_percube("fac_a", u=ONE, v=ONE, p=3, p0=2)


def test_openness_example():
    rep = openness_check(ONE, 2)
    assert rep.passed
    assert rep.data["gamma"] == F(1, 64)
    assert rep.data["q0"] == F(129, 65)
    assert openness_check(power_weight(G256, -0.5), 2).passed


@settings(max_examples=100, deadline=None)
@given(st.fractions(min_value=F(11, 10), max_value=20, max_denominator=20),
       st.integers(min_value=0, max_value=20))
def test_openness_window_exact(q, k):
    # gamma from a synthetic characteristic 2^k; the window test is exact arithmetic
    from wexlab.exponents import dual_exponent, rh_gamma
    g = rh_gamma(1, q, F(2) ** k)
    eps = (q - 1) * g / (q + g)
    gd = dual_exponent(1 + g)
    assert (q - 1) * g / (q * gd) < eps < (q - 1) / gd
    assert 1 < (q + g) / (1 + g) < q


def test_openness_parameters_monotone():
    p1 = openness_parameters(ONE, 3)
    p2 = openness_parameters(power_weight(G256, -0.5), 3)
    assert p2.gamma <= p1.gamma


def test_sharp_rh_examples():
    assert sharp_rh_check(ONE, 2).passed
    assert sharp_rh_check(power_weight(G4K, -0.5), 2).passed


def test_solve_embedding_exponents():
    qs, rs = solve_embedding_exponents([2, 3], [(1, 4), (2, 6)])
    assert qs == (2, 3)
    assert rs[0] == 1 and rs[1] == 2
    with pytest.raises(ExponentError):
        solve_embedding_exponents([5], [(1, 4)])


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_random_step_weights_pass_lemmas(seed):
    rng = trial_rng(seed, 0)
    w = random_step_weight(G256, rng)
    assert w.values.min() >= 1e-6 and w.values.max() <= 1e6
    assert verify_percube("weights_b", w=w, p=F(3, 2), s=2).passed
    assert verify_percube("weights_d", w=w, p=3, rng=(2, 6)).passed
    assert verify_percube("fac_a", u=w, v=random_step_weight(G256, rng), p=2, p0=4).passed


def test_tolerance_scope_changes_percube_verdict():
    # A deliberately false per-interval claim: A_2(w) <= A_2(w)/2 fails at any tolerance < 1
    from wexlab.weights import _percube, shared_family
    w = random_step_weight(G256, trial_rng(1, 0))
    fam = shared_family(G256)
    q = interval_log_quantity(ClassSpec.A(2), w, fam)
    assert not _percube("false", q, q - math.log(2), fam).ok
    with tolerance(1.5):
        assert _percube("false", q, q - math.log(2), fam).ok
