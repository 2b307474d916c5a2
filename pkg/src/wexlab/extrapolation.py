"""Rubio de Francia iteration and the explicit extrapolation weights built from it.

Each construction returns the new weight together with a report whose
inequality checks put lower characteristic estimates on the left and upper
estimates on the right, so a PASS is sound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .exponents import (
    EndpointError, ExponentError, IncompatibleExponentError, LimitedRange, buckley_bound,
    diag_extrapolation_constant, dual_exponent, exponent, gamma_extrapolation, is_inf,
    recip, tau,
)
from .grid import GridError, GridFunction, _same_grid, lp_norm
from .maximal import uncentered_maximal
from .report import INCONCLUSIVE, CheckRecord, VerificationReport
from .weights import ClassSpec, estimate_characteristic

__all__ = [
    "RdfResult", "rdf_iterate", "rdf_certify", "extrapolate_weight_diag",
    "extrapolate_weight_offdiag", "stein_weiss_combine", "interpolate_weight",
    "DEFAULT_K_MAX",
]

DEFAULT_K_MAX = 48


class RdfResult(NamedTuple):
    function: GridFunction
    tail_bound: float
    norm_bound: Fraction
    char_upper: float


def _open_exponent(p, name="p"):
    p = exponent(p)
    if is_inf(p) or p <= 1:
        raise EndpointError(f"{name} must lie in (1, inf), got {p}")
    return p


def rdf_iterate(h: GridFunction, p, w: GridFunction, k_max: int = DEFAULT_K_MAX, *,
                method: str = "fast", char_upper: float | None = None) -> RdfResult:
    """sum_{k <= k_max} M^k h / (2B)^k on L^p(w), with B the Buckley bound for w.

    ``w`` is the measure density.  B uses the upper A_p estimate of w (or
    ``char_upper`` when the caller already has one).  The truncation error
    in L^p(w) is at most ||h|| 2^-k_max, returned as ``tail_bound``.
    """
    p = _open_exponent(p)
    if int(k_max) != k_max or k_max < 0:
        raise ValueError(f"k_max must be a nonnegative integer, got {k_max}")
    _same_grid(h, w)
    w.require_weight()
    if h.signed and np.any(h.values < 0):
        raise GridError("h must be nonnegative")
    if char_upper is None:
        char_upper = estimate_characteristic(w, ClassSpec.A(p)).upper
    B = buckley_bound(1, p, Fraction(char_upper))
    scale = 1.0 / (2.0 * float(B))
    term = h.with_values(h.values, signed=False)
    total = term.values.copy()
    factor = 1.0
    for _ in range(int(k_max)):
        term = uncentered_maximal(term, method=method)
        factor *= scale
        if factor == 0.0:
            break
        total += factor * term.values
    tail = lp_norm(h, p, w) * 2.0 ** (-int(k_max))
    return RdfResult(h.with_values(total, signed=False), tail, B, float(char_upper))


def rdf_certify(h: GridFunction, p, w: GridFunction, k_max: int = DEFAULT_K_MAX, *,
                method: str = "fast") -> VerificationReport:
    """Check h <= Rh, ||Rh|| <= 2||h|| and lower[Rh]_A1 <= 2B."""
    p = _open_exponent(p)
    res = rdf_iterate(h, p, w, k_max, method=method)
    Rh = res.function
    rep = VerificationReport("rdf", environment={"p": p, "k_max": k_max,
                                                  "n_cells": h.grid.n_cells})
    below = np.nonzero(h.values > Rh.values)[0]
    rep.add(CheckRecord.exact("h <= Rh cellwise", below.size == 0,
                              measured=int(below.size), allowed=0,
                              witness=None if below.size == 0 else int(below[0])))
    nh = lp_norm(h, p, w)
    rep.add(CheckRecord.inequality("||Rh|| <= 2||h||", lp_norm(Rh, p, w), 2.0 * nh))
    a1 = estimate_characteristic(Rh, ClassSpec.A(1))
    allowed = 2.0 * float(res.norm_bound)
    rec = CheckRecord.inequality("lower[Rh]_A1 <= 2B", a1.lower, allowed,
                                 witness=list(a1.witness))
    if not rec.ok:
        rec.status = INCONCLUSIVE
        rec.note = "truncation too short to certify the A_1 bound"
    rep.add(rec)
    rep.data.update({"buckley_bound": res.norm_bound, "char_upper": res.char_upper,
                     "tail_bound": res.tail_bound, "a1_lower": a1.lower})
    return rep


# Shared construction -----------------------------------------------------


@dataclass
class _Built:
    v: GridFunction
    B: Fraction
    char_upper: float          # upper [density]_{A_t}
    t: Fraction                # exponent of the space R acts on
    t0: Fraction | None        # r0 * beta, None when 1/r0 = 0


def _pow_log(logx: np.ndarray, a) -> np.ndarray:
    return float(a) * logx


def _core(f: GridFunction, w: GridFunction, p, inv_r, inv_r0, beta, k_max, method) -> _Built:
    """The weight v = w^(r/r0) (Rh)^((r/r0 - 1) beta) with h = f^(p/t) w^((p-r)/t), t = r beta.

    R runs on L^t(w^r).  Exponents are passed through reciprocals so that
    1/r0 = 0 is allowed.
    """
    r = 1 / inv_r
    t = r * beta
    if t <= 1:
        raise ExponentError(f"r beta = {t} must exceed 1")
    logf = np.log(np.where(f.values > 0, f.values, 1.0))
    logw = np.log(w.values)
    logh = _pow_log(logf, p / t) + _pow_log(logw, (p - r) / t)
    hv = np.where(f.values > 0, np.exp(logh), 0.0)
    dens = w.with_values(np.exp(_pow_log(logw, r)))
    res = rdf_iterate(f.with_values(hv, signed=False), t, dens, k_max, method=method)
    ratio = r * inv_r0
    logv = _pow_log(logw, ratio) + _pow_log(np.log(res.function.values), (ratio - 1) * beta)
    v = w.with_values(np.exp(logv))
    t0 = None if inv_r0 == 0 else beta / inv_r0
    return _Built(v, res.norm_bound, res.char_upper, t, t0)


def _prepare_pair(f: GridFunction, g: GridFunction, w: GridFunction):
    _same_grid(f, g, w)
    w.require_weight("w")
    fa = f.with_values(np.abs(f.values), signed=False)
    ga = g.with_values(np.abs(g.values), signed=False)
    if not np.any(fa.values > 0) or not np.any(ga.values > 0):
        raise GridError("f and g must be nonzero")
    return fa, ga


def _inv(w: GridFunction) -> GridFunction:
    return w.with_values(1.0 / w.values)


def _pairing_record(name, f, g, v, w, a, b, a0, b0, factor, note="") -> CheckRecord:
    """||f v||_{a0} ||g/v||_{b0} <= factor ||f w||_a ||g/w||_b."""
    lhs = lp_norm(f * v, a0) * lp_norm(g * _inv(v), b0)
    rhs = factor * lp_norm(f * w, a) * lp_norm(g * _inv(w), b)
    return CheckRecord.inequality(name, lhs, rhs, note=note)


def _pw(w: GridFunction, a) -> GridFunction:
    return w.with_values(np.exp(float(a) * np.log(w.values)))


def _k_max_ok(k_max):
    if int(k_max) != k_max or k_max < 1:
        raise ValueError("constructions need k_max >= 1 so that Rh is positive")


def extrapolate_weight_diag(f: GridFunction, g: GridFunction, w: GridFunction, p, q, *,
                            k_max: int = DEFAULT_K_MAX, method: str = "fast"):
    """v with ||fv||_q ||g/v||_q' <= 2 ||fw||_p ||g/w||_p'; w plays the weight whose p-th power is in A_p."""
    p, q = _open_exponent(p), _open_exponent(q, "q")
    fa, ga = _prepare_pair(f, g, w)
    _k_max_ok(k_max)
    rep = VerificationReport("extrapolation_diag", environment={
        "p": p, "q": q, "k_max": k_max, "n_cells": w.grid.n_cells})
    w_est = estimate_characteristic(_pw(w, p), ClassSpec.A(p))
    rep.data["w_char"] = w_est.to_dict()
    pd, qd = dual_exponent(p), dual_exponent(q)
    if p == q:
        v = w
        rep.note("identity branch: v = w")
        rep.add(_pairing_record("pairing with factor 2", fa, ga, v, w, p, pd, q, qd, 2.0))
        return v, rep
    if p < q:
        built = _core(fa, w, p, recip(p), recip(q), Fraction(1), k_max, method)
        v = built.v
        # [v^q]_{A_q} = [w^p (Rf)^(p-q)]_{A_q} <= [w^p]_{A_p} [Rf]_{A_1}^{q-p}
        explicit = built.char_upper * (2.0 * float(built.B)) ** float(q - p)
    else:
        built = _core(ga, _inv(w), pd, recip(pd), recip(qd), Fraction(1), k_max, method)
        v = _inv(built.v)
        # [v^q]_{A_q} = [u^q']_{A_q'}^{q-1} and u comes from the first case.
        explicit = (built.char_upper * (2.0 * float(built.B)) ** float(qd - pd)) ** float(q - 1)
    rep.data["buckley_bound"] = built.B
    rep.add(_pairing_record("pairing with factor 2", fa, ga, v, w, p, pd, q, qd, 2.0))
    v_est = estimate_characteristic(_pw(v, q), ClassSpec.A(q))
    expo = max(Fraction(1), (q - 1) / (p - 1))
    C = diag_extrapolation_constant(1, p, q)
    rep.add(CheckRecord.inequality(
        "lower[v^q]_Aq <= C_p upper[w^p]_Ap^max(1,(q-1)/(p-1))", v_est.lower,
        float(C) * w_est.upper ** float(expo), witness=list(v_est.witness)))
    rep.add(CheckRecord.inequality("lower[v^q]_Aq <= explicit bound from R", v_est.lower,
                                   explicit, witness=list(v_est.witness)))
    rep.data.update({"v_char": v_est.to_dict(), "exponent": expo, "C_p": C})
    return v, rep


def _limited_char(u: GridFunction, p, rng, *, upper: bool):
    est = estimate_characteristic(u, ClassSpec.limited(p, rng))
    return est.upper if upper else est.lower


def extrapolate_weight_offdiag(f: GridFunction, g: GridFunction, w: GridFunction, p, q, p0, q0,
                               rng, direction: str, *, construction: str = "reflection",
                               k_max: int = DEFAULT_K_MAX, method: str = "fast"):
    """Off-diagonal limited-range weight with 1/q - 1/q0 = 1/p - 1/p0.

    ``direction="down"`` (q < q0) builds v from Rh with h = f^(p/tau_p) w^((p-r)/tau_p).
    ``direction="up"`` (q > q0) reflects the first case through duality, or
    with ``construction="case2"`` builds v = w^(q/q0) H^(1/q0) from a
    normalized duality witness of f^q0.  The case2 weight certifies the
    transfer inequality ||fw||_q ||gv||_p0 <= 2^(tau_p'/p0) ||fv||_q0 ||gw||_p
    instead of the pairing form.
    """
    p, q, p0, q0 = (exponent(x) for x in (p, q, p0, q0))
    rng = LimitedRange.coerce(rng)
    if direction not in ("down", "up"):
        raise ValueError("direction must be 'down' or 'up'")
    if construction not in ("reflection", "case2"):
        raise ValueError("construction must be 'reflection' or 'case2'")
    if any(is_inf(x) for x in (p, q, p0, q0)):
        raise ExponentError("exponents must be finite")
    if p == rng.lower:
        raise EndpointError("p at the lower endpoint")
    if not rng.contains(p, closed=False):
        raise ExponentError(f"p = {p} must lie strictly inside {rng}")
    if not rng.contains(p0):
        raise ExponentError(f"p0 = {p0} must lie in {rng}")
    if q <= 1 or q0 < 1:
        raise ExponentError("need q > 1 and q0 >= 1")
    if recip(q) - recip(q0) != recip(p) - recip(p0):
        raise IncompatibleExponentError("need 1/q - 1/q0 = 1/p - 1/p0")
    _k_max_ok(k_max)
    fa, ga = _prepare_pair(f, g, w)
    beta = rng.beta
    tp = tau(p, rng)
    tpd = dual_exponent(tp)
    qd, q0d = dual_exponent(q), dual_exponent(q0)
    factor_exp = max(tp / p, tpd / qd)
    factor = 2.0 ** float(factor_exp)
    inv_r = recip(p) - recip(rng.upper)
    inv_r0 = recip(p0) - recip(rng.upper)
    rep = VerificationReport("extrapolation_offdiag", environment={
        "p": p, "q": q, "p0": p0, "q0": q0, "range": str(rng), "direction": direction,
        "construction": construction, "k_max": k_max, "n_cells": w.grid.n_cells})
    rep.data.update({"tau_p": tp, "pairing_exponent": factor_exp})
    if p == p0:
        v = w
        rep.note("identity branch: v = w")
        rep.add(_pairing_record("pairing with factor 2^max(tau_p/p, tau_p'/q')",
                                fa, ga, v, w, p, qd, p0, q0d, factor))
        return v, rep
    if (direction == "down") != (p < p0):
        raise IncompatibleExponentError(
            f"direction {direction!r} does not match p = {p}, p0 = {p0}")
    w_r = _pw(w, 1 / inv_r)
    w_char = estimate_characteristic(w_r, ClassSpec.A(tp)).upper
    t0 = None if inv_r0 == 0 else beta / inv_r0
    if direction == "down":
        built = _core(fa, w, p, inv_r, inv_r0, beta, k_max, method)
        v = built.v
        rep.add(_pairing_record("pairing with factor 2^max(tau_p/p, tau_p'/q')",
                                fa, ga, v, w, p, qd, p0, q0d, factor))
        twoB = 2.0 * float(built.B)
        if t0 is None:
            explicit = twoB ** float(p0 / rng.lower - 1)
        else:
            explicit = built.char_upper * twoB ** float(t0 - tp)
    elif construction == "reflection":
        # Down case on (q', p', s, q0', p0', s0, g, f, 1/w), then v = 1/u.
        inv_s, inv_s0 = beta - inv_r, beta - inv_r0
        built = _core(ga, _inv(w), qd, inv_s, inv_s0, beta, k_max, method)
        v = _inv(built.v)
        rep.add(_pairing_record("pairing with factor 2^max(tau_p/p, tau_p'/q')",
                                fa, ga, v, w, p, qd, p0, q0d, factor))
        twoB = 2.0 * float(built.B)
        s_t = beta / inv_s
        s_t0 = None if inv_s0 == 0 else beta / inv_s0
        if s_t0 is None:
            # p0 at the lower endpoint: tau_p0 = 1 and v^r0 is Rh itself.
            explicit = twoB
        else:
            explicit = (built.char_upper * twoB ** float(s_t0 - s_t)) ** float(t0 - 1)
    else:
        v, built = _case2(fa, w, p, q, q0, rng, k_max, method)
        lhs = lp_norm(fa * w, q) * lp_norm(ga * v, p0)
        rhs = 2.0 ** float(tpd / p0) * lp_norm(fa * v, q0) * lp_norm(ga * w, p)
        rep.add(CheckRecord.inequality("transfer ||fw||_q ||gv||_p0 <= 2^(tau_p'/p0) ||fv||_q0 ||gw||_p",
                                       lhs, rhs))
        explicit = (w_char ** float((t0 - 1) / (tp - 1))
                    * (2.0 * float(built.B)) ** float((tp - t0) / (tp - 1)))
    rep.data["buckley_bound"] = built.B
    v_lower = _limited_char(_pw(v, p0), p0, rng, upper=False)
    rep.add(CheckRecord.inequality("lower[v] <= explicit bound from R", v_lower, explicit))
    gamma = gamma_extrapolation(p, p0, rng)
    w_upper = _limited_char(_pw(w, p), p, rng, upper=True)
    rep.add(CheckRecord.info("lower[v] / upper[w]^gamma", v_lower / w_upper ** float(gamma),
                             note="implicit constant; reported, not asserted"))
    rep.data.update({"gamma": gamma, "v_lower": v_lower, "w_upper": w_upper,
                     "w_r_char_upper": w_char})
    return v, rep


def _case2(f: GridFunction, w: GridFunction, p, q, q0, rng, k_max, method):
    """H built from the normalized duality witness of f^q0 in L^(q/q0)(w^q)."""
    tp = tau(p, rng)
    tpd = dual_exponent(tp)
    s = 1 / (recip(rng.lower) - recip(p))
    inv_r = recip(q0) - recip(q)
    r = 1 / inv_r
    logw = np.log(w.values)
    t = q / q0
    wq = w.with_values(np.exp(float(q) * logw))
    F = f.with_values(f.values ** float(q0), signed=False)
    nF = lp_norm(F, t, wq)
    pos = F.values > 0
    logh = np.where(pos, float(t - 1) * (np.log(np.where(pos, F.values, 1.0)) - math.log(nF)), 0.0)
    a = r / (tpd * q0)
    b = (s + q) / tpd
    inner = np.where(pos, np.exp(float(a) * logh + float(b) * logw), 0.0)
    dens = w.with_values(np.exp(-float(s) * logw))
    res = rdf_iterate(f.with_values(inner, signed=False), tpd, dens, k_max, method=method)
    logH = float(1 / a) * np.log(res.function.values) - float((s + q) * q0 / r) * logw
    v = w.with_values(np.exp(float(q / q0) * logw + logH / float(q0)))
    return v, _Built(v, res.norm_bound, res.char_upper, tpd, None)


def stein_weiss_combine(K0: float, K1: float, theta) -> float:
    """K0^(1-theta) K1^theta."""
    theta = Fraction(theta)
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    if K0 < 0 or K1 < 0:
        raise ValueError("bounds must be nonnegative")
    if theta == 0:
        return float(K0)
    if theta == 1:
        return float(K1)
    return float(K0) ** float(1 - theta) * float(K1) ** float(theta)


def interpolate_weight(p0, w0: GridFunction, p1, w1: GridFunction, theta):
    """(p, w) with 1/p = (1-theta)/p0 + theta/p1 and w^(1/p) = w0^((1-theta)/p0) w1^(theta/p1)."""
    theta = Fraction(theta)
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    p0, p1 = exponent(p0), exponent(p1)
    _same_grid(w0, w1)
    inv_p = (1 - theta) * recip(p0) + theta * recip(p1)
    if inv_p == 0:
        raise ExponentError("interpolated exponent is infinite")
    p = 1 / inv_p
    logw = float(p) * (float((1 - theta) * recip(p0)) * np.log(w0.values)
                       + float(theta * recip(p1)) * np.log(w1.values))
    return p, w0.with_values(np.exp(logw))
