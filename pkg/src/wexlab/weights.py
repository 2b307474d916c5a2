"""Weight characteristics, weight constructions and per-interval lemma checks.

Every characteristic handled here is a supremum over intervals of a
product of power means

    PM_e(g)(I) = (mean_I g^e)^(1/e),   PM_inf = max_I g,   PM_-inf = min_I g,

raised to signed powers.  For instance the A_p quantity of w is
PM_1(w) / PM_{-1/(p-1)}(w) and the RH_s quantity is PM_s(w) / PM_1(w).
That single representation gives, per class, the interval quantity, the
homogeneity degree used by the covering bound, and a cheap oscillation
bound.  All arithmetic runs on log-weights to stay clear of overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .exponents import (
    INF, EndpointError, ExponentError, LimitedRange, dual_exponent, exponent, from_recip,
    is_inf, power_upper, recip, rh_gamma, tau, xdiv,
)
from .grid import Grid, GridError, GridFunction, Interval, build_lattices
from .report import CheckRecord, VerificationReport, current_tolerance

__all__ = [
    "ClassSpec", "Term", "CharacteristicEstimate", "estimate_characteristic",
    "LatticeFamily", "WindowFamily", "shared_family", "interval_log_quantity",
    "factor_weight", "FactorResult", "verify_percube", "sharp_rh_check", "openness_check",
    "OpennessParameters", "openness_parameters", "solve_embedding_exponents",
    "random_step_weight", "dual_limited", "PERCUBE_LEMMAS", "COVERING_FACTOR",
    "DEFAULT_P_STAR",
]

COVERING_FACTOR = 4
DEFAULT_P_STAR = Fraction(64)
EXHAUSTIVE_LIMIT = 4096


# Interval families ------------------------------------------------------


class LatticeFamily:
    """All intervals of one or more lattices, with per-interval reductions."""

    def __init__(self, lattices):
        self.lattices = tuple(lattices)
        self.grid = self.lattices[0].grid
        iv = [lat.intervals for lat in self.lattices]
        self.lattice_id = np.concatenate([np.full(len(a), k) for k, a in enumerate(iv)])
        allv = np.concatenate(iv, axis=0)
        self.starts = allv[:, 0]
        self.stops = allv[:, 1]

    def __len__(self):
        return self.starts.size

    def _reduce(self, fn, x):
        parts = []
        for lat in self.lattices:
            per = [fn(lv.block(x)) for lv in lat.levels]
            parts.append(lat.flatten(per))
        return np.concatenate(parts)

    def mean(self, x):
        return self._reduce(lambda b: b.mean(axis=-1), x)

    def max(self, x):
        return self._reduce(lambda b: b.max(axis=-1), x)

    def min(self, x):
        return self._reduce(lambda b: b.min(axis=-1), x)

    def logmeanexp(self, y):
        def lme(b):
            m = b.max(axis=-1)
            return m + np.log(np.exp(b - m[..., None]).mean(axis=-1))
        return self._reduce(lme, y)

    def interval(self, k: int) -> Interval:
        return Interval(int(self.starts[k]), int(self.stops[k]))


class WindowFamily:
    """Every cell-aligned interval, ordered by length then start (small grids)."""

    def __init__(self, grid: Grid):
        self.grid = grid
        n = grid.n_cells
        lengths = np.concatenate([np.full(n - L + 1, L) for L in range(1, n + 1)])
        self.starts = np.concatenate([np.arange(n - L + 1) for L in range(1, n + 1)])
        self.stops = self.starts + lengths
        self.lattice_id = np.full(self.starts.size, -1)

    def __len__(self):
        return self.starts.size

    def _running(self, x, combine):
        n = x.size
        acc = x.astype(np.float64).copy()
        out = [acc.copy()]
        for L in range(2, n + 1):
            acc = combine(acc[:-1], x[L - 1:])
            out.append(acc)
        return out

    def mean(self, x):
        sums = self._running(x, np.add)
        return np.concatenate([s / (k + 1) for k, s in enumerate(sums)])

    def max(self, x):
        return np.concatenate(self._running(x, np.maximum))

    def min(self, x):
        return np.concatenate(self._running(x, np.minimum))

    def logmeanexp(self, y):
        c = y.max()
        return c + np.log(self.mean(np.exp(y - c)))

    def interval(self, k: int) -> Interval:
        return Interval(int(self.starts[k]), int(self.stops[k]))


@lru_cache(maxsize=16)
def _lattices(grid: Grid):
    return build_lattices(grid)


@lru_cache(maxsize=16)
def shared_family(grid: Grid) -> LatticeFamily:
    """Union of the three lattices; the interval family used by the per-interval checks."""
    return LatticeFamily(_lattices(grid))


@lru_cache(maxsize=16)
def _unshifted_family(grid: Grid) -> LatticeFamily:
    return LatticeFamily(_lattices(grid)[:1])


# Class descriptions -------------------------------------------------------


class Term(NamedTuple):
    """PM_e(g)^c where log g = sum(coef * log w[index] for index, coef in mix)."""

    mix: tuple
    e: float
    c: float


def _pm_exp(inv_e: Fraction) -> float:
    """Power-mean exponent from its reciprocal: 1/e = 0 is read as +inf."""
    return math.inf if inv_e == 0 else float(1 / inv_e)


def _ap_terms(p, idx=0, scale=1.0) -> list:
    """A_p quantity of w^scale as two power-mean terms."""
    mix = ((idx, float(scale)),)
    if is_inf(p):
        raise ExponentError("A_inf must be realized through a finite surrogate")
    if p == 1:
        return [Term(mix, 1.0, 1.0), Term(mix, -math.inf, -1.0)]
    return [Term(mix, 1.0, 1.0), Term(mix, -float(1 / (p - 1)), -1.0)]


def _rh_terms(s, idx=0, scale=1.0) -> list:
    mix = ((idx, float(scale)),)
    return [Term(mix, math.inf if is_inf(s) else float(s), 1.0), Term(mix, 1.0, -1.0)]


@dataclass(frozen=True)
class ClassSpec:
    """A weight class.

    kinds:
      ``"A"``            A_p, p in [1, inf]; p = inf uses A_{p_star}.
      ``"RH"``           RH_s, s in (1, inf].
      ``"limited"``      the class A_{p/lower} with RH_{(upper/p)'} of a density u
                         (u plays w^p).  For p < upper its characteristic is
                         [u^{(upper/p)'}]_{A_tau_p}; at p = upper it is the
                         larger of [u]_{A_{p/lower}} and [u]_{RH_inf}.
      ``"multilinear"``  the vector class with exponents ps (m of them) and
                         rs (m + 1 of them); the input is the list of w_i.
    """

    kind: str
    p: object = None
    s: object = None
    range: LimitedRange | None = None
    ps: tuple = ()
    rs: tuple = ()
    p_star: Fraction = DEFAULT_P_STAR

    @classmethod
    def A(cls, p, p_star=DEFAULT_P_STAR) -> "ClassSpec":
        p = exponent(p)
        if p < 1:
            raise ExponentError(f"A_p needs p >= 1, got {p}")
        return cls("A", p=p, p_star=exponent(p_star))

    @classmethod
    def RH(cls, s) -> "ClassSpec":
        s = exponent(s)
        if not s > 1:
            raise ExponentError(f"RH_s needs s > 1, got {s}")
        return cls("RH", s=s)

    @classmethod
    def limited(cls, p, rng) -> "ClassSpec":
        p, rng = exponent(p), LimitedRange.coerce(rng)
        if is_inf(p) or not rng.contains(p):
            raise ExponentError(f"p = {p} must be finite and inside {rng}")
        return cls("limited", p=p, range=rng)

    @classmethod
    def multilinear(cls, ps, rs) -> "ClassSpec":
        ps = tuple(exponent(p) for p in ps)
        rs = tuple(exponent(r) for r in rs)
        if not ps or len(rs) != len(ps) + 1:
            raise ExponentError("need m exponents p_i and m + 1 exponents r_j")
        for p in ps:
            if p < 1:
                raise ExponentError(f"p_i must be >= 1, got {p}")
        for r in rs:
            if is_inf(r) or r < 1:
                raise ExponentError(f"r_j must lie in [1, inf), got {r}")
        p = from_recip(sum((recip(x) for x in ps), Fraction(0)))
        for pi, ri in zip(ps, rs):
            if ri > pi:
                raise ExponentError(f"need r_i <= p_i, got r_i = {ri} > p_i = {pi}")
        if dual_exponent(rs[-1]) < p:
            raise ExponentError("need r'_{m+1} >= p")
        return cls("multilinear", ps=ps, rs=rs)

    @property
    def n_weights(self) -> int:
        return len(self.ps) if self.kind == "multilinear" else 1

    @property
    def uses_surrogate(self) -> bool:
        return self.kind == "A" and is_inf(self.p)

    def atau(self):
        """(tau_p, sigma) with the class reading u^sigma in A_tau, or None at p = upper."""
        if self.kind != "limited":
            raise ExponentError("only limited-range classes reduce to A_tau")
        if self.p == self.range.upper:
            return None
        return tau(self.p, self.range), dual_exponent(xdiv(self.range.upper, self.p))

    def components(self) -> list:
        """Lists of terms; the interval quantity is the max over components of their products."""
        if self.kind == "A":
            p = self.p_star if is_inf(self.p) else self.p
            return [_ap_terms(p)]
        if self.kind == "RH":
            return [_rh_terms(self.s)]
        if self.kind == "limited":
            red = self.atau()
            if red is None:
                return [_ap_terms(self.p / self.range.lower), _rh_terms(INF)]
            t, sigma = red
            return [_ap_terms(t, scale=float(sigma))]
        # multilinear
        ps, rs = self.ps, self.rs
        inv_p = sum((recip(x) for x in ps), Fraction(0))
        r_last_dual = dual_exponent(rs[-1])
        terms = [Term(tuple((i, 1.0) for i in range(len(ps))),
                      _pm_exp(inv_p - recip(r_last_dual)), 1.0)]
        for i, (pi, ri) in enumerate(zip(ps, rs)):
            inv_e = recip(pi) - recip(ri)
            e = -math.inf if inv_e == 0 else float(1 / inv_e)
            terms.append(Term(((i, 1.0),), e, -1.0))
        return [terms]

    def degree(self) -> float | None:
        """Homogeneity degree in the interval averages, or None when no covering bound applies."""
        best = 0.0
        for comp in self.components():
            d = 0.0
            for t in comp:
                if math.isinf(t.e):
                    if (t.e > 0 and t.c < 0) or (t.e < 0 and t.c > 0):
                        return None
                    continue
                ratio = t.c / t.e
                if ratio < 0:
                    return None
                d += ratio
            best = max(best, d)
        return best

    def describe(self) -> str:
        if self.kind == "A":
            return f"A_{self.p}" + (f" (surrogate A_{self.p_star})" if is_inf(self.p) else "")
        if self.kind == "RH":
            return f"RH_{self.s}"
        if self.kind == "limited":
            return f"limited p={self.p} range={self.range}"
        return f"multilinear p={list(map(str, self.ps))} r={list(map(str, self.rs))}"


def _log_weights(w, n_weights: int) -> list:
    ws = list(w) if isinstance(w, (list, tuple)) else [w]
    if len(ws) != n_weights:
        raise GridError(f"class needs {n_weights} weight(s), got {len(ws)}")
    grid = ws[0].grid
    logs = []
    for k, wk in enumerate(ws):
        if not isinstance(wk, GridFunction):
            raise GridError("weights must be GridFunctions")
        if wk.grid != grid:
            raise GridError("weights live on different grids")
        wk.require_weight(f"weight {k}")
        logs.append(np.log(wk.values))
    return logs


def _mix(logs, mix) -> np.ndarray:
    out = np.zeros_like(logs[0])
    for idx, coef in mix:
        out = out + coef * logs[idx]
    return out


def _log_pm(family, logg, e):
    if e == math.inf:
        return family.max(logg)
    if e == -math.inf:
        return family.min(logg)
    return family.logmeanexp(e * logg) / e


def interval_log_quantity(spec: ClassSpec, w, family) -> np.ndarray:
    """log of the class quantity on every interval of ``family``."""
    logs = _log_weights(w, spec.n_weights)
    out = None
    for comp in spec.components():
        acc = 0.0
        for t in comp:
            acc = acc + t.c * _log_pm(family, _mix(logs, t.mix), t.e)
        out = acc if out is None else np.maximum(out, acc)
    return out


def _log_cap(spec: ClassSpec, logs) -> float:
    """log of a bound valid for every interval: power means lie between min and max."""
    best = -math.inf
    for comp in spec.components():
        acc = 0.0
        for t in comp:
            g = _mix(logs, t.mix)
            acc += t.c * (g.max() if t.c > 0 else g.min())
        best = max(best, acc)
    return best


def _exhaustive_sup(spec: ClassSpec, logs, n: int):
    """Max of the log quantity over all windows, streamed by window length."""
    comps = []
    for comp in spec.components():
        prepared = []
        for t in comp:
            g = _mix(logs, t.mix)
            if math.isinf(t.e):
                prepared.append(("max" if t.e > 0 else "min", g, 0.0, t.e, t.c))
            else:
                y = t.e * g
                c0 = y.max()
                prepared.append(("mean", np.exp(y - c0), c0, t.e, t.c))
        comps.append(prepared)
    accs = [[p[1].copy() for p in comp] for comp in comps]
    best, best_at = -math.inf, (0, 1)
    for L in range(1, n + 1):
        if L > 1:
            for comp, acc in zip(comps, accs):
                for k, (how, x, *_rest) in enumerate(comp):
                    if how == "mean":
                        acc[k] = acc[k][:-1] + x[L - 1:]
                    elif how == "max":
                        acc[k] = np.maximum(acc[k][:-1], x[L - 1:])
                    else:
                        acc[k] = np.minimum(acc[k][:-1], x[L - 1:])
        val = None
        for comp, acc in zip(comps, accs):
            tot = 0.0
            for (how, _x, c0, e, c), a in zip(comp, acc):
                lp = a if how != "mean" else (np.log(a / L) + c0) / e
                tot = tot + c * lp
            val = tot if val is None else np.maximum(val, tot)
        k = int(np.argmax(val))
        v = float(val[k])
        if v > best or (v == best and k < best_at[0]):
            best, best_at = v, (k, k + L)
    return best, Interval(*best_at)


@dataclass
class CharacteristicEstimate:
    """Bracket lower <= [w] <= upper for a class characteristic."""

    lower: float
    upper: float
    witness: Interval
    spec: ClassSpec
    degree: float | None
    upper_source: str
    lattice_max: tuple
    exhaustive: float | None = None
    exhaustive_witness: Interval | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "class": self.spec.describe(), "lower": self.lower, "upper": self.upper,
            "witness": list(self.witness), "degree": self.degree,
            "upper_source": self.upper_source, "lattice_max": list(self.lattice_max),
            "exhaustive": self.exhaustive, "notes": list(self.notes),
        }


def _witness(family: LatticeFamily, vals: np.ndarray) -> tuple[float, Interval]:
    top = vals.max()
    ties = np.nonzero(vals == top)[0]
    order = np.lexsort((family.stops[ties] - family.starts[ties], family.starts[ties]))
    k = int(ties[order[0]])
    return float(top), family.interval(k)


def estimate_characteristic(w, spec: ClassSpec, *, exhaustive: bool | None = None,
                            exhaustive_limit: int = EXHAUSTIVE_LIMIT) -> CharacteristicEstimate:
    """Bracket the supremum of the class quantity over cell-aligned intervals.

    ``lower`` is the maximum over the unshifted lattice.  ``upper`` is the
    smallest of: 4^degree times the maximum over the three lattices (when
    the class has a degree), the oscillation bound, and the exhaustive
    maximum over all windows (computed when ``exhaustive`` is true, or by
    default for classes without a degree on grids up to
    ``exhaustive_limit`` cells).  Characteristics of these classes are at
    least 1, so the lower value is floored at 1.
    """
    logs = _log_weights(w, spec.n_weights)
    weights = list(w) if isinstance(w, (list, tuple)) else [w]
    grid = weights[0].grid
    lats = _lattices(grid)
    per_lattice = []
    fam0 = None
    for k, lat in enumerate(lats):
        fam = LatticeFamily([lat])
        vals = interval_log_quantity(spec, weights, fam)
        per_lattice.append(float(vals.max()))
        if k == 0:
            fam0, vals0 = fam, vals
    log_lower, wit = _witness(fam0, vals0)
    deg = spec.degree()
    notes = []
    if spec.uses_surrogate:
        notes.append(f"A_inf realized as A_{spec.p_star}")
    candidates = {"oscillation": _log_cap(spec, logs)}
    if deg is not None:
        candidates["covering"] = deg * math.log(COVERING_FACTOR) + max(per_lattice)
    do_exh = exhaustive if exhaustive is not None else (deg is None and grid.n_cells <= exhaustive_limit)
    exh = exh_wit = None
    if do_exh:
        exh_log, exh_wit = _exhaustive_sup(spec, logs, grid.n_cells)
        exh = math.exp(exh_log)
        candidates["exhaustive"] = exh_log
    source = min(candidates, key=lambda k: (candidates[k], k))
    lower = max(1.0, math.exp(log_lower))
    upper = max(lower, math.exp(candidates[source]))
    return CharacteristicEstimate(
        lower=lower, upper=upper, witness=wit, spec=spec, degree=deg, upper_source=source,
        lattice_max=tuple(math.exp(v) for v in per_lattice), exhaustive=exh,
        exhaustive_witness=exh_wit, notes=notes)


# Random weights -----------------------------------------------------------


def random_step_weight(grid: Grid, rng: np.random.Generator, low=1e-3, high=1e3,
                       n_steps: int | None = None, clip=(1e-6, 1e6)) -> GridFunction:
    """Piecewise-constant weight with log-uniform values on random runs of cells."""
    n = grid.n_cells
    if n_steps is None:
        n_steps = int(min(n, max(1, round(math.exp(rng.uniform(0, math.log(n) + 1e-12))))))
    cuts = np.sort(rng.choice(np.arange(1, n), size=min(n_steps - 1, n - 1), replace=False)) \
        if n > 1 and n_steps > 1 else np.zeros(0, dtype=int)
    vals = np.exp(rng.uniform(math.log(low), math.log(high), size=cuts.size + 1))
    seg = np.searchsorted(cuts, np.arange(n), side="right")
    out = np.clip(vals[seg], clip[0], clip[1])
    return GridFunction(grid, out)


# Constructions ------------------------------------------------------------


@dataclass
class FactorResult:
    weight: GridFunction
    bound: float
    report: VerificationReport


def factor_weight(w1: GridFunction, w2: GridFunction, p, s) -> FactorResult:
    """w = w1^(1/s) w2^(1-p) together with its certified bound.

    The bound is upper[w1]_{A_1}^{1/s} upper[w2]_{A_1}^{p-1}; the report
    checks the A_p and RH_s quantities of w against it on every interval of
    the shared family, and the lower estimates of [w]_{A_p}, [w]_{RH_s}.
    """
    p, s = exponent(p), exponent(s)
    if is_inf(p) or p < 1:
        raise ExponentError("p must lie in [1, inf)")
    if not s > 1:
        raise ExponentError("s must lie in (1, inf]")
    inv_s = recip(s)
    w1.require_weight("w1")
    w2.require_weight("w2")
    w = GridFunction(w1.grid, np.exp(float(inv_s) * np.log(w1.values)
                                     + float(1 - p) * np.log(w2.values)))
    a1 = ClassSpec.A(1)
    e1, e2 = estimate_characteristic(w1, a1), estimate_characteristic(w2, a1)
    bound = e1.upper ** float(inv_s) * e2.upper ** float(p - 1)
    rep = VerificationReport("factor_weight", environment={"n_cells": w1.grid.n_cells,
                                                           "p": p, "s": s})
    fam = shared_family(w1.grid)
    rhs = (float(inv_s) * interval_log_quantity(a1, w1, fam)
           + float(p - 1) * interval_log_quantity(a1, w2, fam))
    rep.add(_percube("A_p per interval", interval_log_quantity(ClassSpec.A(p), w, fam), rhs, fam))
    rep.add(_percube("RH_s per interval", interval_log_quantity(ClassSpec.RH(s), w, fam), rhs, fam))
    ap = estimate_characteristic(w, ClassSpec.A(p))
    rh = estimate_characteristic(w, ClassSpec.RH(s))
    rep.add(CheckRecord.inequality("A_p lower vs bound", ap.lower, bound, witness=list(ap.witness)))
    rep.add(CheckRecord.inequality("RH_s lower vs bound", rh.lower, bound, witness=list(rh.witness)))
    rep.data["bound"] = bound
    return FactorResult(w, bound, rep)


def dual_limited(w: GridFunction, p, rng):
    """The dual problem (w^-1, p', (upper', lower'))."""
    p, rng = exponent(p), LimitedRange.coerce(rng)
    return w.with_values(1.0 / w.values), dual_exponent(p), rng.dual()


# Per-interval checks -------------------------------------------------------


def _percube(name, lhs_log, rhs_log, family, *, tol=None) -> CheckRecord:
    """Check exp(lhs) <= exp(rhs) on every interval; reports the worst ratio."""
    diff = np.asarray(lhs_log - rhs_log, dtype=np.float64)
    if np.ndim(diff) == 0:
        diff = np.full(len(family), float(diff))
    k = int(np.argmax(diff))
    ratio = math.exp(float(diff[k]))
    wit = {"interval": list(family.interval(k)), "lattice": int(family.lattice_id[k]),
           "lhs": math.exp(float(np.broadcast_to(lhs_log, diff.shape)[k])),
           "rhs": math.exp(float(np.broadcast_to(rhs_log, diff.shape)[k]))}
    return CheckRecord.inequality(name, ratio, 1.0, tol=tol, witness=wit,
                                  note="worst ratio lhs/rhs over the interval family")


def _percube_equal(name, lhs_log, rhs_log, family, *, tol=None) -> CheckRecord:
    if tol is None:
        tol = current_tolerance()
    rel = np.abs(np.expm1(lhs_log - rhs_log))
    k = int(np.argmax(rel))
    wit = {"interval": list(family.interval(k)), "lattice": int(family.lattice_id[k])}
    return CheckRecord.inequality(name, float(rel[k]), tol, tol=0.0, witness=wit,
                                  note="largest relative deviation from equality")


def _family_for(grid: Grid, family):
    if family is None or family == "lattices":
        return shared_family(grid)
    if family == "windows":
        return WindowFamily(grid)
    return family


def _check_weights_b(w: GridFunction, p, s, family=None) -> VerificationReport:
    p, s = exponent(p), exponent(s)
    if is_inf(p) or p < 1 or is_inf(s) or s < 1:
        raise ExponentError("weights_b needs p, s in [1, inf)")
    t = s * (p - 1) + 1
    fam = _family_for(w.grid, family)
    sf = float(s)
    lhs = interval_log_quantity(ClassSpec("A", p=t), _pow(w, sf), fam)
    ap = interval_log_quantity(ClassSpec("A", p=p), w, fam)
    rh = interval_log_quantity(ClassSpec("RH", s=s), w, fam) if s > 1 else np.zeros_like(ap)
    rep = VerificationReport("weights_b", environment={"p": p, "s": s, "tau": t})
    rep.add(_percube("[w^s]_A_tau <= (A_p * RH_s)^s", lhs, sf * (ap + rh), fam))
    rep.add(_percube("A_p^s <= [w^s]_A_tau", sf * ap, lhs, fam))
    rep.add(_percube("RH_s^s <= [w^s]_A_tau", sf * rh, lhs, fam))
    return rep


def _pow(w: GridFunction, a: float) -> GridFunction:
    return w.with_values(np.exp(a * np.log(w.values)))


def _limited_sides(w: GridFunction, p, rng, fam):
    """log of both sides of the duality identity for the limited-range class."""
    tp = tau(p, rng)
    r = p * dual_exponent(xdiv(rng.upper, p))
    pd = dual_exponent(p)
    rd = pd * dual_exponent(xdiv(dual_exponent(rng.lower), pd))
    tpd = dual_exponent(tp)
    lhs = interval_log_quantity(ClassSpec("A", p=tp), _pow(w, float(r)), fam)
    inner = interval_log_quantity(ClassSpec("A", p=tpd), _pow(w, -float(rd)), fam)
    return lhs, float(tp - 1) * inner


def _check_weights_c(w: GridFunction, p, rng, family=None) -> VerificationReport:
    p, rng = exponent(p), LimitedRange.coerce(rng)
    if not rng.contains(p, closed=False):
        raise ExponentError(f"weights_c needs p strictly inside {rng}")
    fam = _family_for(w.grid, family)
    lhs, rhs = _limited_sides(w, p, rng, fam)
    rep = VerificationReport("weights_c", environment={"p": p, "range": str(rng)})
    rep.add(_percube_equal("duality identity", lhs, rhs, fam))
    wd, pd, rd = dual_limited(w, p, rng)
    wdd, pdd, rdd = dual_limited(wd, pd, rd)
    lhs2, _ = _limited_sides(wdd, pdd, rdd, fam)
    rep.add(CheckRecord.exact("double dual returns the same exponents", pdd == p and rdd == rng))
    rep.add(_percube_equal("double dual returns the same quantities", lhs2, lhs, fam))
    return rep


class OpennessParameters(NamedTuple):
    gamma1: Fraction
    gamma2: Fraction
    gamma: Fraction
    q0: Fraction
    epsilon: Fraction
    char_upper: float
    dual_char_upper: float


def openness_parameters(v: GridFunction, q) -> OpennessParameters:
    """gamma_1, gamma_2 from upper estimates of [v]_{A_q}, [v^{1-q'}]_{A_q'}; q0 = (q+g)/(1+g)."""
    q = exponent(q)
    if is_inf(q) or q <= 1:
        raise EndpointError("openness needs q in (1, inf)")
    qd = dual_exponent(q)
    c1 = estimate_characteristic(v, ClassSpec.A(q)).upper
    c2 = estimate_characteristic(_pow(v, float(1 - qd)), ClassSpec.A(qd)).upper
    # rh_gamma(n, q, .) is exactly 1/(2^{n+1+2q} [.]), the form needed here.
    g1 = rh_gamma(1, q, Fraction(c1))
    g2 = rh_gamma(1, q, Fraction(c2))
    g = min(g1, g2)
    q0 = (q + g) / (1 + g)
    eps = (q - 1) * g / (q + g)
    return OpennessParameters(g1, g2, g, q0, eps, c1, c2)


def _openness_records(v: GridFunction, q, par: OpennessParameters, fam, rep, label=""):
    q = exponent(q)
    g, q0, eps = par.gamma, par.q0, par.epsilon
    gd = dual_exponent(1 + g)
    rep.add(CheckRecord.exact(f"{label}q0 = q/(1+eps)", q0 == q / (1 + eps),
                              measured=q0, allowed=q / (1 + eps)))
    lo_w, hi_w = (q - 1) * g / (q * gd), (q - 1) / gd
    rep.add(CheckRecord.exact(f"{label}eps window", lo_w < eps < hi_w, measured=eps,
                              allowed=[lo_w, hi_w]))
    rep.add(CheckRecord.exact(f"{label}gamma < 2^-4", g < Fraction(1, 16), measured=g,
                              allowed=Fraction(1, 16)))
    rep.add(CheckRecord.exact(f"{label}1 < q0 < q", 1 < q0 < q, measured=q0))
    gf = float(g)
    qf = float(q)
    ap_q = interval_log_quantity(ClassSpec("A", p=q), v, fam)
    # Per interval: A_{q0}(v) <= 2^q A_q(v) and A_q(v^{1+g}) <= (2^q A_q(v))^{1+g}.
    rep.add(_percube(f"{label}A_q0 <= 2^q A_q per interval",
                     interval_log_quantity(ClassSpec("A", p=q0), v, fam),
                     qf * math.log(2) + ap_q, fam))
    rep.add(_percube(f"{label}A_q(v^(1+g)) <= 2^(q(1+g)) A_q^(1+g) per interval",
                     interval_log_quantity(ClassSpec("A", p=q), _pow(v, 1 + gf), fam),
                     (1 + gf) * (qf * math.log(2) + ap_q), fam))
    up = par.char_upper
    low_q0 = estimate_characteristic(v, ClassSpec.A(q0)).lower
    rep.add(CheckRecord.inequality(f"{label}lower[v]_A_q0 <= 2^q upper[v]_A_q", low_q0,
                                   float(power_upper(2, q)) * up))
    low_pow = estimate_characteristic(_pow(v, 1 + gf), ClassSpec.A(q)).lower
    rep.add(CheckRecord.inequality(f"{label}lower[v^(1+g)]_A_q <= 2^(q(1+g)) upper^(1+g)",
                                   low_pow, float(power_upper(2, q * (1 + g))) * up ** (1 + gf)))


def openness_check(w: GridFunction, q) -> VerificationReport:
    """Openness of A_q: exact exponent window plus the two characteristic bounds."""
    q = exponent(q)
    par = openness_parameters(w, q)
    rep = VerificationReport("openness", environment={"q": q, "n_cells": w.grid.n_cells})
    rep.data.update({"gamma1": par.gamma1, "gamma2": par.gamma2, "gamma": par.gamma,
                     "q0": par.q0, "epsilon": par.epsilon})
    _openness_records(w, q, par, shared_family(w.grid), rep)
    return rep


def _check_weights_d(w: GridFunction, p, rng, family=None) -> VerificationReport:
    p, rng = exponent(p), LimitedRange.coerce(rng)
    if not rng.contains(p, closed=False):
        raise ExponentError(f"weights_d needs p strictly inside {rng}")
    tp, sigma = tau(p, rng), p * dual_exponent(xdiv(rng.upper, p))
    v = _pow(w, float(sigma))
    par = openness_parameters(v, tp)
    g = par.gamma
    p_tilde = 1 / (1 / p + (recip(rng.lower) - 1 / p) / (1 + g))
    tau_tilde = dual_exponent(xdiv(rng.upper, p)) * (p / p_tilde - 1) + 1
    rep = VerificationReport("weights_d", environment={"p": p, "range": str(rng)})
    rep.data.update({"gamma": g, "p_tilde_lower": p_tilde, "tau_p": tp, "tau_tilde": tau_tilde})
    rep.add(CheckRecord.exact("tau_tilde equals the openness exponent", tau_tilde == par.q0,
                              measured=tau_tilde, allowed=par.q0))
    rep.add(CheckRecord.exact("lower < p_tilde < p", rng.lower < p_tilde < p, measured=p_tilde))
    inv_lo = recip(rng.lower)
    lhs = (1 / p_tilde) / (1 / p_tilde - 1 / p)
    rhs = (1 + Fraction(1, 16)) * inv_lo / (inv_lo - 1 / p)
    rep.add(CheckRecord.exact("exponent gain bound", lhs < rhs, measured=lhs, allowed=rhs))
    fam = _family_for(w.grid, family)
    rep.add(_percube("A_tau_tilde(v) <= 2^tau_p A_tau_p(v) per interval",
                     interval_log_quantity(ClassSpec("A", p=tau_tilde), v, fam),
                     float(tp) * math.log(2) + interval_log_quantity(ClassSpec("A", p=tp), v, fam),
                     fam))
    low = estimate_characteristic(v, ClassSpec.A(tau_tilde)).lower
    rep.add(CheckRecord.inequality("lower[v]_A_tau_tilde <= 2^tau_p upper[v]_A_tau_p", low,
                                   float(power_upper(2, tp)) * par.char_upper))
    return rep


def _check_fac_a(u: GridFunction, v: GridFunction, p, p0, family=None) -> VerificationReport:
    p, p0 = exponent(p), exponent(p0)
    if not (1 <= p <= p0) or is_inf(p0):
        raise ExponentError("fac_a needs 1 <= p <= p0 < inf")
    fam = _family_for(u.grid, family)
    prod = u.with_values(np.exp(np.log(u.values) + float(p - p0) * np.log(v.values)))
    lhs = interval_log_quantity(ClassSpec("A", p=p0), prod, fam)
    ap_u = interval_log_quantity(ClassSpec("A", p=p), u, fam)
    a1_v = interval_log_quantity(ClassSpec("A", p=Fraction(1)), v, fam)
    a1_up = estimate_characteristic(v, ClassSpec.A(1)).upper
    rep = VerificationReport("fac_a", environment={"p": p, "p0": p0})
    rep.add(_percube("A_p0(u v^(p-p0)) <= A_p(u) A_1(v)^(p0-p) per interval", lhs,
                     ap_u + float(p0 - p) * a1_v, fam))
    rep.add(_percube("A_p0(u v^(p-p0)) <= A_p(u) upper[v]_A_1^(p0-p) per interval", lhs,
                     ap_u + float(p0 - p) * math.log(a1_up), fam))
    return rep


def _check_fac_b(w0: GridFunction, w1: GridFunction, q0, q1, theta, family=None) -> VerificationReport:
    q0, q1, theta = exponent(q0), exponent(q1), Fraction(theta)
    if is_inf(q0) or is_inf(q1) or q0 < 1 or q1 < 1 or not 0 <= theta <= 1:
        raise ExponentError("fac_b needs q0, q1 in [1, inf) and theta in [0, 1]")
    inv_q = (1 - theta) / q0 + theta / q1
    q = 1 / inv_q
    fam = _family_for(w0.grid, family)
    logw = float(q) * (float((1 - theta) / q0) * np.log(w0.values)
                       + float(theta / q1) * np.log(w1.values))
    w = w0.with_values(np.exp(logw))
    lhs = interval_log_quantity(ClassSpec("A", p=q), w, fam)
    rhs = (float((1 - theta) * q / q0) * interval_log_quantity(ClassSpec("A", p=q0), w0, fam)
           + float(theta * q / q1) * interval_log_quantity(ClassSpec("A", p=q1), w1, fam))
    rep = VerificationReport("fac_b", environment={"q0": q0, "q1": q1, "theta": theta, "q": q})
    rep.add(_percube("A_q(w) <= A_q0(w0)^a A_q1(w1)^b per interval", lhs, rhs, fam))
    return rep


def solve_embedding_exponents(p_list, range_list, q_list=None):
    """Exponents (q, r) for the embedding of limited-range weights into a vector class.

    With q_i given (default q_i = p_i), r_i solves 1/r_i - 1/q_i = 1/lower_i - 1/p_i
    and r_{m+1} solves 1/q - 1/r'_{m+1} = sum(1/p_i - 1/upper_i).
    """
    ps = [exponent(p) for p in p_list]
    ranges = [LimitedRange.coerce(r) for r in range_list]
    qs = [exponent(q) for q in (q_list if q_list is not None else ps)]
    if not (len(ps) == len(ranges) == len(qs)) or not ps:
        raise ExponentError("need matching nonempty lists")
    rs = []
    for p, rg, q in zip(ps, ranges, qs):
        if not rg.contains(p):
            raise ExponentError(f"p = {p} outside {rg}")
        if is_inf(q) or q < 1:
            raise ExponentError(f"q_i must lie in [1, inf), got {q}")
        r = from_recip(recip(q) + recip(rg.lower) - recip(p))
        if is_inf(r) or r < 1 or r > q:
            raise ExponentError(f"solved r_i = {r} is not in [1, q_i]")
        rs.append(r)
    inv_q = sum((recip(q) for q in qs), Fraction(0))
    inv_rd = inv_q - sum((recip(p) - recip(rg.upper) for p, rg in zip(ps, ranges)), Fraction(0))
    if inv_rd < 0 or inv_rd >= 1:
        raise ExponentError(f"1/r'_(m+1) = {inv_rd} leaves no admissible r_(m+1)")
    r_last = dual_exponent(from_recip(inv_rd))
    if is_inf(r_last) or r_last < 1:
        raise ExponentError(f"r_(m+1) = {r_last} not in [1, inf)")
    return tuple(qs), tuple(rs) + (r_last,)


def _check_multi_embed(ws: Sequence[GridFunction], p_list, range_list, q_list=None,
                       family=None) -> VerificationReport:
    ps = [exponent(p) for p in p_list]
    ranges = [LimitedRange.coerce(r) for r in range_list]
    qs, rs = solve_embedding_exponents(ps, ranges, q_list)
    fam = _family_for(ws[0].grid, family)
    lhs = interval_log_quantity(ClassSpec.multilinear(qs, rs), list(ws), fam)
    rhs = 0.0
    chain = 0.0
    for w, p, rg in zip(ws, ps, ranges):
        inv_t = recip(p) - recip(rg.upper)
        inv_sd = recip(rg.lower) - recip(p)
        logw = np.log(w.values)
        t_term = _log_pm(fam, logw, _pm_exp(inv_t))
        s_term = (-_log_pm(fam, logw, -math.inf) if inv_sd == 0
                  else _log_pm(fam, -logw, float(1 / inv_sd)))
        rhs = rhs + t_term + s_term
        red = class_reduce(p, rg)
        if red is not None and inv_t > 0:
            tp, t_exp = red
            chain = chain + float(inv_t) * interval_log_quantity(
                ClassSpec("A", p=tp), _pow(w, float(t_exp)), fam)
        else:
            chain = None if chain is None else chain + t_term + s_term
    rep = VerificationReport("multi_embed", environment={
        "p": ps, "ranges": [str(r) for r in ranges], "q": list(qs), "r": list(rs)})
    rep.add(_percube("vector quantity <= prod of power-mean pairs per interval", lhs, rhs, fam))
    if chain is not None:
        rep.add(_percube_equal("power-mean pairs equal A_tau quantities per interval", rhs, chain, fam))
    return rep


def class_reduce(p, rng):
    """(tau_p, p (upper/p)') or None at p = upper; local alias used by the checks."""
    from .exponents import class_to_atau
    return class_to_atau(p, rng)


def _harmonic_tau(inv_p, inv_lo, inv_hi) -> Fraction:
    den = inv_p - inv_hi
    if den <= 0:
        raise EndpointError("p at the harmonic upper endpoint")
    return (inv_lo - inv_hi) / den


def _check_product_weight(ws: Sequence[GridFunction], p_list, range_list,
                          family=None) -> VerificationReport:
    from .exponents import product_weight_exponents
    ps = [exponent(p) for p in p_list]
    ranges = [LimitedRange.coerce(r) for r in range_list]
    ex = product_weight_exponents(ps, ranges)
    inv_p = sum((recip(p) for p in ps), Fraction(0))
    inv_lo = sum((recip(r.lower) for r in ranges), Fraction(0))
    inv_hi = sum((recip(r.upper) for r in ranges), Fraction(0))
    tp = _harmonic_tau(inv_p, inv_lo, inv_hi)
    r_exp = 1 / (inv_p - inv_hi)
    fam = _family_for(ws[0].grid, family)
    logw = sum(np.log(w.values) for w in ws)
    w = ws[0].with_values(np.exp(logw))
    lhs = interval_log_quantity(ClassSpec("A", p=tp), _pow(w, float(r_exp)), fam)
    factors = []
    for wi, p, rg in zip(ws, ps, ranges):
        red = class_reduce(p, rg)
        if red is None:
            raise EndpointError("factor exponent at its upper endpoint")
        ti, si = red
        factors.append(interval_log_quantity(ClassSpec("A", p=ti), _pow(wi, float(si)), fam))
    rhs = sum(float(e) * f for e, f in zip(ex.primal, factors))
    rep = VerificationReport("product_weight", environment={
        "p": ps, "ranges": [str(r) for r in ranges], "tau_p": tp,
        "exponents": list(ex.primal), "dual_exponents": None if ex.dual is None else list(ex.dual)})
    rep.add(_percube("product weight A_tau_p <= prod of factors per interval", lhs, rhs, fam))
    if ex.dual is not None and tp > 1:
        s_exp = 1 / (inv_lo - inv_p)
        lhs_d = interval_log_quantity(ClassSpec("A", p=dual_exponent(tp)), _pow(w, -float(s_exp)), fam)
        rhs_d = sum(float(e) * f for e, f in zip(ex.dual, factors))
        rep.add(_percube("dual product weight per interval", lhs_d, rhs_d, fam))
    else:
        rep.note("dual form skipped: its denominator vanishes")
    return rep


PERCUBE_LEMMAS = {
    "weights_b": _check_weights_b,
    "weights_c": _check_weights_c,
    "weights_d": _check_weights_d,
    "fac_a": _check_fac_a,
    "fac_b": _check_fac_b,
    "multi_embed": _check_multi_embed,
    "product_weight": _check_product_weight,
}


def verify_percube(lemma: str, **inputs) -> VerificationReport:
    """Run one named per-interval check.

    weights_b(w, p, s); weights_c(w, p, rng); weights_d(w, p, rng);
    fac_a(u, v, p, p0); fac_b(w0, w1, q0, q1, theta);
    multi_embed(ws, p_list, range_list, q_list=None);
    product_weight(ws, p_list, range_list).  Every check accepts
    ``family="lattices"`` (default) or ``"windows"``.
    """
    try:
        fn = PERCUBE_LEMMAS[lemma]
    except KeyError:
        raise ValueError(f"unknown lemma {lemma!r}; expected one of {sorted(PERCUBE_LEMMAS)}") from None
    return fn(**inputs)


def sharp_rh_check(w: GridFunction, p, *, samples: int = 20, seed: int = 0,
                   p_star=DEFAULT_P_STAR) -> VerificationReport:
    """Sharp reverse Hölder and its level-set form on every lattice interval.

    gamma is computed from the upper characteristic estimate, which can only
    shrink it.  The level-set inequality is tested on random unions of cells
    inside each interval plus the interval itself.
    """
    p = exponent(p)
    w.require_weight()
    spec = ClassSpec.A(p, p_star=p_star)
    est = estimate_characteristic(w, spec)
    g = rh_gamma(1, p, Fraction(est.upper))
    gf = float(g)
    rep = VerificationReport("sharp_rh", environment={"p": p, "n_cells": w.grid.n_cells,
                                                       "samples": samples, "seed": seed})
    rep.data.update({"gamma": g, "char_upper": est.upper})
    rep.notes.extend(est.notes)
    fam = shared_family(w.grid)
    logw = np.log(w.values)
    lhs = _log_pm(fam, logw, 1 + gf)
    rhs = math.log(2) + _log_pm(fam, logw, 1.0)
    rep.add(_percube("(mean w^(1+g))^(1/(1+g)) <= 2 mean w", lhs, rhs, fam))
    rng = np.random.default_rng(seed)
    expo = gf / (1 + gf)
    worst, wit = 0.0, None
    x = w.values
    for lat_id, lat in enumerate(fam.lattices):
        for lv in lat.levels:
            blk = lv.block(x)  # (count, L)
            k, L = blk.shape
            if k == 0:
                continue
            probs = rng.uniform(0.0, 1.0, size=(k, samples, 1))
            mask = rng.uniform(size=(k, samples, L)) < probs
            mass = blk.sum(axis=1)
            wE = (mask * blk[:, None, :]).sum(axis=2)
            frac = mask.sum(axis=2) / L
            allowed = 2.0 * frac ** expo
            ratio = np.divide(wE / mass[:, None], allowed, out=np.zeros_like(wE),
                              where=frac > 0)
            # E = Q itself
            ratio = np.concatenate([ratio, np.full((k, 1), 0.5)], axis=1)
            i, j = np.unravel_index(np.argmax(ratio), ratio.shape)
            if ratio[i, j] > worst:
                worst = float(ratio[i, j])
                a = int(lv.starts[i])
                wit = {"interval": [a, a + L], "lattice": lat_id, "sample": int(j)}
    rep.add(CheckRecord.inequality("w(E)/w(Q) <= 2(|E|/|Q|)^(g/(1+g))", worst, 1.0, witness=wit,
                                   note="worst ratio over random subsets"))
    return rep
