"""Empirical operator-norm probes and the power-weight growth scans.

Probe ratios are lower bounds for operator norms and are only ever used on
the left of a bound check.  Scans fit log(probe ratio) against log of a
characteristic estimate and report the slope with a confidence interval;
an acceptance band is checked only when the caller supplies one.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .exponents import buckley_bound, dual_exponent, exponent, is_inf
from .grid import Grid, GridFunction, build_lattices, lp_norm, power_weight
from .maximal import dyadic_maximal, uncentered_maximal, vector_maximal
from .report import CheckRecord, VerificationReport
from .rng import trial_rng
from .sparse import SparseFamily, cz_sparse_dominate, sparse_operator
from .weights import ClassSpec, estimate_characteristic

__all__ = [
    "OPERATORS", "empirical_norm_probe", "fit_slope", "SlopeFit",
    "buckley_sharpness_scan", "fs_vector_scan", "sparse_bound_scan", "power_probes",
    "random_probe",
]

OPERATORS = ("uncentered_maximal", "dyadic_maximal", "sparse_operator")


def _operator(op: str, *, S: SparseFamily | None = None, r=1, lattice=None,
              method: str = "fast") -> Callable[[GridFunction], GridFunction]:
    if op == "uncentered_maximal":
        return lambda f: uncentered_maximal(f, method=method)
    if op == "dyadic_maximal":
        def dyadic(f):
            lat = lattice if lattice is not None else build_lattices(f.grid)[0]
            return dyadic_maximal(f, lat)
        return dyadic
    if op == "sparse_operator":
        if S is None:
            raise ValueError("sparse_operator needs a family S")
        return lambda f: sparse_operator(f, S, r)
    raise ValueError(f"unknown operator {op!r}; expected one of {OPERATORS}")


def random_probe(grid: Grid, rng: np.random.Generator) -> GridFunction:
    """One random nonnegative probe: a log-normal step function, an interval indicator or a power bump."""
    n = grid.n_cells
    kind = rng.integers(3)
    if kind == 0:
        k = int(rng.integers(1, min(n, 64) + 1))
        cuts = np.sort(rng.choice(np.arange(1, n), size=k - 1, replace=False)) if k > 1 else np.zeros(0, int)
        vals = np.exp(rng.normal(0.0, 2.0, size=k))
        return GridFunction(grid, vals[np.searchsorted(cuts, np.arange(n), side="right")])
    if kind == 1:
        a, b = sorted(rng.choice(n + 1, size=2, replace=False))
        out = np.zeros(n)
        out[a:b] = 1.0
        return GridFunction(grid, out)
    c = grid.x0 + rng.uniform() * (grid.x1 - grid.x0)
    b = rng.uniform(0.0, 0.95)
    d = np.abs(grid.midpoints() - c) + 0.5 * grid.cell_width
    return GridFunction(grid, d ** (-b))


def _ratio(T, f: GridFunction, p, w: GridFunction) -> float:
    den = lp_norm(f, p, w)
    return lp_norm(T(f), p, w) / den if den > 0 else 0.0


def empirical_norm_probe(op: str, p, w: GridFunction, trials: int = 50, seed: int = 0, *,
                         S: SparseFamily | None = None, r=1, probes: Sequence[GridFunction] = (),
                         method: str = "fast") -> float:
    """Largest ||Tf||_{L^p(w)} / ||f||_{L^p(w)} over f = 1, ``probes`` and random probes.

    A lower bound for the operator norm of T on L^p(w).
    """
    p = exponent(p)
    w.require_weight()
    T = _operator(op, S=S, r=r, method=method)
    best = _ratio(T, GridFunction.constant(w.grid), p, w)
    for f in probes:
        best = max(best, _ratio(T, f, p, w))
    for t in range(int(trials)):
        best = max(best, _ratio(T, random_probe(w.grid, trial_rng(seed, t)), p, w))
    return best


class SlopeFit:
    def __init__(self, x, y, confidence=0.95):
        x, y = np.asarray(x, float), np.asarray(y, float)
        self.n = x.size
        if self.n < 2 or np.ptp(x) == 0:
            self.slope = self.intercept = self.stderr = math.nan
            self.ci = (math.nan, math.nan)
            self.contributions = [math.nan] * self.n
            return
        res = stats.linregress(x, y)
        self.slope, self.intercept = float(res.slope), float(res.intercept)
        self.stderr = float(res.stderr) if self.n > 2 else math.nan
        if self.n > 2:
            tq = float(stats.t.ppf(0.5 + confidence / 2, self.n - 2))
            self.ci = (self.slope - tq * self.stderr, self.slope + tq * self.stderr)
        else:
            self.ci = (math.nan, math.nan)
        dx = x - x.mean()
        # Each point's share of the least-squares slope; the shares sum to the slope.
        self.contributions = list(dx * (y - y.mean()) / float(np.sum(dx * dx)))

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "stderr": self.stderr,
                "ci": list(self.ci), "n": self.n}


def fit_slope(x, y, confidence=0.95) -> SlopeFit:
    return SlopeFit(x, y, confidence)


def _unit_grid(n_cells: int) -> Grid:
    return Grid(0.0, 1.0, n_cells)


def power_probes(grid: Grid, a: float, p, *, n_exponents: int = 6,
                 radii=(1.0, 0.3, 0.1, 0.01)) -> list[GridFunction]:
    """x^-b on (0, rho] for b from the dual-weight exponent a(p'-1) up past the Hardy exponent (1+a)/p."""
    pf = float(p)
    b_lo = a * (float(dual_exponent(p)) - 1.0)
    b_hi = (1.0 + a) / pf + 0.1
    bs = np.unique(np.concatenate([[b_lo], np.linspace(min(b_lo, b_hi), max(b_lo, b_hi), n_exponents)]))
    x = grid.midpoints()
    out = []
    for b in bs:
        for rho in radii:
            vals = x ** (-b) * (x <= rho)
            if np.any(vals > 0):
                out.append(GridFunction(grid, vals))
    return out


def _check_band(rep, name, value, band):
    lo, hi = band
    rep.add(CheckRecord.exact(name, lo <= value <= hi, measured=value, allowed=[lo, hi]))


def buckley_sharpness_scan(p, a_list, *, n_cells: int = 1 << 16, trials: int = 50, seed: int = 0,
                           band=None, method: str = "fast") -> VerificationReport:
    """Growth of the maximal operator norm on L^p(x^a) as a approaches p - 1."""
    p = exponent(p)
    if is_inf(p) or p <= 1:
        raise ValueError("p must lie in (1, inf)")
    for a in a_list:
        if not -1 < float(a) < float(p - 1):
            raise ValueError(f"a = {a} outside (-1, p - 1)")
    grid = _unit_grid(n_cells)
    rep = VerificationReport("buckley_scan", environment={
        "p": p, "n_cells": n_cells, "trials": trials, "seed": seed, "a_list": list(map(float, a_list))})
    rows = []
    for a in a_list:
        a = float(a)
        w = power_weight(grid, a)
        est = estimate_characteristic(w, ClassSpec.A(p))
        ratio = empirical_norm_probe("uncentered_maximal", p, w, trials, seed,
                                     probes=power_probes(grid, a, p), method=method)
        bound = float(buckley_bound(1, p, Fraction(est.upper)))
        rep.add(CheckRecord.inequality(f"probe <= Buckley bound (a={a:g})", ratio, bound))
        rows.append({"parameter": a, "lower_char": est.lower, "upper_char": est.upper,
                     "measured": ratio, "allowed": bound})
    _finish_scan(rep, rows, x_key="lower_char", target=1.0 / float(p - 1), band=band)
    return rep


def _finish_scan(rep, rows, *, x_key, target, band, band_relative=True, upper_slack=None):
    fit = fit_slope([math.log(r[x_key]) for r in rows], [math.log(r["measured"]) for r in rows])
    for r, c in zip(rows, fit.contributions):
        r["slope_contribution"] = c
    rep.data["rows"] = rows
    rep.data["fit"] = fit.to_dict()
    rep.data["target_exponent"] = target
    rep.add(CheckRecord.info("fitted slope", fit.slope, target,
                             note=f"95% interval [{fit.ci[0]:.4g}, {fit.ci[1]:.4g}]"))
    if band is not None:
        lo, hi = (float(band[0]), float(band[1]))
        if band_relative:
            _check_band(rep, "slope / target in band", fit.slope / target, (lo, hi))
        else:
            _check_band(rep, "slope in band", fit.slope, (lo, hi))
    if upper_slack is not None:
        rep.add(CheckRecord.inequality("slope <= target + slack", fit.slope, target + upper_slack,
                                       tol=0.0))
    return fit


def _annuli(f: GridFunction, n_parts: int) -> list[GridFunction]:
    """Split f over dyadic shells (2^-k-1, 2^-k] of [0, 1]; the last part keeps the rest."""
    x = f.grid.midpoints()
    parts = []
    for k in range(n_parts):
        lo = 0.0 if k == n_parts - 1 else 2.0 ** (-k - 1)
        mask = (x > lo) & (x <= 2.0 ** (-k))
        parts.append(f.with_values(f.values * mask, signed=False))
    return parts


def _vector_ratio(fs, p, r, w, method) -> float:
    rf = math.inf if is_inf(r) else float(r)
    stack = np.stack([f.values for f in fs])
    if math.isinf(rf):
        num = stack.max(axis=0)
    else:
        num = (stack ** rf).sum(axis=0) ** (1.0 / rf)
    den = lp_norm(fs[0].with_values(num, signed=False), p, w)
    if den == 0:
        return 0.0
    return lp_norm(vector_maximal(fs, r, method=method), p, w) / den


def fs_vector_scan(p, r, a_list, *, n_cells: int = 1 << 14, trials: int = 20, seed: int = 0,
                   n_parts: int = 12, band=None, method: str = "fast") -> VerificationReport:
    """Growth of the l^r-valued maximal operator on L^p(x^a) against [x^a]_{A_p}."""
    p, r = exponent(p), exponent(r)
    if is_inf(p) or p <= 1 or r <= 1:
        raise ValueError("need p in (1, inf) and r in (1, inf]")
    grid = _unit_grid(n_cells)
    target = max(0.0 if is_inf(r) else 1.0 / float(r), 1.0 / float(p - 1))
    rep = VerificationReport("fs_vector_scan", environment={
        "p": p, "r": r, "n_cells": n_cells, "trials": trials, "seed": seed,
        "a_list": list(map(float, a_list))})
    rows = []
    for a in a_list:
        a = float(a)
        if not -1 < a < float(p - 1):
            raise ValueError(f"a = {a} outside (-1, p - 1)")
        w = power_weight(grid, a)
        est = estimate_characteristic(w, ClassSpec.A(p))
        best = 0.0
        for f in power_probes(grid, a, p, radii=(1.0, 0.3)):
            best = max(best, _vector_ratio([f], p, r, w, method))
            best = max(best, _vector_ratio(_annuli(f, n_parts), p, r, w, method))
        for t in range(trials):
            rng = trial_rng(seed, t)
            k = int(rng.integers(2, 6))
            best = max(best, _vector_ratio([random_probe(grid, rng) for _ in range(k)], p, r, w, method))
        rows.append({"parameter": a, "lower_char": est.lower, "upper_char": est.upper,
                     "measured": best, "allowed": None})
    _finish_scan(rep, rows, x_key="lower_char", target=target, band=band)
    return rep


def sparse_bound_scan(p, a_list, *, r=1, n_cells: int = 1 << 12, trials: int = 20, seed: int = 0,
                      slack: float = 0.1, method: str = "fast") -> VerificationReport:
    """Growth of sparse operators built from the probes against the upper [w]_{A_p}.

    The fitted slope must not exceed max(1/r, 1/(p-1)) + slack.
    """
    p, r = exponent(p), exponent(r)
    if is_inf(p) or p <= 1 or is_inf(r):
        raise ValueError("need finite p > 1 and finite r")
    grid = _unit_grid(n_cells)
    lat = build_lattices(grid)[0]
    target = max(1.0 / float(r), 1.0 / float(p - 1))
    rep = VerificationReport("sparse_bound_scan", environment={
        "p": p, "r": r, "n_cells": n_cells, "trials": trials, "seed": seed,
        "a_list": list(map(float, a_list))})
    rows = []
    for a in a_list:
        a = float(a)
        if not -1 < a < float(p - 1):
            raise ValueError(f"a = {a} outside (-1, p - 1)")
        w = power_weight(grid, a)
        est = estimate_characteristic(w, ClassSpec.A(p))
        probes = power_probes(grid, a, p, radii=(1.0, 0.1))
        probes += [random_probe(grid, trial_rng(seed, t)) for t in range(trials)]
        best = 0.0
        for f in probes:
            S, _ = cz_sparse_dominate(f, lat)
            best = max(best, _ratio(lambda g: sparse_operator(g, S, r), f, p, w))
        rows.append({"parameter": a, "lower_char": est.lower, "upper_char": est.upper,
                     "measured": best, "allowed": None})
    _finish_scan(rep, rows, x_key="upper_char", target=target, band=None, upper_slack=slack)
    return rep
