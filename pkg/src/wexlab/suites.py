"""Named verification suites driven by a JSON scenario.

A scenario names the suite and overrides its defaults.  Unknown keys are
rejected and every parameter is checked against the preconditions of the
operations it feeds before anything runs.  Trials draw from per-trial
seeded streams and are merged in trial order, so a report depends only on
the scenario.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import time
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from .exponents import (
    INF, LimitedRange, buckley_bound, check_dual_tau_identity, check_rbeta_identity,
    diag_extrapolation_constant, exponent, is_inf, recip, rh_gamma,
)
from .extrapolation import (
    DEFAULT_K_MAX, extrapolate_weight_diag, extrapolate_weight_offdiag, interpolate_weight,
    rdf_certify, stein_weiss_combine,
)
from .grid import Grid, GridFunction, build_lattices, lp_norm, power_weight
from .maximal import uncentered_maximal
from .report import (
    FAIL, INCONCLUSIVE, INFO, PASS, CheckRecord, VerificationReport, jsonable, tolerance,
)
from .rng import run_trials, trial_rng
from .scans import buckley_sharpness_scan, fs_vector_scan, random_probe, sparse_bound_scan
from .sparse import cz_sparse_dominate, domination_report, marcinkiewicz_ratio
from .weights import (
    factor_weight, openness_check, random_step_weight, sharp_rh_check, verify_percube,
)

__all__ = ["Scenario", "ScenarioError", "SUITES", "run_scenario", "load_scenario"]


class ScenarioError(ValueError):
    """Invalid scenario: unknown suite, unknown key or a violated precondition."""


WEIGHT_FAMILIES = ("constant", "power", "random-step")
_WEIGHT_KEYS = {"family", "a", "low", "high"}
_CASE_KEYS = {"p", "q", "p0", "q0", "range", "direction", "construction"}


@dataclasses.dataclass
class Scenario:
    """Suite name plus overrides; ``None`` means the suite default."""

    suite: str
    seed: int = 0
    trials: int | None = None
    power_trials: int | None = None
    n_cells: int | None = None
    domain: list | None = None
    weight: dict | None = None
    p: Any = None
    q: Any = None
    p0: Any = None
    s: Any = None
    r: Any = None
    theta: Any = None
    range: list | None = None
    p_list: list | None = None
    ranges: list | None = None
    pairs: list | None = None
    cases: list | None = None
    a_list: list | None = None
    k_max: int | None = None
    epsilon: float | None = None
    count: int | None = None
    band: list | None = None
    slack: float | None = None
    tolerance: float = 1e-9
    workers: int | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ScenarioError("scenario must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {unknown}")
        if "suite" not in d:
            raise ScenarioError("scenario needs a 'suite'")
        return cls(**d)

    def to_dict(self) -> dict:
        """Canonical form for reports; the worker count does not affect results and is left out."""
        d = dataclasses.asdict(self)
        d.pop("workers")
        return {k: v for k, v in d.items() if v is not None}

    def resolved(self) -> "Scenario":
        """Copy with the suite defaults filled in, validated."""
        if self.suite not in SUITES:
            raise ScenarioError(f"unknown suite {self.suite!r}; expected one of {sorted(SUITES)}")
        defaults = SUITES[self.suite].defaults
        filled = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        for k, v in defaults.items():
            if filled.get(k) is None:
                filled[k] = v
        sc = Scenario(**filled)
        _validate_common(sc)
        SUITES[self.suite].validate(sc)
        return sc


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
    return Scenario.from_dict(d)


# Validation -----------------------------------------------------------------


def _require(cond, msg):
    if not cond:
        raise ScenarioError(msg)


def _exp(x, name, **kw):
    try:
        return exponent(x, **kw)
    except (ValueError, ZeroDivisionError) as exc:
        raise ScenarioError(f"{name}: {exc}") from None


def _range(x, name="range") -> LimitedRange:
    _require(isinstance(x, (list, tuple)) and len(x) == 2, f"{name} must be [lower, upper]")
    try:
        return LimitedRange(_exp(x[0], name), _exp(x[1], name))
    except ValueError as exc:
        raise ScenarioError(f"{name}: {exc}") from None


def _frac(x, name) -> Fraction:
    try:
        return Fraction(x)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ScenarioError(f"{name}: not a rational number: {x!r}") from None


def _open_p(x, name):
    v = _exp(x, name)
    _require(not is_inf(v) and v > 1, f"{name} must lie in (1, inf), got {v}")
    return v


def _pos_int(x, name, *, zero=False):
    _require(isinstance(x, int) and not isinstance(x, bool) and (x >= 0 if zero else x >= 1),
             f"{name} must be a {'nonnegative' if zero else 'positive'} integer, got {x!r}")


def _validate_common(sc: Scenario):
    _require(isinstance(sc.seed, int) and not isinstance(sc.seed, bool) and sc.seed >= 0,
             "seed must be a nonnegative integer")
    for name in ("trials", "power_trials", "n_cells", "count", "k_max"):
        v = getattr(sc, name)
        if v is not None:
            _pos_int(v, name, zero=name in ("power_trials", "k_max"))
    if sc.n_cells is not None:
        _require(sc.n_cells & (sc.n_cells - 1) == 0 and sc.n_cells >= 2,
                 f"n_cells must be a power of two >= 2, got {sc.n_cells}")
    if sc.domain is not None:
        _require(isinstance(sc.domain, (list, tuple)) and len(sc.domain) == 2
                 and all(isinstance(v, (int, float)) for v in sc.domain)
                 and math.isfinite(sc.domain[0]) and math.isfinite(sc.domain[1])
                 and sc.domain[0] < sc.domain[1], "domain must be [x0, x1] with x0 < x1")
    if sc.weight is not None:
        _validate_weight(sc.weight)
    _require(isinstance(sc.tolerance, (int, float)) and sc.tolerance >= 0
             and math.isfinite(sc.tolerance), "tolerance must be a finite nonnegative number")
    if sc.workers is not None:
        _pos_int(sc.workers, "workers")
    if sc.band is not None:
        _require(isinstance(sc.band, (list, tuple)) and len(sc.band) == 2
                 and float(sc.band[0]) <= float(sc.band[1]), "band must be [lo, hi] with lo <= hi")


def _validate_weight(wd):
    _require(isinstance(wd, dict), "weight must be an object such as {\"family\": \"power\", \"a\": 0.5}")
    unknown = sorted(set(wd) - _WEIGHT_KEYS)
    _require(not unknown, f"unknown weight keys: {unknown}")
    fam = wd.get("family")
    _require(fam in WEIGHT_FAMILIES, f"weight family must be one of {WEIGHT_FAMILIES}, got {fam!r}")
    if fam == "power" and wd.get("a") is not None:
        _require(isinstance(wd["a"], (int, float)) and float(wd["a"]) > -1,
                 "power weight exponent a must be a number > -1")
    if fam == "random-step":
        lo, hi = float(wd.get("low", 1e-3)), float(wd.get("high", 1e3))
        _require(0 < lo < hi and math.isfinite(hi), "random-step needs 0 < low < high")
    else:
        _require("low" not in wd and "high" not in wd, "low/high only apply to random-step weights")
    if fam != "power":
        _require("a" not in wd, "a only applies to power weights")


def _power_a_bound(sc, p, scale=Fraction(1)):
    """x^(scale a) must stay inside A_p: -1 < scale a < p - 1."""
    wd = sc.weight
    if wd and wd.get("family") == "power" and wd.get("a") is not None:
        a = float(wd["a"]) * float(scale)
        _require(-1 < a < float(p - 1), f"power weight exponent {a} outside (-1, {p - 1})")


# Weights and helpers -----------------------------------------------------


def _grid(sc: Scenario) -> Grid:
    return Grid(float(sc.domain[0]), float(sc.domain[1]), sc.n_cells)


def _draw_weight(sc: Scenario, grid: Grid, rng, *, a_range=(-0.9, 0.9), family=None, a=None):
    wd = dict(sc.weight or {})
    fam = family or wd.get("family", "random-step")
    if fam == "constant":
        return GridFunction.constant(grid), {"family": "constant"}
    if fam == "power":
        if a is None:
            a = wd.get("a")
        if a is None:
            a = float(rng.uniform(*a_range))
        return power_weight(grid, a), {"family": "power", "a": float(a)}
    lo, hi = float(wd.get("low", 1e-3)), float(wd.get("high", 1e3))
    return random_step_weight(grid, rng, lo, hi), {"family": "random-step", "low": lo, "high": hi}


def _mixed_weights(sc: Scenario, grid: Grid, t: int, rng, a_span=(-0.9, 2.0)):
    """Trial t of a weight sweep: trials random-step weights then power_trials power weights.

    A configured weight family overrides the mix.
    """
    if sc.weight is not None:
        return _draw_weight(sc, grid, rng)
    if t < sc.trials:
        return _draw_weight(sc, grid, rng, family="random-step")
    k = t - sc.trials
    n = max(sc.power_trials, 1)
    a = a_span[0] + (a_span[1] - a_span[0]) * k / max(n - 1, 1)
    return _draw_weight(sc, grid, rng, family="power", a=a)


def _n_weight_trials(sc):
    return sc.trials + (0 if sc.weight is not None else sc.power_trials)


def _positive_data(grid: Grid, rng) -> GridFunction:
    return GridFunction(grid, rng.exponential(size=grid.n_cells) + 1e-3)


def _record_ratio(c: CheckRecord) -> float:
    try:
        m, a = float(c.measured), float(c.allowed)
    except (TypeError, ValueError):
        return -math.inf
    if a > 0:
        return m / a
    return math.inf if m > a else -math.inf


def aggregate(suite: str, parts, environment=None) -> VerificationReport:
    """One record per check name across trials, keeping the worst instance as witness.

    ``parts`` is a sequence of (label, report) in trial order.
    """
    out = VerificationReport(suite, environment=dict(environment or {}))
    groups: dict[str, list] = {}
    for label, rep in parts:
        for c in rep.checks:
            groups.setdefault(c.name, []).append((label, c))
        for n in rep.notes:
            out.note(n)
    for name, items in groups.items():
        statuses = [c.status for _, c in items]
        bad = [(lab, c) for lab, c in items if not c.ok]
        if FAIL in statuses:
            status = FAIL
        elif INCONCLUSIVE in statuses:
            status = INCONCLUSIVE
        elif all(s == INFO for s in statuses):
            status = INFO
        else:
            status = PASS
        if bad:
            lab, worst = bad[0]
        else:
            lab, worst = max(items, key=lambda it: _record_ratio(it[1]))
        out.add(CheckRecord(name, status, worst.measured, worst.allowed,
                            {"instance": lab, "witness": worst.witness},
                            f"{len(items)} instances, {len(bad)} not passing"
                            + (f"; {worst.note}" if worst.note else "")))
    out.data["instances"] = len(parts)
    return out


# Suites ------------------------------------------------------------------


def _suite_identities(sc: Scenario, trials):
    rng = trial_rng(sc.seed, 0)
    fails_tau, fails_rbeta = [], []
    for i in range(sc.count):
        lo = 1 + Fraction(int(rng.integers(0, 20)), int(rng.integers(1, 10)))
        if rng.uniform() < 0.25:
            hi = INF
            p = lo + Fraction(int(rng.integers(1, 40)), int(rng.integers(1, 10)))
        else:
            hi = lo + Fraction(int(rng.integers(1, 30)), int(rng.integers(1, 10)))
            m = int(rng.integers(2, 12))
            p = lo + (hi - lo) * Fraction(int(rng.integers(1, m)), m)
        rg = LimitedRange(lo, hi)
        if not check_dual_tau_identity(p, rg):
            fails_tau.append([str(p), str(lo), str(hi)])
        if not check_rbeta_identity(p, rg):
            fails_rbeta.append([str(p), str(lo), str(hi)])
    rep = VerificationReport(sc.suite)
    rep.add(CheckRecord.exact("dual tau identities", not fails_tau, measured=len(fails_tau),
                              allowed=0, witness=fails_tau[:1] or None,
                              note=f"{sc.count} random rational tuples, exact arithmetic"))
    rep.add(CheckRecord.exact("r beta = tau identity", not fails_rbeta, measured=len(fails_rbeta),
                              allowed=0, witness=fails_rbeta[:1] or None,
                              note=f"{sc.count} random rational tuples, exact arithmetic"))
    for name, got, want in [("buckley_bound(1, 2, 1)", buckley_bound(1, 2, 1), Fraction(486)),
                            ("rh_gamma(1, 2, 1)", rh_gamma(1, 2, 1), Fraction(1, 64)),
                            ("diag_extrapolation_constant(1, 2, 3)",
                             diag_extrapolation_constant(1, 2, 3), Fraction(3 ** 10))]:
        rep.add(CheckRecord.exact(name, got == want, measured=got, allowed=want))
    return rep


def _suite_rdf(sc: Scenario, trials):
    grid = _grid(sc)
    ps = [_open_p(p, "p_list") for p in sc.p_list]

    def one(t, rng):
        p = ps[t % len(ps)]
        w, wmeta = _draw_weight(sc, grid, rng, a_range=(-0.9, 0.9 * float(p - 1)))
        h = random_probe(grid, rng)
        rep = rdf_certify(h, p, w, sc.k_max)
        return {"trial": t, "p": str(p), "weight": wmeta}, rep

    return aggregate(sc.suite, trials(one, sc.trials))


def _suite_lemma_weights(sc: Scenario, trials):
    grid = _grid(sc)
    p, s, rg = _exp(sc.p, "p"), _exp(sc.s, "s"), _range(sc.range)

    def one(t, rng):
        w, meta = _mixed_weights(sc, grid, t, rng)
        reps = [verify_percube("weights_b", w=w, p=p, s=s),
                verify_percube("weights_c", w=w, p=p, rng=rg),
                verify_percube("weights_d", w=w, p=p, rng=rg)]
        return [({"trial": t, "weight": meta, "lemma": r.suite}, r) for r in reps]

    return aggregate(sc.suite, _flatten_named(trials(one, _n_weight_trials(sc))))


def _flatten_named(results):
    """Prefix each check with its lemma so the aggregate keeps lemmas apart."""
    out = []
    for group in results:
        for label, rep in group:
            renamed = VerificationReport(rep.suite, notes=list(rep.notes))
            for c in rep.checks:
                renamed.add(dataclasses.replace(c, name=f"{rep.suite}: {c.name}"))
            out.append((label, renamed))
    return out


def _suite_factorization(sc: Scenario, trials):
    grid = _grid(sc)
    p, s, p0 = _exp(sc.p, "p"), _exp(sc.s, "s"), _exp(sc.p0, "p0")
    q0, q1 = (_exp(x, "pairs") for x in sc.pairs[0])
    theta = _frac(sc.theta, "theta")

    def one(t, rng):
        # A_1 weights for the factorization: x^-b or random steps.
        w1, m1 = _mixed_weights(sc, grid, t, rng, a_span=(-0.9, 0.0))
        w2, m2 = _mixed_weights(sc, grid, t, rng, a_span=(0.0, -0.9))
        u, _ = _mixed_weights(sc, grid, t, rng)
        fr = factor_weight(w1, w2, p, s)
        fr.report.suite = "factor_weight"
        reps = [fr.report,
                verify_percube("fac_a", u=u, v=w1, p=p, p0=p0),
                verify_percube("fac_b", w0=w1, w1=w2, q0=q0, q1=q1, theta=theta)]
        return [({"trial": t, "weights": [m1, m2]}, r) for r in reps]

    return aggregate(sc.suite, _flatten_named(trials(one, _n_weight_trials(sc))))


def _suite_openness(sc: Scenario, trials):
    grid = _grid(sc)
    q = _open_p(sc.p, "p")

    def one(t, rng):
        w, meta = _mixed_weights(sc, grid, t, rng)
        return {"trial": t, "weight": meta}, openness_check(w, q)

    return aggregate(sc.suite, trials(one, _n_weight_trials(sc)))


def _suite_sharp_rh(sc: Scenario, trials):
    grid = _grid(sc)
    p = _open_p(sc.p, "p")

    def one(t, rng):
        w, meta = _mixed_weights(sc, grid, t, rng)
        return {"trial": t, "weight": meta}, sharp_rh_check(w, p, seed=int(rng.integers(2 ** 32)))

    return aggregate(sc.suite, trials(one, _n_weight_trials(sc)))


def _suite_multilinear(sc: Scenario, trials):
    grid = _grid(sc)
    ps = [_exp(p, "p_list") for p in sc.p_list]
    rgs = [_range(r, "ranges") for r in sc.ranges]

    def one(t, rng):
        ws, metas = [], []
        for i in range(len(ps)):
            w, m = _mixed_weights(sc, grid, t, trial_rng(sc.seed, t * len(ps) + i + 1))
            ws.append(w)
            metas.append(m)
        reps = [verify_percube("multi_embed", ws=ws, p_list=ps, range_list=rgs),
                verify_percube("product_weight", ws=ws, p_list=ps, range_list=rgs)]
        return [({"trial": t, "weights": metas}, r) for r in reps]

    return aggregate(sc.suite, _flatten_named(trials(one, _n_weight_trials(sc))))


def _suite_diag(sc: Scenario, trials):
    grid = _grid(sc)
    pairs = [(_open_p(a, "pairs"), _open_p(b, "pairs")) for a, b in sc.pairs]

    def one(t, rng):
        p, q = pairs[t % len(pairs)]
        # w^p must stay in A_p: -1 < p a < p - 1.
        w, meta = _draw_weight(sc, grid, rng, a_range=(-0.9 / float(p), 0.9 * float(p - 1) / float(p)))
        f, g = _positive_data(grid, rng), _positive_data(grid, rng)
        _, rep = extrapolate_weight_diag(f, g, w, p, q, k_max=sc.k_max)
        out = [({"trial": t, "p": str(p), "q": str(q), "weight": meta}, rep)]
        if t < len(pairs):
            out.extend(_diag_pipelines(t, f, g, w, q, sc.k_max, meta))
        return out

    return aggregate(sc.suite, _flatten_named(trials(one, sc.trials)))


def _diag_pipelines(t, f, g, w, q, k_max, meta):
    """Level-set family of the maximal function at p0 = 3/2 and the rescaling identity."""
    p0 = Fraction(3, 2)
    Mf = uncentered_maximal(f, method="fast")
    lam = float(np.median(Mf.values))
    F = f.with_values(lam * (Mf.values > lam), signed=False)
    pairs = []
    if np.any(F.values > 0):
        w15 = w.with_values(w.values ** (2.0 / 3.0))
        _, rep = extrapolate_weight_diag(F, g, w15, p0, q, k_max=k_max)
        rep.suite = "level set family at p0 = 3/2"
        pairs.append(({"trial": t, "weight": meta}, rep))
    # ||f^a||_{L^p(w)} = ||f||_{L^{a p}(w)}^a with a = p0/q0.
    rep = VerificationReport("rescaled family")
    a = Fraction(3, 4)
    lhs = lp_norm(f.with_values(f.values ** float(a)), 2, w)
    rhs = lp_norm(f, 2 * a, w) ** float(a)
    rep.add(CheckRecord.inequality("norm of f^(p0/q0) matches rescaled exponent",
                                   abs(lhs - rhs) / rhs, 1e-12, tol=0.0))
    pairs.append(({"trial": t}, rep))
    return pairs


def _parse_case(c):
    _require(isinstance(c, dict), "each case must be an object")
    unknown = sorted(set(c) - _CASE_KEYS)
    _require(not unknown, f"unknown case keys: {unknown}")
    for k in ("p", "q", "p0", "q0", "range", "direction"):
        _require(k in c, f"case is missing {k!r}")
    out = {k: _exp(c[k], k) for k in ("p", "q", "p0", "q0")}
    out["range"] = _range(c["range"])
    out["direction"] = c["direction"]
    out["construction"] = c.get("construction", "reflection")
    _require(out["direction"] in ("down", "up"), "direction must be 'down' or 'up'")
    _require(out["construction"] in ("reflection", "case2"),
             "construction must be 'reflection' or 'case2'")
    rg = out["range"]
    _require(out["p"] != rg.lower, f"p = {out['p']} sits at the lower endpoint")
    _require(rg.contains(out["p"], closed=False), f"p = {out['p']} must lie inside {rg}")
    _require(rg.contains(out["p0"]), f"p0 = {out['p0']} must lie in {rg}")
    _require(not any(is_inf(out[k]) for k in ("p", "q", "p0", "q0")), "exponents must be finite")
    _require(recip(out["q"]) - recip(out["q0"]) == recip(out["p"]) - recip(out["p0"]),
             "case violates 1/q - 1/q0 = 1/p - 1/p0")
    return out


def _suite_offdiag(sc: Scenario, trials):
    grid = _grid(sc)
    cases = [_parse_case(c) for c in sc.cases]

    def one(t, rng):
        c = cases[t % len(cases)]
        w, meta = _draw_weight(sc, grid, rng, a_range=(-0.15, 0.15))
        f, g = _positive_data(grid, rng), _positive_data(grid, rng)
        _, rep = extrapolate_weight_offdiag(f, g, w, c["p"], c["q"], c["p0"], c["q0"], c["range"],
                                            c["direction"], construction=c["construction"],
                                            k_max=sc.k_max)
        label = {k: str(v) for k, v in c.items()}
        rep.suite = f"{label['direction']} {label['construction']} {label['range']}"
        return [({"trial": t, "case": label, "weight": meta}, rep)]

    return aggregate(sc.suite, _flatten_named(trials(one, sc.trials)))


def _suite_sparse(sc: Scenario, trials):
    grid = _grid(sc)
    lattices = build_lattices(grid)

    def one(t, rng):
        L = lattices[t % 3]
        f = GridFunction(grid, rng.exponential(size=grid.n_cells) ** 3 * (rng.uniform(size=grid.n_cells) < 0.5))
        if not np.any(f.values > 0):
            f = random_probe(grid, rng)
        return {"trial": t, "lattice": t % 3}, domination_report(f, L)

    return aggregate(sc.suite, trials(one, sc.trials))


def _random_cubes(n: int, rng, max_cubes: int = 8):
    k = int(rng.integers(1, max_cubes + 1))
    k = min(k, n // 2)
    ends = np.sort(rng.choice(n + 1, size=2 * k, replace=False))
    return [(int(ends[2 * i]), int(ends[2 * i + 1])) for i in range(k)]


def _suite_marcinkiewicz(sc: Scenario, trials):
    grid = _grid(sc)
    eps = float(sc.epsilon)

    def one(t, rng):
        cubes = _random_cubes(grid.n_cells, rng)
        res = marcinkiewicz_ratio(cubes, eps, GridFunction.constant(grid), exhaustive=True)
        return {"source": "random cubes, w = 1", "trial": t, "cubes": cubes, **res}

    rows = list(trials(one, sc.trials))
    cubes = _random_cubes(grid.n_cells, trial_rng(sc.seed, sc.trials))
    for a in sc.a_list:
        res = marcinkiewicz_ratio(cubes, eps, power_weight(grid, a), exhaustive=True)
        rows.append({"source": "power weight scan", "a": float(a), "cubes": cubes, **res})
    ratios = np.array([r["ratio"] for r in rows])
    rep = VerificationReport(sc.suite)
    spread = float(ratios.max() / ratios.min())
    rep.add(CheckRecord.inequality("ratio envelope max/min", spread, 10.0,
                                   witness={"max_at": int(ratios.argmax()), "min_at": int(ratios.argmin())}))
    rep.add(CheckRecord.info("ratio range", [float(ratios.min()), float(ratios.max())],
                             note="implicit constant; reported, not asserted"))
    rep.data["cases"] = rows
    rep.data["rows"] = [{"parameter": r.get("a", r.get("trial")), "lower_char": r["char_lower"],
                         "upper_char": r["char_upper"], "measured": r["ratio"], "allowed": None,
                         "slope_contribution": None} for r in rows]
    return rep


def _a_list(sc, p):
    return [float(a) * float(p - 1) for a in sc.a_list]


def _scan_a_ok(a_list, p):
    for a in a_list:
        _require(isinstance(a, (int, float)) and -1 < float(a) * float(p - 1) < float(p - 1),
                 f"a_list entries scale p - 1 and must give exponents in (-1, p - 1), got {a}")


def _suite_buckley(sc: Scenario, trials):
    p = _open_p(sc.p, "p")
    return buckley_sharpness_scan(p, _a_list(sc, p), n_cells=sc.n_cells, trials=sc.trials,
                                  seed=sc.seed, band=sc.band)


def _suite_fs(sc: Scenario, trials):
    p, r = _open_p(sc.p, "p"), _exp(sc.r, "r")
    return fs_vector_scan(p, r, _a_list(sc, p), n_cells=sc.n_cells, trials=sc.trials,
                          seed=sc.seed, band=sc.band)


def _suite_sparse_bound(sc: Scenario, trials):
    p, r = _open_p(sc.p, "p"), _exp(sc.r, "r")
    return sparse_bound_scan(p, _a_list(sc, p), r=r, n_cells=sc.n_cells, trials=sc.trials,
                             seed=sc.seed, slack=float(sc.slack))


def _exact_norm(A: np.ndarray, p):
    if p == 1:
        return float(np.abs(A).sum(axis=0).max())
    if is_inf(p):
        return float(np.abs(A).sum(axis=1).max())
    if p == 2:
        return float(np.linalg.norm(A, 2))
    return None


def _boyd_lower(A: np.ndarray, p, iters: int = 200) -> float:
    """Power iteration for the l^p operator norm of a nonnegative matrix; each iterate is a valid lower bound."""
    pf = float(p)
    qf = pf / (pf - 1)
    x = np.ones(A.shape[1])
    best = 0.0
    for _ in range(iters):
        x /= np.sum(x ** pf) ** (1 / pf)
        y = A @ x
        best = max(best, float(np.sum(y ** pf) ** (1 / pf)))
        z = A.T @ (y ** (pf - 1))
        x = z ** (qf - 1)
    return best


def _weighted(A: np.ndarray, w: np.ndarray, p) -> np.ndarray:
    """Matrix of T on L^p(w) conjugated to plain l^p."""
    if is_inf(p):
        return A
    a = 1.0 / float(p)
    return (w ** a)[:, None] * A * (w ** -a)[None, :]


def _sparse_matrix(S, n: int) -> np.ndarray:
    A = np.zeros((n, n))
    for I in S.intervals():
        A[I.start:I.stop, I.start:I.stop] += 1.0 / I.length
    return A


def _suite_stein_weiss(sc: Scenario, trials):
    grid = _grid(sc)
    cases = []
    for c in sc.pairs:
        _require(isinstance(c, (list, tuple)) and len(c) == 3, "stein-weiss pairs are [p0, p1, theta]")
        p0, p1 = _exp(c[0], "p0"), _exp(c[1], "p1")
        _require(p0 >= 1 and p1 >= 1, "p0, p1 must be >= 1")
        th = _frac(c[2], "theta")
        _require(0 <= th <= 1, "theta must lie in [0, 1]")
        cases.append((p0, p1, th))
    lattices = build_lattices(grid)
    rep0 = VerificationReport("combine")
    for (K0, K1, th, want) in [(4.0, 9.0, Fraction(1, 2), 6.0), (3.0, 5.0, Fraction(0), 3.0),
                               (1.0, 1.0, Fraction(1, 3), 1.0)]:
        got = stein_weiss_combine(K0, K1, th)
        rep0.add(CheckRecord.inequality(f"combine({K0:g}, {K1:g}, {th})", abs(got - want), 1e-12, tol=0.0))

    def one(t, rng):
        p0, p1, th = cases[t % len(cases)]
        w0, m0 = _draw_weight(sc, grid, rng)
        w1, m1 = _draw_weight(sc, grid, rng)
        f = random_probe(grid, rng)
        S, _ = cz_sparse_dominate(f, lattices[t % 3])
        A = _sparse_matrix(S, grid.n_cells)
        p, w = interpolate_weight(p0, w0, p1, w1, th)
        K0 = _exact_norm(_weighted(A, w0.values, p0), p0)
        K1 = _exact_norm(_weighted(A, w1.values, p1), p1)
        rep = VerificationReport("interpolation")
        if K0 is None or K1 is None:
            rep.note("endpoint norms are only exact for exponents 1, 2 and inf; case skipped")
            return [({"trial": t}, rep)]
        Aw = _weighted(A, w.values, p)
        K = _exact_norm(Aw, p)
        source = "exact"
        if K is None:
            K, source = _boyd_lower(Aw, p), "power-iteration lower bound"
        bound = stein_weiss_combine(K0, K1, th)
        rep.add(CheckRecord.inequality("||T||_(p,w) <= K0^(1-theta) K1^theta", K, bound,
                                       witness={"p": str(p), "norm_source": source}))
        return [({"trial": t, "p0": str(p0), "p1": str(p1), "theta": str(th), "weights": [m0, m1]},
                 rep)]

    parts = [[({"fixed": True}, rep0)]] + list(trials(one, sc.trials))
    return aggregate(sc.suite, _flatten_named(parts))


# Registry ------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class Suite:
    run: Callable
    defaults: dict
    validate: Callable = lambda sc: None


def _v_rdf(sc):
    _require(sc.n_cells <= 1 << 16, "n_cells above 2^16 is not supported by this suite")
    for p in sc.p_list:
        p = _open_p(p, "p_list")
        _power_a_bound(sc, p)


def _v_lemma(sc):
    p, s, rg = _exp(sc.p, "p"), _exp(sc.s, "s"), _range(sc.range)
    _require(not is_inf(p) and p >= 1 and not is_inf(s) and s >= 1, "p and s must lie in [1, inf)")
    _require(rg.contains(p, closed=False), f"p = {p} must lie strictly inside {rg}")


def _v_factorization(sc):
    p, s, p0 = _exp(sc.p, "p"), _exp(sc.s, "s"), _exp(sc.p0, "p0")
    _require(not is_inf(p) and p >= 1 and s > 1, "need p in [1, inf) and s in (1, inf]")
    _require(p <= p0 and not is_inf(p0), "need p <= p0 < inf")
    _require(isinstance(sc.pairs, list) and len(sc.pairs) == 1 and len(sc.pairs[0]) == 2,
             "factorization pairs is [[q0, q1]]")
    for x in sc.pairs[0]:
        v = _exp(x, "pairs")
        _require(not is_inf(v) and v >= 1, "q0, q1 must lie in [1, inf)")
    th = _frac(sc.theta, "theta")
    _require(0 <= th <= 1, "theta must lie in [0, 1]")


def _v_open(sc):
    _open_p(sc.p, "p")


def _v_multi(sc):
    _require(isinstance(sc.p_list, list) and isinstance(sc.ranges, list)
             and len(sc.p_list) == len(sc.ranges) >= 1, "p_list and ranges need the same nonzero length")
    for p, r in zip(sc.p_list, sc.ranges):
        rg = _range(r, "ranges")
        _require(rg.contains(_exp(p, "p_list"), closed=False), f"p = {p} must lie inside {rg}")


def _v_diag(sc):
    _require(isinstance(sc.pairs, list) and sc.pairs, "pairs must be a nonempty list of [p, q]")
    for pq in sc.pairs:
        _require(isinstance(pq, (list, tuple)) and len(pq) == 2, "pairs must be [p, q]")
        p = _open_p(pq[0], "p")
        _open_p(pq[1], "q")
        _power_a_bound(sc, p, scale=p)


def _v_offdiag(sc):
    _require(isinstance(sc.cases, list) and sc.cases, "cases must be a nonempty list")
    for c in sc.cases:
        _parse_case(c)


def _v_sparse(sc):
    _require(sc.n_cells <= 1 << 14, "n_cells above 2^14 is not supported by this suite")


def _v_marc(sc):
    _require(isinstance(sc.epsilon, (int, float)) and sc.epsilon > 0, "epsilon must be positive")
    for a in sc.a_list:
        _require(isinstance(a, (int, float)) and -1 < a < 1, f"A_2 power weight needs a in (-1, 1), got {a}")


def _v_scan(sc):
    p = _open_p(sc.p, "p")
    _require(isinstance(sc.a_list, list) and len(sc.a_list) >= 2, "a_list needs at least two values")
    _scan_a_ok(sc.a_list, p)
    if sc.suite == "fs-vector-scan":
        r = _exp(sc.r, "r")
        _require(r > 1, "r must lie in (1, inf]")
    if sc.suite == "sparse-bound-scan":
        r = _exp(sc.r, "r")
        _require(not is_inf(r), "r must be finite")
        _require(isinstance(sc.slack, (int, float)) and sc.slack >= 0, "slack must be nonnegative")


def _v_sw(sc):
    _require(sc.n_cells <= 512, "stein-weiss builds dense matrices; n_cells must be <= 512")
    _require(isinstance(sc.pairs, list) and sc.pairs, "pairs must be a nonempty list of [p0, p1, theta]")


_SCAN_A = [0.5, 0.75, 0.9, 0.95, 0.99]
_BASE = {"trials": 50, "power_trials": 20, "n_cells": 4096, "domain": [0.0, 1.0], "k_max": DEFAULT_K_MAX}

SUITES: dict[str, Suite] = {
    "exponent-identities": Suite(_suite_identities, {**_BASE, "count": 1000}),
    "rdf": Suite(_suite_rdf, {**_BASE, "p_list": ["3/2", 2, 3], "weight": {"family": "power"}}, _v_rdf),
    "lemma-weights": Suite(_suite_lemma_weights, {**_BASE, "p": 2, "s": 3, "range": [1, 4]}, _v_lemma),
    "factorization": Suite(_suite_factorization, {**_BASE, "p": 2, "s": 3, "p0": 3, "pairs": [[2, 4]],
                                                  "theta": "1/3"}, _v_factorization),
    "openness": Suite(_suite_openness, {**_BASE, "p": 2}, _v_open),
    "sharp-rh": Suite(_suite_sharp_rh, {**_BASE, "p": 2}, _v_open),
    "multilinear-embedding": Suite(_suite_multilinear, {**_BASE, "p_list": [2, 3],
                                                        "ranges": [[1, 4], [2, 6]]}, _v_multi),
    "extrapolation-diag": Suite(_suite_diag, {**_BASE, "pairs": [[2, 4], [4, 2], ["3/2", 3]],
                                              "weight": {"family": "power"}}, _v_diag),
    "extrapolation-offdiag": Suite(_suite_offdiag, {**_BASE, "weight": {"family": "power"}, "cases": [
        {"p": 2, "q": 2, "p0": 3, "q0": 3, "range": [1, "inf"], "direction": "down"},
        {"p": 3, "q": 3, "p0": 2, "q0": 2, "range": [1, "inf"], "direction": "up"},
        {"p": 2, "q": 4, "p0": 3, "q0": 12, "range": ["3/2", 6], "direction": "down"},
        {"p": 2, "q": 2, "p0": "3/2", "q0": "3/2", "range": ["3/2", 6], "direction": "up"},
        {"p": 3, "q": 3, "p0": 2, "q0": 2, "range": [1, "inf"], "direction": "up",
         "construction": "case2"},
    ]}, _v_offdiag),
    "sparse-domination": Suite(_suite_sparse, {**_BASE, "trials": 100, "n_cells": 256}, _v_sparse),
    "marcinkiewicz": Suite(_suite_marcinkiewicz, {**_BASE, "n_cells": 1024, "epsilon": 0.5,
                                                  "a_list": [-0.9, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5,
                                                             0.75, 0.9]}, _v_marc),
    "buckley-scan": Suite(_suite_buckley, {**_BASE, "p": 2, "a_list": _SCAN_A}, _v_scan),
    "fs-vector-scan": Suite(_suite_fs, {**_BASE, "trials": 20, "p": 2, "r": 2, "a_list": _SCAN_A}, _v_scan),
    "sparse-bound-scan": Suite(_suite_sparse_bound, {**_BASE, "trials": 20, "p": 2, "r": 1,
                                                     "a_list": [0.0, 0.25, 0.5, 0.75, 0.9], "slack": 0.1},
                               _v_scan),
    "stein-weiss": Suite(_suite_stein_weiss, {**_BASE, "n_cells": 128, "weight": {"family": "random-step"},
                                              "pairs": [[2, 2, "1/3"], [1, "inf", "1/2"], [1, 2, "1/2"],
                                                        [1, 1, "2/3"], [2, "inf", "1/4"]]}, _v_sw),
}


def _default_workers() -> int:
    return max(1, min(4, os.cpu_count() or 1))


def run_scenario(config: Scenario | dict) -> VerificationReport:
    """Run one suite; the report depends only on the scenario (timing aside)."""
    sc = config if isinstance(config, Scenario) else Scenario.from_dict(config)
    sc = sc.resolved()
    workers = sc.workers or _default_workers()

    def trials(fn, n):
        return run_trials(fn, n, sc.seed, workers=workers)

    t0 = time.perf_counter()
    with tolerance(sc.tolerance), np.errstate(over="ignore", under="ignore"):
        rep = SUITES[sc.suite].run(sc, trials)
    rep.wall_clock = time.perf_counter() - t0
    rep.suite = sc.suite
    rep.environment = {**jsonable(sc.to_dict()), **jsonable(rep.environment)}
    return rep
