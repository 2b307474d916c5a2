"""Sparse families, sparse operators and forms, stopping-time domination of M^d.

A family lives inside one lattice.  Members are addressed as
(depth, index) where depth 0 is the whole grid length and index counts the
intervals of that generation from the left.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .exponents import exponent, is_inf
from .grid import DyadicLattice, Grid, GridError, GridFunction, Interval, _same_grid, lp_norm
from .maximal import dyadic_maximal
from .report import CheckRecord, VerificationReport
from .weights import ClassSpec, estimate_characteristic

__all__ = [
    "SparseFamily", "sparse_operator", "sparse_form", "cz_sparse_dominate",
    "cz_sparse_bruteforce", "domination_report", "marcinkiewicz_function",
    "marcinkiewicz_ratio", "STOP_THRESHOLD",
]

STOP_THRESHOLD = 2


class SparseFamily:
    """Intervals of one lattice, each owning the cells not covered by a deeper member.

    ``members`` are (level, index) pairs in lattice numbering (level 0 holds
    single cells).  ``owner[c]`` is the position in ``members`` of the
    deepest member containing cell c, or -1.
    """

    def __init__(self, lattice: DyadicLattice, members: Iterable[tuple[int, int]], eta=Fraction(1, 2)):
        self.lattice = lattice
        self.eta = Fraction(eta)
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        mem = sorted({(int(j), int(i)) for j, i in members}, key=lambda m: (-m[0], m[1]))
        for j, i in mem:
            if not 0 <= j < len(lattice.levels) or not 0 <= i < lattice.levels[j].count:
                raise GridError(f"({j}, {i}) is not an interval of the lattice")
        self.members = tuple(mem)
        n = lattice.grid.n_cells
        owner = np.full(n, -1, dtype=np.int64)
        for k, (j, i) in enumerate(self.members):  # coarse to fine, deeper overwrites
            a, b = lattice.interval(j, i)
            owner[a:b] = k
        self.owner = owner

    @classmethod
    def from_pairs(cls, lattice: DyadicLattice, pairs, eta=Fraction(1, 2)) -> "SparseFamily":
        depth = lattice.grid.depth
        return cls(lattice, [(depth - int(d), int(i)) for d, i in pairs], eta)

    def __len__(self):
        return len(self.members)

    def intervals(self) -> list[Interval]:
        return [self.lattice.interval(j, i) for j, i in self.members]

    def selection(self, k: int) -> np.ndarray:
        """Cells of E_Q for the k-th member."""
        return np.nonzero(self.owner == k)[0]

    def pairs(self) -> list[tuple[int, int]]:
        depth = self.lattice.grid.depth
        return [(depth - j, i) for j, i in self.members]

    def certificate(self) -> dict:
        """Exact check of E_Q within Q, |E_Q| >= eta |Q| and disjointness."""
        counts = np.bincount(self.owner[self.owner >= 0], minlength=len(self.members))
        worst, worst_k = None, None
        inside = True
        for k, (j, i) in enumerate(self.members):
            a, b = self.lattice.interval(j, i)
            cells = self.selection(k)
            if cells.size and (cells.min() < a or cells.max() >= b):
                inside = False
            frac = Fraction(int(counts[k]), b - a)
            if worst is None or frac < worst:
                worst, worst_k = frac, k
        # Each cell has exactly one owner, so the E_Q are disjoint by construction;
        # the count below re-derives it from the member intervals.
        total = int(counts.sum())
        covered = int(np.count_nonzero(self.owner >= 0))
        ok = inside and total == covered and (worst is None or worst >= self.eta)
        return {"ok": ok, "eta": self.eta, "min_ratio": worst, "at": worst_k,
                "disjoint": total == covered, "inside": inside}

    def to_dict(self) -> dict:
        return {"shift": str(self.lattice.shift), "eta": str(self.eta),
                "members": [list(p) for p in self.pairs()]}

    def __eq__(self, other):
        return (isinstance(other, SparseFamily) and self.lattice is other.lattice
                and self.members == other.members)

    def __hash__(self):
        return hash(self.members)


def _check_family(f: GridFunction, S: SparseFamily):
    if S.lattice.grid != f.grid:
        raise GridError("family and function live on different grids")


def _member_arrays(S: SparseFamily):
    lat = S.lattice
    starts = np.array([lat.levels[j].starts[i] for j, i in S.members], dtype=np.int64)
    lengths = np.array([lat.levels[j].length for j, _ in S.members], dtype=np.int64)
    return starts, lengths


def _member_means(x: np.ndarray, S: SparseFamily) -> np.ndarray:
    # Same block means as the lattice reductions, so comparisons with M^d are exact.
    per_level = S.lattice.level_reduce(x, "mean")
    return np.array([per_level[j][i] for j, i in S.members])


def sparse_operator(f: GridFunction, S: SparseFamily, r=1) -> GridFunction:
    """(sum_Q <|f|>_Q^r 1_Q)^(1/r)."""
    _check_family(f, S)
    r = exponent(r)
    if is_inf(r):
        raise ValueError("r must be finite")
    rf = float(r)
    n = f.grid.n_cells
    acc = np.zeros(n)
    if len(S) == 0:
        return f.with_values(acc, signed=False)
    means = _member_means(np.abs(f.values), S) ** rf
    lat = S.lattice
    by_level: dict = {}
    for (j, i), m in zip(S.members, means):
        by_level.setdefault(j, []).append((i, m))
    for j, items in by_level.items():
        lv = lat.levels[j]
        contrib = np.zeros(lv.count)
        for i, m in items:
            contrib[i] += m
        a = lv.first
        acc[a:a + lv.count * lv.length] += np.repeat(contrib, lv.length)
    return f.with_values(acc ** (1.0 / rf), signed=False)


def sparse_form(f_list: Sequence[GridFunction], S: SparseFamily, s_list: Sequence) -> float:
    """sum_Q |Q| prod_i (mean_Q |f_i|^s_i)^(1/s_i)."""
    if len(f_list) != len(s_list):
        raise ValueError("f_list and s_list must have the same length")
    if not f_list:
        raise ValueError("need at least one function")
    _same_grid(*f_list)
    _check_family(f_list[0], S)
    if len(S) == 0:
        return 0.0
    _, lengths = _member_arrays(S)
    total = lengths * f_list[0].grid.cell_width
    for f, s in zip(f_list, s_list):
        s = exponent(s)
        if is_inf(s) or s < 1:
            raise ValueError("each s_i must lie in [1, inf)")
        sf = float(s)
        total = total * _member_means(np.abs(f.values) ** sf, S) ** (1.0 / sf)
    return float(np.sum(total))


def cz_sparse_dominate(f: GridFunction, L: DyadicLattice):
    """Stopping intervals: roots, then maximal descendants with average > 2 x the ancestor's.

    Returns the family and the smallest C with M^d f <= C A_S f on every cell.
    """
    _check_family(f, SparseFamily(L, []))
    x = np.abs(f.values)
    if not np.any(x > 0):
        raise GridError("f must not vanish identically")
    means = L.level_reduce(x, "mean")
    members = []
    ref_above = None  # average of the nearest selected ancestor, per interval of the level above
    for j in range(len(L.levels) - 1, -1, -1):
        lv = L.levels[j]
        if ref_above is None:
            inherited = np.full(lv.count, np.nan)
        else:
            inherited = L.inherit(j, ref_above, np.nan)
        root = np.isnan(inherited)
        chosen = root | (means[j] > STOP_THRESHOLD * np.where(root, 0.0, inherited))
        members.extend((j, int(i)) for i in np.nonzero(chosen)[0])
        ref_above = np.where(chosen, means[j], inherited)
    S = SparseFamily(L, members, Fraction(1, 2))
    return S, _domination_constant(f, S)


def _domination_constant(f: GridFunction, S: SparseFamily) -> float:
    md = dyadic_maximal(f.with_values(np.abs(f.values), signed=False), S.lattice).values
    a = sparse_operator(f, S, 1).values
    pos = md > 0
    if np.any(pos & (a <= 0)):
        return math.inf
    return float(np.max(md[pos] / a[pos])) if np.any(pos) else 0.0


def cz_sparse_bruteforce(f: GridFunction, L: DyadicLattice):
    """Reference construction by explicit recursion over the tree, plus a brute-force M^d.

    Returns (family, cellwise M^d computed by scanning every lattice interval).
    """
    x = np.abs(f.values)
    if not np.any(x > 0):
        raise GridError("f must not vanish identically")

    def avg(j, i):
        a, b = L.interval(j, i)
        return float(x[a:b].mean())

    members = []

    def descend(j, i, ref):
        for c in L.children(j, i):
            if avg(j - 1, c) > STOP_THRESHOLD * ref:
                members.append((j - 1, c))
                descend(j - 1, c, avg(j - 1, c))
            else:
                descend(j - 1, c, ref)

    for j, i in L.roots():
        members.append((j, i))
        descend(j, i, avg(j, i))
    n = f.grid.n_cells
    md = np.zeros(n)
    for a, b in L.intervals:
        m = float(x[a:b].mean())
        md[a:b] = np.maximum(md[a:b], m)
    return SparseFamily(L, members, Fraction(1, 2)), md


def domination_report(f: GridFunction, L: DyadicLattice, *, brute_force: bool | None = None,
                      constant: float = STOP_THRESHOLD) -> VerificationReport:
    """Certificate, domination M^d f <= 2 A_S f and, for small grids, agreement with the reference."""
    S, C = cz_sparse_dominate(f, L)
    rep = VerificationReport("sparse_domination", environment={
        "n_cells": f.grid.n_cells, "shift": L.shift})
    cert = S.certificate()
    rep.add(CheckRecord.exact("eta certificate", cert["ok"], measured=cert["min_ratio"],
                              allowed=cert["eta"], witness=cert["at"]))
    rep.add(CheckRecord.inequality("M^d f <= 2 A_S f", C, constant))
    if brute_force is None:
        brute_force = f.grid.n_cells <= 64
    if brute_force:
        S_ref, md_ref = cz_sparse_bruteforce(f, L)
        rep.add(CheckRecord.exact("family matches reference", S_ref.members == S.members,
                                  measured=len(S), allowed=len(S_ref)))
        md = dyadic_maximal(f.with_values(np.abs(f.values), signed=False), L).values
        rep.add(CheckRecord.inequality("M^d matches brute force",
                                       float(np.max(np.abs(md - md_ref) / np.maximum(md_ref, 1e-300))),
                                       1e-12, tol=0.0))
    rep.data["family"] = S.to_dict()
    rep.data["constant"] = C
    return rep


# Marcinkiewicz-type function -----------------------------------------------


def _cube_list(cubes, grid: Grid) -> list[Interval]:
    out = []
    for c in cubes:
        I = Interval(int(c[0]), int(c[1]))
        if not 0 <= I.start < I.stop <= grid.n_cells:
            raise GridError(f"cube {tuple(I)} is empty or outside the grid")
        out.append(I)
    out.sort()
    for a, b in zip(out, out[1:]):
        if b.start < a.stop:
            raise GridError(f"cubes {tuple(a)} and {tuple(b)} overlap")
    return out


def marcinkiewicz_function(cubes, epsilon: float, grid: Grid) -> GridFunction:
    """sum_j l_j^(1+eps) / (|x - x_j|^(1+eps) + l_j^(1+eps)) at the cell midpoints.

    ``cubes`` are pairwise disjoint cell-index intervals [start, stop).
    """
    eps = float(epsilon)
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    cl = _cube_list(cubes, grid)
    h = grid.cell_width
    x = grid.midpoints()
    out = np.zeros(grid.n_cells)
    a = 1.0 + eps
    for I in cl:
        center = grid.x0 + 0.5 * (I.start + I.stop) * h
        ell = I.length * h
        # Divide through by ell^a to keep the terms in range.
        d = np.abs(x - center) / ell
        out += 1.0 / (d ** a + 1.0)
    return GridFunction(grid, out)


def marcinkiewicz_ratio(cubes, epsilon: float, w: GridFunction, *, exhaustive: bool | None = None) -> dict:
    """||M_eps||_{L^2(w)} / (upper[w]_A2 w(Omega)^(1/2)) for Omega the union of the cubes."""
    w.require_weight()
    cl = _cube_list(cubes, w.grid)
    m = marcinkiewicz_function(cl, epsilon, w.grid)
    est = estimate_characteristic(w, ClassSpec.A(2), exhaustive=exhaustive)
    mask = np.zeros(w.grid.n_cells, dtype=bool)
    for I in cl:
        mask[I.start:I.stop] = True
    w_omega = float(np.sum(w.values[mask])) * w.grid.cell_width
    norm = lp_norm(m, 2, w)
    return {"ratio": norm / (est.upper * math.sqrt(w_omega)), "norm": norm,
            "char_upper": est.upper, "char_lower": est.lower, "w_omega": w_omega,
            "n_cubes": len(cl)}
