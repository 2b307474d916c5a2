"""Uniform 1D grids, piecewise-constant functions and dyadic lattices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .exponents import exponent, is_inf

__all__ = [
    "Grid", "GridFunction", "Interval", "DyadicLattice", "Level", "GridError",
    "average", "lp_norm", "power_weight", "build_lattices", "read_grid_function",
    "write_grid_function", "as_values", "SHIFTS",
]

SHIFTS = (Fraction(0), Fraction(1, 3), Fraction(-1, 3))


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    x0: float
    x1: float
    n_cells: int

    def __post_init__(self):
        n = int(self.n_cells)
        if n != self.n_cells or n < 1 or n & (n - 1):
            raise GridError(f"n_cells must be a power of two, got {self.n_cells}")
        x0, x1 = float(self.x0), float(self.x1)
        if not (math.isfinite(x0) and math.isfinite(x1) and x0 < x1):
            raise GridError(f"need finite x0 < x1, got ({self.x0}, {self.x1})")
        object.__setattr__(self, "n_cells", n)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "x1", x1)

    @property
    def cell_width(self) -> float:
        return (self.x1 - self.x0) / self.n_cells

    @property
    def depth(self) -> int:
        return self.n_cells.bit_length() - 1

    def midpoints(self) -> np.ndarray:
        return self.x0 + (np.arange(self.n_cells) + 0.5) * self.cell_width

    def edges(self) -> np.ndarray:
        return self.x0 + np.arange(self.n_cells + 1) * self.cell_width

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.x0, self.x1, self.n_cells * factor)


class Interval(NamedTuple):
    """Half-open range of cell indices [start, stop)."""

    start: int
    stop: int

    @property
    def length(self) -> int:
        return self.stop - self.start

    def coords(self, grid: Grid) -> tuple[float, float]:
        return (grid.x0 + self.start * grid.cell_width, grid.x0 + self.stop * grid.cell_width)

    def contains(self, other: "Interval") -> bool:
        return self.start <= other.start and other.stop <= self.stop


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Piecewise-constant function: one float64 value per cell.

    Values must be nonnegative unless ``signed`` is set.
    """

    grid: Grid
    values: np.ndarray
    signed: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if vals.size != self.grid.n_cells:
            raise GridError(f"expected {self.grid.n_cells} values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise GridError("values must be finite")
        if not self.signed and np.any(vals < 0):
            raise GridError("values must be nonnegative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid: Grid, c: float = 1.0) -> "GridFunction":
        return cls(grid, np.full(grid.n_cells, float(c)))

    @classmethod
    def from_callable(cls, grid: Grid, fn, *, signed: bool = False) -> "GridFunction":
        return cls(grid, fn(grid.midpoints()), signed=signed)

    @classmethod
    def indicator(cls, grid: Grid, a: float, b: float) -> "GridFunction":
        """Indicator of the cells whose midpoints lie in [a, b]."""
        m = grid.midpoints()
        return cls(grid, ((m >= a) & (m <= b)).astype(float))

    @property
    def is_weight(self) -> bool:
        return bool(np.all(self.values > 0))

    def require_weight(self, name: str = "weight") -> "GridFunction":
        if self.signed or not self.is_weight:
            raise GridError(f"{name} must be strictly positive on every cell")
        return self

    def with_values(self, values, *, signed: bool | None = None) -> "GridFunction":
        return GridFunction(self.grid, values, self.signed if signed is None else signed)

    def power(self, a) -> "GridFunction":
        """Cellwise values**a (a may be negative for weights)."""
        return GridFunction(self.grid, self.values ** float(a))

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            return GridFunction(self.grid, self.values * other.values, self.signed or other.signed)
        return GridFunction(self.grid, self.values * float(other), self.signed or float(other) < 0)

    __rmul__ = __mul__

    def __len__(self):
        return self.grid.n_cells

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def _same_grid(*funcs: GridFunction):
    g = funcs[0].grid
    for f in funcs[1:]:
        if f.grid != g:
            raise GridError("functions live on different grids")


def as_values(f, grid: Grid | None = None) -> np.ndarray:
    if isinstance(f, GridFunction):
        if grid is not None and f.grid != grid:
            raise GridError("function lives on a different grid")
        return f.values
    arr = np.asarray(f, dtype=np.float64).reshape(-1)
    if grid is not None and arr.size != grid.n_cells:
        raise GridError(f"expected {grid.n_cells} values, got {arr.size}")
    return arr


def _interval(I, grid: Grid) -> Interval:
    I = Interval(int(I[0]), int(I[1]))
    if not 0 <= I.start < I.stop <= grid.n_cells:
        raise GridError(f"interval {tuple(I)} is empty or outside the grid")
    return I


def average(f: GridFunction, I) -> float:
    I = _interval(I, f.grid)
    return float(np.mean(f.values[I.start:I.stop]))


def lp_norm(f: GridFunction, p, w: GridFunction | None = None) -> float:
    """(sum |f|^p w dx)^(1/p); ``w`` is the measure density (default 1)."""
    p = exponent(p)
    vals = np.abs(f.values)
    if w is not None:
        _same_grid(f, w)
        w.require_weight()
    if is_inf(p):
        return float(vals.max())
    pf = float(p)
    dens = np.ones_like(vals) if w is None else w.values
    # Factor out the max so large exponents do not overflow.
    top = vals.max()
    if top == 0:
        return 0.0
    s = float(np.sum((vals / top) ** pf * dens)) * f.grid.cell_width
    return float(top * s ** (1.0 / pf))


def power_weight(grid: Grid, a: float) -> GridFunction:
    """|x|^a sampled at cell midpoints."""
    m = np.abs(grid.midpoints())
    if float(a) < 0 and np.any(m == 0):
        raise GridError("a midpoint sits at the origin")
    return GridFunction(grid, m ** float(a))


# Lattices -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Level:
    """One generation of a lattice: equal-length intervals with contiguous starts."""

    length: int
    starts: np.ndarray
    parent: np.ndarray  # index into the next coarser level, -1 if absent

    @property
    def count(self) -> int:
        return int(self.starts.size)

    @property
    def first(self) -> int:
        return int(self.starts[0]) if self.starts.size else 0

    def block(self, values: np.ndarray) -> np.ndarray:
        """Values reshaped to (count, length), one row per interval."""
        a = self.first
        return values[..., a:a + self.count * self.length].reshape(
            values.shape[:-1] + (self.count, self.length))


@dataclass(frozen=True, eq=False)
class DyadicLattice:
    """Dyadic intervals over a grid, possibly shifted by a third of their length.

    Shifted generations keep only intervals lying fully inside the grid, so
    a shifted lattice is a forest rather than a single tree.
    ``levels[0]`` holds the single cells and ``levels[-1]`` the coarsest
    generation.
    """

    grid: Grid
    shift: Fraction
    levels: tuple = field(repr=False)

    def __len__(self):
        return sum(lv.count for lv in self.levels)

    @property
    def intervals(self) -> np.ndarray:
        """(K, 2) array of [start, stop) pairs, coarsest generation first."""
        rows = [np.stack([lv.starts, lv.starts + lv.length], axis=1) for lv in reversed(self.levels)]
        return np.concatenate(rows, axis=0) if rows else np.zeros((0, 2), dtype=np.int64)

    def level_reduce(self, values: np.ndarray, how: str = "mean") -> list[np.ndarray]:
        """Per-level interval means, maxima or minima of ``values``."""
        values = np.asarray(values, dtype=np.float64)
        out = []
        for lv in self.levels:
            blk = lv.block(values)
            if how == "mean":
                out.append(blk.mean(axis=-1))
            elif how == "max":
                out.append(blk.max(axis=-1))
            elif how == "min":
                out.append(blk.min(axis=-1))
            else:
                raise ValueError(how)
        return out

    def flatten(self, per_level: Sequence[np.ndarray]) -> np.ndarray:
        """Concatenate per-level arrays in the order of :attr:`intervals`."""
        return np.concatenate([np.asarray(a) for a in reversed(per_level)], axis=-1)

    def roots(self) -> list[tuple[int, int]]:
        """(level, index) of every interval without a parent."""
        out = []
        for j, lv in enumerate(self.levels):
            for i in np.nonzero(lv.parent < 0)[0]:
                out.append((j, int(i)))
        return out

    def children(self, level: int, index: int) -> list[int]:
        if level == 0:
            return []
        child = self.levels[level - 1]
        return [int(i) for i in np.nonzero(child.parent == index)[0]]

    def inherit(self, level: int, parent_values: np.ndarray, fill) -> np.ndarray:
        """Per-interval value of the parent at ``level``; ``fill`` where there is none."""
        lv = self.levels[level]
        out = np.full(lv.count, fill, dtype=np.result_type(parent_values, np.asarray(fill)))
        has = lv.parent >= 0
        out[has] = parent_values[lv.parent[has]]
        return out

    def interval(self, level: int, index: int) -> Interval:
        lv = self.levels[level]
        a = int(lv.starts[index])
        return Interval(a, a + lv.length)


def _lattice_offsets(depth: int, sign: int) -> list[int]:
    # Integer offsets of generation j, nested (each step is a multiple of the
    # child length) and within one cell-length-unit of sign*(-1)^j*2^j/3.
    offs = [0]
    for j in range(1, depth + 1):
        offs.append(offs[-1] + sign * (-1) ** j * 2 ** (j - 1))
    return offs


def _build_lattice(grid: Grid, shift: Fraction) -> DyadicLattice:
    n, depth = grid.n_cells, grid.depth
    sign = 0 if shift == 0 else (1 if shift > 0 else -1)
    offs = _lattice_offsets(depth, sign)
    raw = []
    for j in range(depth + 1):
        L = 1 << j
        first = offs[j] % L
        starts = np.arange(first, n - L + 1, L, dtype=np.int64)
        raw.append((L, starts))
    levels = []
    for j, (L, starts) in enumerate(raw):
        if j == depth:
            parent = np.full(starts.size, -1, dtype=np.int64)
        else:
            pL, pstarts = raw[j + 1]
            if pstarts.size:
                idx = (starts - pstarts[0]) // pL
                # Offsets are nested, so in-range index means containment.
                ok = (idx >= 0) & (idx < pstarts.size)
                parent = np.where(ok, idx, -1)
            else:
                parent = np.full(starts.size, -1, dtype=np.int64)
        levels.append(Level(L, starts, parent.astype(np.int64)))
    return DyadicLattice(grid, shift, tuple(levels))


def build_lattices(grid: Grid) -> tuple[DyadicLattice, DyadicLattice, DyadicLattice]:
    """The unshifted lattice followed by the +1/3 and -1/3 shifted lattices."""
    if not isinstance(grid, Grid):
        raise GridError("expected a Grid")
    return tuple(_build_lattice(grid, s) for s in SHIFTS)


# Text format -------------------------------------------------------------


def write_grid_function(f: GridFunction, path) -> None:
    g = f.grid
    lines = [f"{g.n_cells} {g.x0!r} {g.x1!r}"] + [repr(float(v)) for v in f.values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid_function(path, *, signed: bool = False) -> GridFunction:
    text = Path(path).read_text().split("\n")
    rows = [ln.strip() for ln in text if ln.strip()]
    if not rows:
        raise GridError("empty grid function file")
    head = rows[0].split()
    if len(head) != 3:
        raise GridError("header must read 'n_cells x0 x1'")
    grid = Grid(float(head[1]), float(head[2]), int(head[0]))
    vals = np.array([float(r) for r in rows[1:]], dtype=np.float64)
    if vals.size != grid.n_cells:
        raise GridError(f"header announces {grid.n_cells} values, file has {vals.size}")
    if not signed and np.any(vals < 0):
        raise GridError("negative value in grid function file")
    return GridFunction(grid, vals, signed=signed)
