"""Maximal operators on piecewise-constant grid functions.

All suprema run over cell-aligned intervals of the domain.  The uncentered
and weighted operators have two implementations: ``method="oracle"`` scans
every window and is the reference, ``method="fast"`` uses the hull
recursion in :mod:`wexlab._kernels` and agrees with the oracle to rounding.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import _kernels
from .exponents import exponent, is_inf
from .grid import DyadicLattice, GridError, GridFunction, _same_grid

__all__ = [
    "dyadic_maximal", "uncentered_maximal", "maximal_r", "weighted_maximal",
    "multilinear_maximal", "sharp_maximal", "vector_maximal", "METHODS",
]

METHODS = ("oracle", "fast")


def _nonneg(f: GridFunction, name="f") -> np.ndarray:
    if f.signed and np.any(f.values < 0):
        raise GridError(f"{name} must be nonnegative")
    return np.ascontiguousarray(f.values, dtype=np.float64)


def _check_method(method):
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")


def dyadic_maximal(f: GridFunction, lattice: DyadicLattice) -> GridFunction:
    """Largest lattice average over the intervals containing each cell.

    One coarse-to-fine pass: each interval keeps the running maximum of its
    own average and its parent's running value.
    """
    if lattice.grid != f.grid:
        raise GridError("lattice and function live on different grids")
    x = _nonneg(f)
    means = lattice.level_reduce(x, "mean")
    run = None
    for j in range(len(lattice.levels) - 1, -1, -1):
        own = means[j]
        if run is None:
            cur = own
        else:
            inherited = lattice.inherit(j, run, -np.inf)
            cur = np.maximum(own, inherited)
        run = cur
    return f.with_values(run, signed=False)


def _uniform_points(n: int):
    xh = np.arange(n + 1, dtype=np.float64)
    return xh, np.zeros(n + 1)


def uncentered_maximal(f: GridFunction, method: str = "oracle") -> GridFunction:
    _check_method(method)
    x = _nonneg(f)
    if method == "oracle":
        out = _kernels.scan_max_product(x[None, :], np.ones_like(x))
    else:
        xh, xl = _uniform_points(x.size)
        yh, yl = _kernels.dd_prefix(x)
        out = _kernels.hull_max_slope(xh, xl, yh, yl)
    return f.with_values(out, signed=False)


def maximal_r(f: GridFunction, r, method: str = "oracle") -> GridFunction:
    """(M |f|^r)^(1/r)."""
    r = exponent(r)
    if is_inf(r):
        raise ValueError("r must be finite")
    rf = float(r)
    powered = f.with_values(np.abs(f.values) ** rf, signed=False)
    m = uncentered_maximal(powered, method=method).values
    return f.with_values(m ** (1.0 / rf), signed=False)


def weighted_maximal(f: GridFunction, w: GridFunction, method: str = "oracle") -> GridFunction:
    """Largest w-weighted average of f over the intervals containing each cell."""
    _check_method(method)
    _same_grid(f, w)
    w.require_weight()
    x = _nonneg(f)
    wv = np.ascontiguousarray(w.values)
    if method == "oracle":
        out = _kernels.scan_max_product((x * wv)[None, :], wv)
    else:
        xh, xl = _kernels.dd_prefix(wv)
        yh, yl = _kernels.dd_prefix(x * wv)
        out = _kernels.hull_max_slope(xh, xl, yh, yl)
    return f.with_values(out, signed=False)


def multilinear_maximal(fs: Sequence[GridFunction]) -> GridFunction:
    """Largest product of averages over the intervals containing each cell."""
    fs = list(fs)
    if not fs:
        raise ValueError("need at least one function")
    _same_grid(*fs)
    nums = np.stack([_nonneg(f, f"f_{i}") for i, f in enumerate(fs)])
    out = _kernels.scan_max_product(nums, np.ones(nums.shape[1]))
    return fs[0].with_values(out, signed=False)


def sharp_maximal(f: GridFunction) -> GridFunction:
    """Largest mean oscillation over the intervals containing each cell; f may be signed."""
    x = np.ascontiguousarray(f.values, dtype=np.float64)
    out = np.maximum(_kernels.scan_max_oscillation(x), 0.0)
    return f.with_values(out, signed=False)


def vector_maximal(fs: Sequence[GridFunction], r, method: str = "fast") -> GridFunction:
    """(sum_k (M f_k)^r)^(1/r), the l^r-valued extension of M."""
    r = exponent(r)
    fs = list(fs)
    if not fs:
        raise ValueError("need at least one function")
    _same_grid(*fs)
    ms = np.stack([uncentered_maximal(f, method=method).values for f in fs])
    if is_inf(r):
        return fs[0].with_values(ms.max(axis=0), signed=False)
    rf = float(r)
    return fs[0].with_values((ms ** rf).sum(axis=0) ** (1.0 / rf), signed=False)
