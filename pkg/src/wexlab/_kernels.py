"""Compiled scans over all cell-aligned windows.

Two ways to get, for every cell, the largest ratio of window sums over the
windows containing it:

* ``scan_max_product`` walks every window (O(m N^2)) with plain running
  sums.  It is the reference.
* ``hull_max_slope`` treats a window ratio as the slope between two points
  of the cumulative graph and splits the index range recursively, answering
  each half by tangent queries on a convex hull (O(N log^2 N)).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def dd_prefix(x):
    """Prefix sums as unevaluated hi + lo pairs (error-free TwoSum steps)."""
    n = x.size
    hi = np.zeros(n + 1)
    lo = np.zeros(n + 1)
    s = 0.0
    c = 0.0
    for i in range(n):
        v = x[i]
        t = s + v
        bp = t - s
        err = (s - (t - bp)) + (v - bp)
        s = t
        c += err
        hi[i + 1] = s
        lo[i + 1] = c
    return hi, lo


@njit(cache=True, nogil=True)
def scan_max_product(nums, den):
    """max over windows containing each cell of prod_k sum(nums[k]) / sum(den)."""
    m, n = nums.shape
    out = np.zeros(n)
    ratio = np.empty(n)
    sums = np.empty(m)
    for i in range(n):
        for k in range(m):
            sums[k] = 0.0
        d = 0.0
        for j in range(i, n):
            d += den[j]
            val = 1.0
            for k in range(m):
                sums[k] += nums[k, j]
                val *= sums[k] / d
            ratio[j] = val
        best = -np.inf
        for j in range(n - 1, i - 1, -1):
            if ratio[j] > best:
                best = ratio[j]
            if best > out[j]:
                out[j] = best
    return out


@njit(cache=True, nogil=True, inline="always")
def _diff(h, l, i, j):
    return (h[j] - h[i]) + (l[j] - l[i])


@njit(cache=True, nogil=True, inline="always")
def _slope(xh, xl, yh, yl, a, b):
    return _diff(yh, yl, a, b) / _diff(xh, xl, a, b)


@njit(cache=True, nogil=True, inline="always")
def _cross(xh, xl, yh, yl, o, a, b):
    return (_diff(xh, xl, o, a) * _diff(yh, yl, o, b)
            - _diff(yh, yl, o, a) * _diff(xh, xl, o, b))


@njit(cache=True, nogil=True)
def hull_max_slope(xh, xl, yh, yl):
    """For each cell c, max over a <= c < b of slope between points a and b.

    Points are (x_k, y_k) for k = 0..n with x strictly increasing; n must be
    a power of two.
    """
    n = xh.size - 1
    out = np.empty(n)
    for c in range(n):
        out[c] = _slope(xh, xl, yh, yl, c, c + 1)
    hull = np.empty(n + 1, dtype=np.int64)
    best = np.empty(n + 1)
    h = 1
    while 2 * h <= n:
        for lo in range(0, n, 2 * h):
            mid = lo + h
            hi = lo + 2 * h
            # Upper hull of the right points mid+1..hi.
            m = 0
            for b in range(mid + 1, hi + 1):
                while m >= 2 and _cross(xh, xl, yh, yl, hull[m - 2], hull[m - 1], b) >= 0.0:
                    m -= 1
                hull[m] = b
                m += 1
            for a in range(lo, mid):
                l, r = 0, m - 1
                while l < r:
                    k = (l + r) // 2
                    if _slope(xh, xl, yh, yl, a, hull[k]) <= _slope(xh, xl, yh, yl, a, hull[k + 1]):
                        l = k + 1
                    else:
                        r = k
                best[a] = _slope(xh, xl, yh, yl, a, hull[l])
            run = -np.inf
            for c in range(lo, mid):
                if best[c] > run:
                    run = best[c]
                if run > out[c]:
                    out[c] = run
            # Lower hull of the left points lo..mid-1.
            m = 0
            for a in range(lo, mid):
                while m >= 2 and _cross(xh, xl, yh, yl, hull[m - 2], hull[m - 1], a) <= 0.0:
                    m -= 1
                hull[m] = a
                m += 1
            for b in range(mid + 1, hi + 1):
                l, r = 0, m - 1
                while l < r:
                    k = (l + r) // 2
                    if _slope(xh, xl, yh, yl, hull[k], b) <= _slope(xh, xl, yh, yl, hull[k + 1], b):
                        l = k + 1
                    else:
                        r = k
                best[b] = _slope(xh, xl, yh, yl, hull[l], b)
            run = -np.inf
            for c in range(hi - 1, mid - 1, -1):
                if best[c + 1] > run:
                    run = best[c + 1]
                if run > out[c]:
                    out[c] = run
        h *= 2
    return out


@njit(cache=True, nogil=True)
def scan_max_oscillation(x):
    """max over windows containing each cell of the mean of |x - mean|.

    Per left end, windows grow one cell at a time; a Fenwick tree over the
    value ranks gives the mass above and below the running mean.
    """
    n = x.size
    order = np.argsort(x, kind="mergesort")
    sorted_vals = x[order]
    rank = np.empty(n, dtype=np.int64)
    for k in range(n):
        rank[order[k]] = k
    cnt = np.zeros(n + 1)
    tot = np.zeros(n + 1)
    out = np.zeros(n)
    osc = np.empty(n)
    for i in range(n):
        for k in range(n + 1):
            cnt[k] = 0.0
            tot[k] = 0.0
        s = 0.0
        for j in range(i, n):
            v = x[j]
            s += v
            k = rank[j] + 1
            while k <= n:
                cnt[k] += 1.0
                tot[k] += v
                k += k & (-k)
            length = j - i + 1
            mean = s / length
            # number of sorted values <= mean
            lo_, hi_ = 0, n
            while lo_ < hi_:
                md = (lo_ + hi_) // 2
                if sorted_vals[md] <= mean:
                    lo_ = md + 1
                else:
                    hi_ = md
            k = lo_
            c_below = 0.0
            s_below = 0.0
            while k > 0:
                c_below += cnt[k]
                s_below += tot[k]
                k -= k & (-k)
            dev = (mean * c_below - s_below) + ((s - s_below) - mean * (length - c_below))
            osc[j] = dev / length
        run = -np.inf
        for j in range(n - 1, i - 1, -1):
            if osc[j] > run:
                run = osc[j]
            if run > out[j]:
                out[j] = run
    return out
