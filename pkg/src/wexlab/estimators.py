"""scikit-learn style wrappers over the functional API.

Rows of ``X`` are grid functions sampled on a common grid (one value per
cell).  The wrappers hold no state beyond what ``fit`` records, so they
compose with ``sklearn.pipeline`` and ``clone``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .extrapolation import DEFAULT_K_MAX, rdf_iterate
from .grid import Grid, GridFunction, build_lattices
from .maximal import dyadic_maximal, uncentered_maximal
from .sparse import cz_sparse_dominate, sparse_operator
from .weights import ClassSpec, estimate_characteristic

__all__ = ["CharacteristicEstimator", "MaximalTransformer", "RdfMajorant", "SparseDominator"]


def _rows(X, *, positive=False):
    X = check_array(X, dtype=np.float64, ensure_min_features=2)
    if X.shape[1] & (X.shape[1] - 1):
        raise ValueError(f"row length must be a power of two, got {X.shape[1]}")
    if positive and np.any(X <= 0):
        raise ValueError("weights must be strictly positive")
    if not positive and np.any(X < 0):
        raise ValueError("inputs must be nonnegative")
    return X


class _GridMixin:
    def _grid(self, n):
        x0, x1 = self.domain
        return Grid(x0, x1, n)

    def _check_width(self, X):
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} cells, got {X.shape[1]}")


class CharacteristicEstimator(_GridMixin, TransformerMixin, BaseEstimator):
    """Map each weight row to its (lower, upper) characteristic bracket.

    kind is "A" (uses p) or "RH" (uses s).  ``fit`` records the bracket of
    the training rows in ``brackets_``.
    """

    def __init__(self, kind="A", p=2, s=2, exhaustive=None, domain=(0.0, 1.0)):
        self.kind = kind
        self.p = p
        self.s = s
        self.exhaustive = exhaustive
        self.domain = domain

    def _spec(self):
        if self.kind == "A":
            return ClassSpec.A(self.p)
        if self.kind == "RH":
            return ClassSpec.RH(self.s)
        raise ValueError(f"kind must be 'A' or 'RH', got {self.kind!r}")

    def _bracket(self, X):
        grid = self._grid(X.shape[1])
        spec = self._spec()
        out = np.empty((X.shape[0], 2))
        for i, row in enumerate(X):
            est = estimate_characteristic(GridFunction(grid, row), spec, exhaustive=self.exhaustive)
            out[i] = est.lower, est.upper
        return out

    def fit(self, X, y=None):
        X = _rows(X, positive=True)
        self.n_features_in_ = X.shape[1]
        self.brackets_ = self._bracket(X)
        return self

    def transform(self, X):
        check_is_fitted(self, "brackets_")
        X = _rows(X, positive=True)
        self._check_width(X)
        return self._bracket(X)

    def get_feature_names_out(self, input_features=None):
        return np.array(["lower_char", "upper_char"], dtype=object)


class MaximalTransformer(_GridMixin, TransformerMixin, BaseEstimator):
    """Rows f to rows Mf; ``kind`` is "uncentered" or "dyadic"."""

    def __init__(self, kind="uncentered", method="fast", domain=(0.0, 1.0)):
        self.kind = kind
        self.method = method
        self.domain = domain

    def fit(self, X, y=None):
        X = _rows(X)
        if self.kind not in ("uncentered", "dyadic"):
            raise ValueError(f"kind must be 'uncentered' or 'dyadic', got {self.kind!r}")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = _rows(X)
        self._check_width(X)
        grid = self._grid(X.shape[1])
        if self.kind == "dyadic":
            lat = build_lattices(grid)[0]
            return np.stack([dyadic_maximal(GridFunction(grid, r), lat).values for r in X])
        return np.stack([uncentered_maximal(GridFunction(grid, r), method=self.method).values for r in X])


class RdfMajorant(_GridMixin, TransformerMixin, BaseEstimator):
    """Rows h to the Rubio de Francia majorant Rh on L^p(w).

    ``fit`` takes the weight from ``weight`` (constant 1 when None) and
    records its upper A_p estimate so repeated transforms reuse it.
    """

    def __init__(self, p=2, weight=None, k_max=DEFAULT_K_MAX, method="fast", domain=(0.0, 1.0)):
        self.p = p
        self.weight = weight
        self.k_max = k_max
        self.method = method
        self.domain = domain

    def fit(self, X, y=None):
        X = _rows(X)
        self.n_features_in_ = X.shape[1]
        grid = self._grid(X.shape[1])
        w = np.ones(X.shape[1]) if self.weight is None else np.asarray(self.weight, dtype=np.float64)
        self.weight_ = GridFunction(grid, w).require_weight()
        self.char_upper_ = estimate_characteristic(self.weight_, ClassSpec.A(self.p)).upper
        return self

    def transform(self, X):
        check_is_fitted(self, "weight_")
        X = _rows(X)
        self._check_width(X)
        grid = self.weight_.grid
        return np.stack([rdf_iterate(GridFunction(grid, r), self.p, self.weight_, self.k_max,
                                     method=self.method, char_upper=self.char_upper_).function.values
                         for r in X])


class SparseDominator(_GridMixin, TransformerMixin, BaseEstimator):
    """Rows f to A_S^r f with S the stopping family built from f itself.

    The domination constants of the transformed rows are kept in
    ``constants_`` after each transform.
    """

    def __init__(self, lattice=0, r=1, domain=(0.0, 1.0)):
        self.lattice = lattice
        self.r = r
        self.domain = domain

    def fit(self, X, y=None):
        X = _rows(X)
        if self.lattice not in (0, 1, 2):
            raise ValueError("lattice must be 0 (unshifted), 1 or 2")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = _rows(X)
        self._check_width(X)
        grid = self._grid(X.shape[1])
        L = build_lattices(grid)[self.lattice]
        out, consts = [], []
        for r in X:
            f = GridFunction(grid, r)
            S, C = cz_sparse_dominate(f, L)
            out.append(sparse_operator(f, S, self.r).values)
            consts.append(C)
        self.constants_ = np.array(consts)
        return np.stack(out)
