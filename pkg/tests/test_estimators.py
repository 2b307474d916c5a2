import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from wexlab.estimators import CharacteristicEstimator, MaximalTransformer, RdfMajorant, SparseDominator

rng = np.random.default_rng(0)
X = rng.exponential(size=(4, 64)) + 0.05


def test_characteristic_brackets():
    est = CharacteristicEstimator(kind="A", p=2).fit(X)
    out = est.transform(np.ones((2, 64)))
    assert out.shape == (2, 2)
    assert np.allclose(out, 1.0)
    assert np.all(est.brackets_[:, 0] <= est.brackets_[:, 1])
    assert list(est.get_feature_names_out()) == ["lower_char", "upper_char"]
    with pytest.raises(ValueError):
        CharacteristicEstimator(kind="B").fit(X)


def test_not_fitted_and_width():
    for cls in (CharacteristicEstimator, MaximalTransformer, RdfMajorant, SparseDominator):
        with pytest.raises(NotFittedError):
            cls().transform(X)
    est = MaximalTransformer().fit(X)
    with pytest.raises(ValueError):
        est.transform(np.ones((1, 32)))
    with pytest.raises(ValueError):
        MaximalTransformer().fit(np.ones((2, 48)))


def test_maximal_and_rdf_pipeline():
    pipe = make_pipeline(MaximalTransformer(kind="dyadic"), RdfMajorant(p=2, k_max=5))
    out = pipe.fit_transform(X)
    assert out.shape == X.shape
    md = MaximalTransformer(kind="dyadic").fit_transform(X)
    assert np.all(md >= X * (1 - 1e-12))
    assert np.all(out >= md * (1 - 1e-12))


def test_clone_keeps_params():
    est = RdfMajorant(p=3, k_max=7)
    c = clone(est)
    assert c.get_params() == est.get_params()
    assert not hasattr(c, "weight_")


def test_sparse_dominator_constants():
    sd = SparseDominator(lattice=1)
    out = sd.fit_transform(X)
    assert out.shape == X.shape
    assert sd.constants_.shape == (4,)
    assert np.all(sd.constants_ <= 2 * (1 + 1e-12))
