import numpy as np
import pytest
from sklearn.base import clone

from frihls.errors import CoverageError, DomainError
from frihls.regression import NadarayaWatson, reference_bandwidth


@pytest.fixture
def data(rng):
    X = rng.uniform(-3, 3, size=20_000)
    y = np.sin(X) + 0.1 * rng.normal(size=X.size)
    return X, y


def test_recovers_smooth_regression(data):
    X, y = data
    model = NadarayaWatson(bandwidth=0.05).fit(X, y)
    xq = np.array([-1.0, 0.0, 0.5, 2.0])
    est, se, neff = model.predict_with_error(xq)
    assert np.all(np.abs(est - np.sin(xq)) < 4 * se + 2e-3)
    assert np.all(neff > 100)


def test_constant_response_is_exact(data):
    X, _ = data
    model = NadarayaWatson(bandwidth=0.2).fit(X, np.full(X.size, 3.5), sample_weight=np.full(X.size, 0.7))
    assert np.allclose(model.predict([0.0, 1.0]), 3.5, rtol=1e-14)


def test_weights_matter(data):
    X, y = data
    w = np.where(X > 0, 1.0, 0.0)
    w[w == 0] = 1e-12
    model = NadarayaWatson(bandwidth=1.0, min_effective=1.0).fit(X, (X > 0).astype(float), sample_weight=w)
    assert model.predict([0.0])[0] > 0.99


def test_reference_bandwidth_rule():
    X = np.linspace(-1, 1, 1001)
    assert reference_bandwidth(X) == pytest.approx(1.06 * np.std(X) * 1001 ** -0.2, rel=1e-12)


def test_default_bandwidth_selected_at_fit(data):
    X, y = data
    assert NadarayaWatson().fit(X, y).bandwidth_ == pytest.approx(reference_bandwidth(X))


def test_too_few_records():
    with pytest.raises(CoverageError):
        NadarayaWatson().fit(np.zeros(10), np.zeros(10))


def test_starved_prediction_point(data):
    X, y = data
    model = NadarayaWatson(bandwidth=0.05).fit(X, y)
    with pytest.raises(CoverageError) as info:
        model.predict([0.0, 10.0])
    assert info.value.starved_points == [(10.0,)]


def test_input_validation(data):
    X, y = data
    with pytest.raises(DomainError):
        NadarayaWatson().fit(X, y[:-1])
    with pytest.raises(DomainError):
        NadarayaWatson().fit(X, y, sample_weight=-np.ones(X.size))
    with pytest.raises(DomainError):
        NadarayaWatson(bandwidth=0.0).fit(X, y)


def test_sklearn_protocol(data):
    X, y = data
    model = NadarayaWatson(bandwidth=0.1, chunk=4)
    assert clone(model).get_params() == model.get_params()
    model.fit(X, y)
    assert model.score(X[:50, None], np.sin(X[:50])) > 0.99
