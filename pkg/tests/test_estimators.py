import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from fragilis.estimators import FragilityTransformer, LinearSystemEstimator
from fragilis.sim import NoiseSpec, SystemSpec, gen_system, simulate


@pytest.fixture
def recording():
    A = gen_system(SystemSpec(3, 0.9, 0))
    X = simulate(A, np.ones(3), 1000, NoiseSpec("process", 1.0, 1))
    return A, X.T  # sklearn layout: timepoints x channels


def test_linear_system_estimator(recording):
    A, X = recording
    est = LinearSystemEstimator().fit(X)
    assert est.A_.shape == (3, 3)
    assert est.n_features_in_ == 3
    assert np.linalg.norm(est.A_ - A, 2) < 0.15
    assert est.predict(X[:5]).shape == (5, 3)
    assert 0 < est.score(X) <= 1


def test_linear_system_estimator_not_fitted():
    with pytest.raises(NotFittedError):
        LinearSystemEstimator().predict(np.ones((3, 2)))


def test_get_set_params_and_clone():
    tr = FragilityTransformer(window_len=100, step=50, targets=[1.0])
    params = tr.get_params()
    assert params["window_len"] == 100 and params["targets"] == [1.0]
    tr2 = clone(tr).set_params(structure="column")
    assert tr2.structure == "column" and tr.structure == "row"
    assert LinearSystemEstimator(ridge=0.1).get_params() == {"ridge": 0.1}


def test_transformer_shape_and_normalize(recording):
    _, X = recording
    tr = FragilityTransformer(window_len=250, step=125)
    values = tr.fit_transform(X)
    assert values.shape == (7, 3)
    norm = FragilityTransformer(normalize=True).fit(X).transform(X)
    assert norm.min() >= 0 and norm.max() <= 1
    hm = tr.compute_heatmap(X, rate=1000.0, channel_labels=["a", "b", "c"])
    np.testing.assert_allclose(hm.window_times, np.arange(7) * 0.125)
    np.testing.assert_array_equal(hm.values, values)


def test_transformer_channel_mismatch(recording):
    _, X = recording
    tr = FragilityTransformer().fit(X)
    with pytest.raises(ValueError):
        tr.transform(X[:, :2])


def test_in_pipeline(recording):
    _, X = recording
    pipe = make_pipeline(StandardScaler(), FragilityTransformer(window_len=200, step=200))
    assert pipe.fit_transform(X).shape == (5, 3)
