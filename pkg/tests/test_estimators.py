import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from logdecay_lab.estimators import BandEstimator, LogDecayEstimator, ResolventGrowthEstimator, default_initial_state

from conftest import make_gen1d


@pytest.fixture(scope="module")
def gen():
    return make_gen1d(40)


@pytest.mark.parametrize("cls", [BandEstimator, ResolventGrowthEstimator, LogDecayEstimator])
def test_params_and_clone(cls):
    est = cls()
    params = est.get_params()
    c = clone(est)
    assert c.get_params() == params and c is not est
    key = next(iter(params))
    assert cls().set_params(**{key: params[key]}).get_params() == params


def test_not_fitted():
    with pytest.raises(NotFittedError):
        BandEstimator().score()
    with pytest.raises(NotFittedError):
        ResolventGrowthEstimator().predict(1.0)
    with pytest.raises(NotFittedError):
        LogDecayEstimator().predict(1.0)


def test_rejects_non_generator():
    with pytest.raises(TypeError):
        BandEstimator().fit(np.eye(3))


def test_band_estimator(gen):
    est = BandEstimator().fit(gen)
    assert est.C_band_ > 0 and est.score() == est.margin_ >= 0
    assert len(est.eigenvalues_) == 2 * gen.N


def test_resolvent_estimator(gen):
    est = ResolventGrowthEstimator(steps=5).fit(gen)
    taus = np.array([s.tau for s in est.samples_])
    norms = np.array([s.norm for s in est.samples_])
    assert np.all(norms <= est.predict(taus) * (1 + 1e-12))


def test_decay_estimator(gen):
    est = LogDecayEstimator(T=5.0).fit(gen)
    t = est.trace_.times
    assert np.all(est.trace_.h_norm <= est.predict(t) * (1 + 1e-12))
    assert est.predict(est.argmax_t_) == pytest.approx(
        est.trace_.h_norm[np.argmin(abs(t - est.argmax_t_))], rel=1e-12)


def test_default_initial_state(gen):
    x0 = default_initial_state(gen)
    assert x0.u0[0] == pytest.approx(1.0) and not x0.u1.any()
