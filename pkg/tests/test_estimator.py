import numpy as np
import pytest
from sklearn.base import clone

from maxscore import MaximumScoreEstimator
from maxscore.arrays import MultiIndexGrid, materialize
from maxscore.dgp import DgpSpec
from maxscore.score import argmax_sweep_2d


@pytest.fixture(scope="module")
def sim():
    spec = DgpSpec(variant="add-shock")
    return spec, materialize(spec, MultiIndexGrid((15, 15)), seed=4)


class TestSklearnApi:
    def test_fit_matches_core_optimizer(self, sim):
        spec, data = sim
        clf = MaximumScoreEstimator().fit(data.x, data.y)
        core = argmax_sweep_2d(data)
        assert np.array_equal(clf.beta_hat_, core.beta_hat)
        assert clf.objective_ == core.objective

    def test_predict_signs(self, sim):
        _, data = sim
        clf = MaximumScoreEstimator().fit(data.x, data.y)
        pred = clf.predict(data.x)
        assert set(np.unique(pred)) <= {-1, 1}
        assert np.array_equal(pred, np.where(data.x @ clf.beta_hat_ >= 0, 1, -1))

    def test_zero_one_labels(self, sim):
        _, data = sim
        y01 = (data.y > 0).astype(int)
        a = MaximumScoreEstimator().fit(data.x, y01)
        b = MaximumScoreEstimator().fit(data.x, data.y)
        assert np.array_equal(a.beta_hat_, b.beta_hat_)

    def test_rejects_other_labels(self, sim):
        _, data = sim
        with pytest.raises(ValueError):
            MaximumScoreEstimator().fit(data.x, np.full(data.n_records, 2))

    def test_get_set_params_clone(self):
        clf = MaximumScoreEstimator(method="enumerate")
        assert clf.get_params()["method"] == "enumerate"
        assert clone(clf).get_params() == clf.get_params()

    def test_enumerate_method(self, sim):
        _, data = sim
        clf = MaximumScoreEstimator(method="enumerate").fit(data.x[:40], data.y[:40])
        ref = MaximumScoreEstimator(method="sweep").fit(data.x[:40], data.y[:40])
        assert clf.objective_ == ref.objective_

    def test_unfitted_predict_raises(self, sim):
        _, data = sim
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            MaximumScoreEstimator().predict(data.x)

    def test_theta_with_reference(self, sim):
        spec, data = sim
        clf = MaximumScoreEstimator(reference=spec.beta0).fit(data.x, data.y)
        assert clf.theta_hat_.shape == (1,)
