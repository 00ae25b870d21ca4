import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from stars_isac import MleDoaEstimator, StarsIsacDesigner
from stars_isac.geometry import desk_config, gen_channels
from stars_isac.mle import EchoBlock, generate_transmit_block, simulate_echo

SMALL = desk_config(M=4, N=4, N_s=3, K=1, gamma_bar=(1.0,))


@pytest.fixture(scope="module")
def fitted():
    ch = gen_channels(SMALL, np.random.default_rng(0))
    return StarsIsacDesigner(config=SMALL, max_outer=3, trials=10).fit(ch), ch


def test_designer_attributes(fitted):
    des, ch = fitted
    for name in ("stars_", "waveform_", "crb_", "trace_", "converged_", "result_"):
        assert hasattr(des, name)
    assert des.score() == pytest.approx(-des.crb_.root_crb_deg)
    assert des.design_[0] is ch
    assert des.get_params()["max_outer"] == 3
    assert clone(des).get_params() == des.get_params()


def test_designer_not_fitted():
    with pytest.raises(NotFittedError):
        StarsIsacDesigner().score()


def test_estimator_predict_and_transform(fitted):
    des, ch = fitted
    rng = np.random.default_rng(1)
    cfg = SMALL.replace(sigma_s_sq=1e-30)
    echoes = [simulate_echo(ch, des.stars_, generate_transmit_block(des.waveform_, cfg.L, rng, True),
                            cfg, rng) for _ in range(2)]
    est = MleDoaEstimator(grid_h=181, grid_v=181).fit(des)
    pred = est.predict(echoes)
    assert pred.shape == (2, 2)
    np.testing.assert_allclose(np.rad2deg(pred), [[120, 30], [120, 30]], atol=1.0)
    assert est.alpha_hat_.shape == (2,)
    spectra = est.transform(echoes[0])
    assert spectra.shape == (1, 181, 181) and spectra.max() == pytest.approx(1.0)
    same = MleDoaEstimator(config=SMALL, grid_h=181, grid_v=181).fit(des.design_)
    np.testing.assert_array_equal(same.predict(echoes), pred)


def test_estimator_not_fitted():
    echo = EchoBlock(np.zeros((3, 5)), np.zeros((4, 5)), 1.0, 1.0)
    with pytest.raises(NotFittedError):
        MleDoaEstimator().predict(echo)
