import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stars_isac.geometry import (ArrayGeometry, config_from_dict, db_to_linear, dbm_to_watts,
                                 desk_config, gen_channels, load_config, steering_bs,
                                 steering_sensor, steering_stars, table_config, upa_shape,
                                 wavenumber, BS_AZIMUTH_AT_STARS, BS_ELEVATION_AT_STARS,
                                 STARS_ANGLE_AT_BS)

TARGET = (np.deg2rad(120.0), np.deg2rad(30.0))


def test_wavenumber_axes():
    np.testing.assert_allclose(wavenumber(0, 0, 1.0), 2 * np.pi * np.array([1, 0, 0]), atol=1e-12)
    np.testing.assert_allclose(wavenumber(np.pi / 2, 0, 1.0), 2 * np.pi * np.array([0, 1, 0]), atol=1e-12)


def test_wavenumber_norm_at_target():
    k = wavenumber(2.0944, 0.5236, 0.1)
    assert np.linalg.norm(k) == pytest.approx(62.8319, abs=1e-4)


def test_wavenumber_rejects_bad_wavelength():
    with pytest.raises(ValueError):
        wavenumber(0, 0, 0.0)


def test_stars_steering_broadside_is_ones():
    geom = ArrayGeometry.build(8, 4)
    np.testing.assert_allclose(steering_stars(np.pi / 2, 0, geom), np.ones(8), atol=1e-12)


def test_stars_steering_two_elements_half_wavelength():
    coords = np.array([[0.0, 0, 0], [0.5, 0, 0]])
    geom = ArrayGeometry(coords, np.zeros((1, 3)), 0.5, 1.0)
    np.testing.assert_allclose(steering_stars(0, 0, geom), [1, -1], atol=1e-12)


def _ula(n, lam=0.1):
    d = lam / 2
    coords = np.zeros((n, 3))
    coords[:, 0] = d * np.arange(n)
    return coords, d


def test_stars_steering_matches_scalar_loop():
    coords, d = _ula(4)
    geom = ArrayGeometry(coords, np.zeros((1, 3)), d, 0.1)
    ph, pv = 2.0944, 0.5236
    k = 2 * np.pi / 0.1
    ref = [np.exp(-1j * k * (x * np.cos(ph) * np.cos(pv) + z * np.sin(pv))) for x, _, z in coords]
    np.testing.assert_allclose(steering_stars(ph, pv, geom), ref, atol=1e-12)


def test_sensor_steering_special_angles():
    geom = ArrayGeometry.build(8, 5)
    np.testing.assert_allclose(steering_sensor(np.pi / 2, 0.3, geom), np.ones(5), atol=1e-12)
    np.testing.assert_allclose(steering_sensor(0.7, np.pi / 2, geom), np.ones(5), atol=1e-12)


def test_sensor_steering_matches_scalar_loop():
    geom = ArrayGeometry.build(8, 5)
    ph, pv = 2.0944, 0.5236
    k = 2 * np.pi / 0.1
    ref = [np.exp(-1j * k * x * np.cos(ph) * np.cos(pv)) for x in geom.rbar_x]
    np.testing.assert_allclose(steering_sensor(ph, pv, geom), ref, atol=1e-12)


def test_upa_layout_spans_both_axes():
    geom = ArrayGeometry.build(8, 4)
    d = geom.element_spacing
    np.testing.assert_allclose(geom.r_x / d, [0, 0, 1, 1, 2, 2, 3, 3])
    np.testing.assert_allclose(geom.r_z / d, [0, 1, 0, 1, 0, 1, 0, 1])
    # each half of the surface still covers both axes
    for half in (slice(0, 4), slice(4, 8)):
        assert np.ptp(geom.r_x[half]) > 0 and np.ptp(geom.r_z[half]) > 0


@pytest.mark.parametrize("n,shape", [(8, (4, 2)), (9, (3, 3)), (10, (5, 2)), (7, (7, 1)), (1, (1, 1))])
def test_upa_shape(n, shape):
    assert upa_shape(n) == shape


def test_geometry_validation():
    with pytest.raises(ValueError):
        ArrayGeometry(np.array([[0.0, 1.0, 0.0]]), np.zeros((1, 3)), 0.05, 0.1)
    with pytest.raises(ValueError):
        ArrayGeometry(np.zeros((1, 3)), np.array([[0.0, 0.0, 1.0]]), 0.05, 0.1)
    with pytest.raises(ValueError):
        ArrayGeometry.build(4, 2, wavelength=-1.0)


def test_unit_conversions():
    assert dbm_to_watts(30) == pytest.approx(1.0)
    assert dbm_to_watts(-110) == pytest.approx(1e-14)
    assert db_to_linear(10) == pytest.approx(10.0)


def test_path_loss_scale_factor():
    c = desk_config()
    assert np.sqrt(c.rho_0 / c.d_BR ** c.alpha_BR) == pytest.approx(7.906e-4, rel=1e-4)


def test_rician_limit_recovers_los():
    cfg = desk_config(rician=1e12)
    ch = gen_channels(cfg, np.random.default_rng(3))
    geom = cfg.geometry()
    los = np.outer(steering_stars(BS_AZIMUTH_AT_STARS, BS_ELEVATION_AT_STARS, geom),
                   steering_bs(STARS_ANGLE_AT_BS, cfg.M, cfg.wavelength))
    los *= np.sqrt(cfg.rho_0 / cfg.d_BR ** cfg.alpha_BR)
    assert np.linalg.norm(ch.G - los) / np.linalg.norm(los) < 1e-5


def test_channel_power_normalization():
    cfg = desk_config(d_BR=1.0, rho_0=1.0)
    rng = np.random.default_rng(0)
    power = np.mean([np.linalg.norm(gen_channels(cfg, rng).G[:, 0]) ** 2 / cfg.N for _ in range(2000)])
    assert 0.95 <= power <= 1.05


def test_channels_deterministic_in_seed():
    cfg = desk_config()
    a = gen_channels(cfg, np.random.default_rng(5))
    b = gen_channels(cfg, np.random.default_rng(5))
    np.testing.assert_array_equal(a.G, b.G)
    np.testing.assert_array_equal(a.h, b.h)
    assert a.alpha == b.alpha
    assert a.G.shape == (cfg.N, cfg.M) and a.h.shape == (cfg.K, cfg.N)


def test_config_validation():
    with pytest.raises(ValueError):
        desk_config(K=3)  # gamma_bar length mismatch
    with pytest.raises(ValueError):
        desk_config(d_BR=-1.0)
    with pytest.raises(ValueError):
        desk_config(phi_v=2.0)
    with pytest.raises(ValueError):
        desk_config(gamma_bar=(-1.0, 1.0))


def test_config_replace_resizes_thresholds():
    c = desk_config().with_gamma_db(10).replace(K=3)
    assert c.gamma_bar == pytest.approx((10.0,) * 3)


def test_table_preset():
    c = table_config()
    assert (c.M, c.N, c.N_s, c.K) == (10, 10, 5, 4)


def test_config_from_dict_units(tmp_path):
    raw = {"P_budget_dbm": 30, "sigma_s_sq_dbm": -110, "gamma_bar_db": 10, "phi_h": 120, "N": 6}
    c = config_from_dict(raw)
    assert c.P_budget == pytest.approx(1.0)
    assert c.sigma_s_sq == pytest.approx(1e-14)
    assert c.gamma_bar == pytest.approx((10.0, 10.0))
    assert c.phi_h == pytest.approx(TARGET[0])
    path = tmp_path / "cfg.yaml"
    path.write_text("N: 10\nrician_db: 3\n")
    assert load_config(path).N == 10
    with pytest.raises(ValueError):
        config_from_dict({"bogus": 1})


@settings(max_examples=50, deadline=None)
@given(st.floats(0, np.pi), st.floats(-np.pi / 2, np.pi / 2))
def test_steering_unit_modulus(ph, pv):
    geom = ArrayGeometry.build(6, 3)
    assert np.allclose(np.abs(steering_stars(ph, pv, geom)), 1)
    assert np.allclose(np.abs(steering_sensor(ph, pv, geom)), 1)
    assert np.linalg.norm(wavenumber(ph, pv, 0.1)) == pytest.approx(2 * np.pi / 0.1)
