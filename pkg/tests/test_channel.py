import math

import numpy as np
import pytest
from scipy import stats

from nafdsim.channel import (draw_channels, free_space_pl_db, iri_channel,
                             pathloss_db, steering_vector)
from nafdsim.channel import _multipath
from nafdsim.scenario import SystemConfig, generate_layout


class TestSteeringVector:
    def test_broadside_m4(self):
        v = steering_vector(0.0, 4)
        assert np.allclose(v, 0.5 * np.ones(4))

    def test_endfire_m2(self):
        v = steering_vector(np.pi / 2, 2)
        assert np.allclose(v, np.array([1.0, -1.0]) / math.sqrt(2), atol=1e-12)

    def test_thirty_degrees_m2(self):
        v = steering_vector(np.pi / 6, 2)
        assert np.allclose(v, np.array([1.0, 1j]) / math.sqrt(2), atol=1e-12)

    def test_unit_norm_random_angles(self):
        rng = np.random.default_rng(1)
        for theta in rng.uniform(-np.pi, np.pi, 100):
            assert abs(np.linalg.norm(steering_vector(theta, 6)) - 1) < 1e-12


class TestPathloss:
    @pytest.fixture
    def cfg_noshadow(self):
        return SystemConfig(shadow_sigma_db=0.0)

    def test_free_space_reference(self, cfg_noshadow):
        assert free_space_pl_db(cfg_noshadow) == pytest.approx(61.39, abs=0.02)
        pl = pathloss_db(1.0, cfg_noshadow, np.random.default_rng(0))
        assert pl == pytest.approx(61.39, abs=0.02)

    def test_decade_adds_ten_xi(self, cfg_noshadow):
        rng = np.random.default_rng(0)
        d1 = pathloss_db(1.0, cfg_noshadow, rng)
        d10 = pathloss_db(10.0, cfg_noshadow, rng)
        assert d10 - d1 == pytest.approx(29.2, abs=1e-9)

    def test_shadowing_std(self, default_cfg):
        rng = np.random.default_rng(2)
        d = np.full(100_000, 10.0)
        pl = pathloss_db(d, default_cfg, rng)
        assert np.std(pl) == pytest.approx(8.7, rel=0.02)

    def test_short_distance_clamped_with_warning(self, default_cfg):
        rng = np.random.default_rng(0)
        with pytest.warns(UserWarning, match="clamped"):
            pl = pathloss_db(np.array([0.5, 2.0]), default_cfg, rng)
        assert np.isfinite(pl).all()


@pytest.fixture(scope="module")
def realization(default_cfg):
    rng = np.random.default_rng(7)
    lay = generate_layout(default_cfg, rng)
    return lay, draw_channels(lay, default_cfg, rng)


class TestDrawChannels:
    def test_shapes(self, default_cfg, realization):
        _, ch = realization
        c = default_cfg
        assert ch.h_dl.shape == (c.n_dl_users, c.n_trau, c.antennas_per_rau)
        assert ch.g_ul.shape == (c.n_ul_users, c.n_rrau, c.antennas_per_rau)
        assert ch.h_iri_resid.shape == (c.n_trau, c.n_rrau,
                                        c.antennas_per_rau, c.antennas_per_rau)
        assert ch.t_iui.shape == (c.n_dl_users, c.n_ul_users)

    def test_deterministic(self, default_cfg):
        rng1, rng2 = np.random.default_rng(9), np.random.default_rng(9)
        lay1 = generate_layout(default_cfg, rng1)
        lay2 = generate_layout(default_cfg, rng2)
        a = draw_channels(lay1, default_cfg, rng1)
        b = draw_channels(lay2, default_cfg, rng2)
        assert np.array_equal(a.h_dl, b.h_dl)
        assert np.array_equal(a.t_iui, b.t_iui)

    def test_channel_energy_is_l_beta(self):
        # E[||h||^2] = L * beta with unit-variance per-path gains
        rng = np.random.default_rng(3)
        L, M, beta = 6, 6, 2.5
        angles = rng.uniform(-np.pi, np.pi, size=(100_000, L))
        h = _multipath(rng, np.full(100_000, beta), angles, M, conj_gain=True)
        energy = np.mean(np.sum(np.abs(h) ** 2, axis=-1))
        assert energy == pytest.approx(L * beta, rel=0.03)

    def test_single_path_single_antenna_is_gaussian_scalar(self):
        rng = np.random.default_rng(4)
        beta = 0.7
        angles = rng.uniform(-np.pi, np.pi, size=(200_000, 1))
        h = _multipath(rng, np.full(200_000, beta), angles, 1, conj_gain=True)
        assert h.shape == (200_000, 1)
        assert np.mean(np.abs(h) ** 2) == pytest.approx(beta, rel=0.02)

    def test_residual_iri_variance(self, default_cfg):
        rng = np.random.default_rng(5)
        lay = generate_layout(default_cfg, rng)
        samples = []
        for _ in range(8):
            ch = draw_channels(lay, default_cfg, rng)
            samples.append(ch.h_iri_resid.ravel())
        var = np.mean(np.abs(np.concatenate(samples)) ** 2)
        assert var == pytest.approx(10 ** -10.5, rel=0.03)

    def test_iui_second_moment_matches_beta(self, default_cfg):
        rng = np.random.default_rng(6)
        lay = generate_layout(default_cfg, rng)
        ch0 = draw_channels(lay, default_cfg, rng)
        beta = ch0.large_scale.beta_iui
        # redraw small-scale many times on the SAME large-scale by reseeding
        ratios = []
        for s in range(400):
            ch = draw_channels(lay, default_cfg, np.random.default_rng(s))
            ratios.append(np.abs(ch.t_iui) ** 2 / ch.large_scale.beta_iui)
        assert np.mean(ratios) == pytest.approx(1.0, rel=0.05)
        assert beta.shape == (4, 4)

    def test_angles_uniform(self, default_cfg):
        rng = np.random.default_rng(8)
        lay = generate_layout(default_cfg, rng)
        angles = []
        while sum(a.size for a in angles) < 10_000:
            ch = draw_channels(lay, default_cfg, rng)
            angles.append(ch.aod_dl.ravel())
        sample = np.concatenate(angles)[:10_000]
        ks = stats.kstest(sample, stats.uniform(-np.pi, 2 * np.pi).cdf)
        # 1% critical value for the KS statistic is 1.63 / sqrt(n)
        assert ks.statistic < 1.63 / math.sqrt(len(sample))
        assert np.all(sample >= -np.pi) and np.all(sample <= np.pi)


class TestIriChannel:
    def test_energy_and_shape(self, default_cfg):
        rng = np.random.default_rng(10)
        lay = generate_layout(default_cfg, rng)
        ch = draw_channels(lay, default_cfg, rng)
        h = iri_channel(ch, default_cfg, rng)
        c = default_cfg
        assert h.shape == (c.n_trau, c.n_rrau, c.antennas_per_rau,
                           c.antennas_per_rau)
        # E ||H_mz||_F^2 = L * beta_mz with unit-norm steering vectors
        energies = []
        for s in range(300):
            h = iri_channel(ch, default_cfg, np.random.default_rng(s))
            energies.append(np.sum(np.abs(h) ** 2, axis=(2, 3))
                            / (c.n_paths * ch.large_scale.beta_iri))
        assert np.mean(energies) == pytest.approx(1.0, rel=0.05)
