import numpy as np
import pytest

from simwave.channel import (ChannelConfig, ChannelRealization, end_to_end, free_space_path_loss,
                             ground_array_positions, los_component, sample_rician)
from simwave.core import SPEED_OF_LIGHT, SimGeometry
from simwave.errors import DomainError

from conftest import random_props


class TestPathLoss:
    def test_unit_at_lambda_over_4pi(self):
        lam = SPEED_OF_LIGHT / 5e9
        assert free_space_path_loss(5e9, lam / (4 * np.pi)) == pytest.approx(1.0, rel=1e-14)

    def test_leo_link(self):
        # lambda = 0.059958 m; 0.059958 / (4 pi 1.5e5)
        assert free_space_path_loss(5e9, 150e3) == pytest.approx(3.181e-8, rel=1e-3)

    def test_inverse_distance(self):
        assert free_space_path_loss(5e9, 2e3) == pytest.approx(free_space_path_loss(5e9, 1e3) / 2)

    @pytest.mark.parametrize("f,d", [(0, 1.0), (5e9, 0.0), (-1.0, 1.0)])
    def test_errors(self, f, d):
        with pytest.raises(DomainError):
            free_space_path_loss(f, d)


def _unit_los(rng, k, m):
    return np.exp(1j * rng.uniform(0, 2 * np.pi, (k, m)))


class TestRician:
    def test_strong_los_limit(self):
        los = _unit_los(np.random.default_rng(0), 4, 6)
        H = sample_rician(ChannelConfig(kappa=1e12, seed=3), los).H
        np.testing.assert_allclose(H, los, atol=1e-5)

    def test_rayleigh_unit_power(self):
        los = np.ones((4, 1))
        cfg = ChannelConfig(kappa=0.0, seed=9)
        draws = np.array([sample_rician(cfg, los, draw=d).H[:, 0] for d in range(10_000)])
        m2 = np.mean(np.abs(draws) ** 2, axis=0)
        assert np.all((m2 > 0.95) & (m2 < 1.05))

    def test_mixture_mean(self):
        rng = np.random.default_rng(1)
        los = _unit_los(rng, 2, 2)
        cfg = ChannelConfig(rx_count=2, kappa=10.0, seed=5)
        total = np.zeros((2, 2), complex)
        n = 100_000
        for d in range(n):
            total += sample_rician(cfg, los, draw=d).H
        expected = np.sqrt(10 / 11) * los
        assert np.linalg.norm(total / n - expected) / np.linalg.norm(expected) < 0.02

    def test_reproducible(self):
        los = _unit_los(np.random.default_rng(2), 4, 3)
        cfg = ChannelConfig(seed=123)
        a = sample_rician(cfg, los, draw=7).H
        b = sample_rician(cfg, los, draw=7).H
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, sample_rician(cfg, los, draw=8).H)

    def test_draw_order_independent(self):
        los = np.ones((4, 2))
        cfg = ChannelConfig(seed=4)
        forward = [sample_rician(cfg, los, draw=d).H for d in range(3)]
        backward = [sample_rician(cfg, los, draw=d).H for d in (2, 1, 0)][::-1]
        for a, b in zip(forward, backward):
            np.testing.assert_array_equal(a, b)

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            sample_rician(ChannelConfig(rx_count=4), np.ones((3, 2)))

    def test_path_loss_gain(self):
        cfg = ChannelConfig(include_path_loss=True, atmospheric_loss_db=20.0)
        real = sample_rician(cfg, np.ones((4, 2)), carrier_freq=5e9)
        assert real.path_loss_linear == pytest.approx(free_space_path_loss(5e9, 150e3) / 10)
        with pytest.raises(DomainError):
            sample_rician(cfg, np.ones((4, 2)))

    @pytest.mark.parametrize("kw", [dict(rx_count=0), dict(distance=0.0), dict(noise_power=0.0),
                                    dict(kappa=-1.0)])
    def test_config_invariants(self, kw):
        with pytest.raises(DomainError):
            ChannelConfig(**kw)


class TestLOS:
    def test_full_wavelength(self):
        g = SimGeometry(layers=1, n_x=1, n_y=1)
        lam = g.wavelength
        ap = np.array([[0.0, 0.0, 0.0]])
        v = los_component(g, [[0.0, 0.0, lam]], aperture=ap)
        assert v[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_unit_modulus_at_range(self):
        g = SimGeometry(layers=2, n_x=4, n_y=2)
        v = los_component(g, ground_array_positions(g, ChannelConfig()))
        assert v.shape == (4, 8)
        np.testing.assert_allclose(np.abs(v), 1.0, atol=1e-14)

    def test_equidistant_antennas(self):
        g = SimGeometry(layers=1, n_x=1, n_y=1)
        ap = np.array([[0.0, 0.0, 0.0]])
        v = los_component(g, [[0.01, 0.0, 0.2], [-0.01, 0.0, 0.2], [0.0, 0.01, 0.2]], aperture=ap)
        assert v[0, 0] == v[1, 0] == v[2, 0]

    def test_long_range_phase_matches_extended_precision(self):
        g = SimGeometry(layers=1, n_x=1, n_y=1)
        ap = np.array([[0.0, 0.0, 0.0]])
        r = 150e3 + 0.0123
        v = los_component(g, [[0.0, 0.0, r]], aperture=ap)[0, 0]
        lam = np.longdouble(SPEED_OF_LIGHT) / np.longdouble(5e9)
        frac = float(np.fmod(np.longdouble(r), lam) / lam)
        assert abs(np.angle(v / np.exp(2j * np.pi * frac))) < 1e-6

    def test_rx_behind_aperture(self):
        g = SimGeometry(layers=1, n_x=1, n_y=1)
        with pytest.raises(DomainError):
            los_component(g, [[0.0, 0.0, -1.0]], aperture=[[0.0, 0.0, 0.0]])

    def test_ground_array(self):
        g = SimGeometry()
        pts = ground_array_positions(g, ChannelConfig(rx_count=4))
        np.testing.assert_allclose(np.diff(pts[:, 0]), g.wavelength / 2)
        assert pts[:, 0].mean() == pytest.approx(0.0, abs=1e-15)
        assert np.all(pts[:, 2] == pytest.approx(g.layers * g.layer_gap + 150e3))


class TestEndToEnd:
    def test_identity_channel(self):
        G = np.arange(6).reshape(3, 2) * (1 + 1j)
        np.testing.assert_array_equal(end_to_end(G, ChannelRealization(np.eye(3))), G)

    def test_scaling(self):
        rng = np.random.default_rng(3)
        G = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        H = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
        c = 0.7 - 2j
        np.testing.assert_allclose(end_to_end(G, ChannelRealization(c * H)),
                                   c * end_to_end(G, ChannelRealization(H)), rtol=1e-14)

    def test_naive_triple_product(self):
        from simwave.core import PhaseProfile, cascade_response
        rng = np.random.default_rng(4)
        props = random_props(rng, 2, 3, n_in=2, n_out=3)
        resp = cascade_response(props, PhaseProfile(rng.uniform(0, 6, (2, 3))))
        H = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
        out = end_to_end(resp, ChannelRealization(H, 0.5))
        naive = np.zeros((2, 2), complex)
        for i in range(2):
            for j in range(2):
                naive[i, j] = 0.5 * sum(H[i, k] * resp.G[k, j] for k in range(3))
        np.testing.assert_allclose(out, naive, rtol=1e-13)

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            end_to_end(np.ones((3, 2)), ChannelRealization(np.ones((2, 4))))
