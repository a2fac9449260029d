import math

import numpy as np
import pytest

from aoisim.channel import (MIN_DISTANCE, dispersion, fbl_rate, inverse_q,
                            path_loss, path_loss_matrix, q_function,
                            sample_fading, shannon_rate)
from aoisim.config import SimConfig
from aoisim.mobility import RoadGrid, init_topology, step_mobility

CFG = SimConfig()
GRID = RoadGrid(area_side=250.0, block_spacing=62.5, lane_offset=2.5, n_roads=4)


def db(x):
    return 10.0 * math.log10(x)


class TestPathLoss:
    def test_same_lane_15m(self):
        gain = path_loss((10.0, 2.5), (25.0, 2.5), GRID, CFG,
                         tx_road=(0, 0), rx_road=(0, 0))
        assert db(gain) == pytest.approx(-68.5 - 16.1 * math.log10(15.0), abs=1e-9)

    def test_wlos_uses_l1_distance(self):
        # tx on the vertical road 5 m up, rx on the horizontal road 5 m out
        gain = path_loss((0.0, 5.0), (5.0, 0.0), GRID, CFG,
                         tx_road=(1, 0), rx_road=(0, 0))
        assert gain == pytest.approx(CFG.l0 * 10.0 ** -CFG.alpha)

    def test_nlos_product_form(self):
        # both endpoints far (>15 m) from the shared crossing at (125, 0)
        gain = path_loss((100.0, 0.0), (125.0, 100.0), GRID, CFG,
                         tx_road=(0, 0), rx_road=(1, 2))
        assert gain == pytest.approx(CFG.l0_prime * (25.0 * 100.0) ** -CFG.alpha)

    def test_parallel_distinct_roads_are_nlos(self):
        gain = path_loss((10.0, 0.0), (10.0 + 30.0, 62.5), GRID, CFG,
                         tx_road=(0, 0), rx_road=(0, 1))
        assert gain == pytest.approx(CFG.l0_prime * (30.0 * 62.5) ** -CFG.alpha)

    def test_coincident_points_clamped(self):
        gain = path_loss((10.0, 0.0), (10.0, 0.0), GRID, CFG,
                         tx_road=(0, 0), rx_road=(0, 0))
        assert gain == pytest.approx(CFG.l0 * MIN_DISTANCE ** -CFG.alpha)

    def test_symmetric_in_endpoints(self):
        rng = np.random.default_rng(7)
        cfg = SimConfig(k=6)
        topo = init_topology(cfg, rng)
        pos = topo.positions()
        roads = list(zip(topo.axis.tolist(), topo.road.tolist()))
        for a in range(4):
            for b in range(6, 10):
                fwd = path_loss(pos[a], pos[b], topo.grid, cfg,
                                tx_road=roads[a], rx_road=roads[b])
                rev = path_loss(pos[b], pos[a], topo.grid, cfg,
                                tx_road=roads[b], rx_road=roads[a])
                assert fwd == pytest.approx(rev, rel=1e-12)

    def test_matrix_agrees_with_scalar(self):
        rng = np.random.default_rng(11)
        cfg = SimConfig(k=8)
        topo = init_topology(cfg, rng)
        for _ in range(50):
            step_mobility(topo, cfg.tau, rng)
        mat = path_loss_matrix(topo, cfg)
        pos = topo.positions()
        k = cfg.k
        for i in range(k):
            for j in range(k):
                expect = path_loss(
                    pos[i], pos[k + j], topo.grid, cfg,
                    tx_road=(int(topo.axis[i]), int(topo.road[i])),
                    rx_road=(int(topo.axis[k + j]), int(topo.road[k + j])))
                assert mat[i, j] == pytest.approx(expect, rel=1e-12)


class TestFading:
    def test_unit_mean(self):
        rng = np.random.default_rng(0)
        draws = sample_fading(rng, shape=100_000)
        assert draws.mean() == pytest.approx(1.0, rel=0.02)

    def test_nonnegative_and_deterministic(self):
        a = sample_fading(np.random.default_rng(5), shape=1000)
        b = sample_fading(np.random.default_rng(5), shape=1000)
        assert np.array_equal(a, b)
        assert np.all(a >= 0)


class TestShannonRate:
    def test_zero_power_zero_rate(self):
        rate, _ = shannon_rate([0.0, 0.0], [1e-9, 1e-9], CFG, noise_plus_i0=1e-15)
        assert rate == 0.0

    def test_unit_snr_single_rb(self):
        noise = CFG.n0 * CFG.omega
        h = 1e-9
        p = noise / h  # SNR exactly 1
        rate, _ = shannon_rate([p], [h], CFG, noise_plus_i0=noise)
        assert rate == pytest.approx(540.0 / 4000.0)

    def test_interference_decreases_rate(self):
        p, h = [0.05], [1e-9]
        noise = CFG.n0 * CFG.omega
        r1, _ = shannon_rate(p, h, CFG, noise_plus_i0=noise + 1e-13)
        r2, _ = shannon_rate(p, h, CFG, noise_plus_i0=noise + 2e-13)
        assert r2 < r1

    def test_monotone_in_power(self):
        rng = np.random.default_rng(3)
        h = rng.uniform(1e-10, 1e-8, 5)
        p = rng.uniform(0, 0.05, 5)
        base, _ = shannon_rate(p, h, CFG, noise_plus_i0=1e-15)
        for n in range(5):
            bumped = p.copy()
            bumped[n] += 0.01
            up, _ = shannon_rate(bumped, h, CFG, noise_plus_i0=1e-15)
            assert up > base


class TestFblRate:
    def test_dispersion_high_snr_limit(self):
        limit = math.log2(math.e) ** 2
        assert dispersion(1e6) == pytest.approx(limit, rel=1e-5)
        assert dispersion(1e6) < limit

    def test_converges_to_shannon(self):
        h = np.array([1e-9] * 3)
        noise = 1e-15
        p = 10.0 * noise / h  # SNR 10 per RB
        sh, _ = shannon_rate(p, h, CFG, noise_plus_i0=noise)
        fb, _ = fbl_rate(p, h, CFG, blocklength=10**6, block_error=1e-5,
                         noise_plus_i0=noise)
        assert abs(fb - sh) / sh < 0.01

    def test_zero_power_term_is_zero(self):
        rate, spectral = fbl_rate([0.0, 0.05], [1e-9, 1e-9], CFG,
                                  blocklength=540, block_error=1e-5,
                                  noise_plus_i0=1e-15)
        assert spectral[0] == 0.0
        assert rate > 0.0

    def test_upper_bound_vs_shannon(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            h = rng.uniform(1e-11, 1e-8, 4)
            p = rng.uniform(0.0, 0.08, 4)
            bl = int(rng.integers(10, 5000))
            sh, _ = shannon_rate(p, h, CFG, noise_plus_i0=1e-15)
            fb, _ = fbl_rate(p, h, CFG, blocklength=bl, block_error=1e-4,
                             noise_plus_i0=1e-15)
            bonus = CFG.omega * CFG.tau / CFG.z * 4 * math.log2(bl) / (2 * bl)
            assert fb <= sh + bonus + 1e-12

    def test_monotone_in_power(self):
        h = np.array([2e-9, 5e-10])
        p = np.array([0.01, 0.02])
        base, _ = fbl_rate(p, h, CFG, blocklength=540, block_error=1e-5,
                           noise_plus_i0=1e-15)
        up, _ = fbl_rate(p * 1.5, h, CFG, blocklength=540, block_error=1e-5,
                         noise_plus_i0=1e-15)
        assert up >= base


class TestInverseQ:
    def test_symmetry_point(self):
        assert inverse_q(0.5) == pytest.approx(0.0, abs=1e-12)

    def test_roundtrip_accuracy(self):
        for eps in (1e-9, 1e-7, 1e-5, 1e-3, 0.0013499, 0.1, 0.3, 0.5, 0.9):
            assert q_function(inverse_q(eps)) == pytest.approx(eps, abs=1e-9)

    def test_known_values_against_bisection(self):
        def bisect(eps):
            lo, hi = -10.0, 10.0
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if q_function(mid) > eps:
                    lo = mid
                else:
                    hi = mid
            return 0.5 * (lo + hi)

        assert inverse_q(1e-5) == pytest.approx(bisect(1e-5), abs=1e-9)
        assert inverse_q(1e-5) == pytest.approx(4.2649, abs=1e-4)
        assert inverse_q(0.0013499) == pytest.approx(3.0, abs=1e-3)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            inverse_q(0.0)
        with pytest.raises(ValueError):
            inverse_q(1.0)
