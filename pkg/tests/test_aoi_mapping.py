import math

import pytest

from aoisim.aoi_mapping import aoi_bound_d, aoi_prob_m, violation_d, violation_m
from aoisim.config import SimConfig, derive_params

TAU = 3e-3


class TestViolationD:
    def test_no_violation_when_queue_small(self):
        ind, x = violation_d(q=0.0, rate=10.0, psi=-1.375)
        assert not ind and x == 0.0

    def test_excess_arithmetic(self):
        ind, x = violation_d(q=12.0, rate=10.0, psi=-1.375)
        assert ind
        assert x == pytest.approx(0.625)

    def test_boundary_is_strict(self):
        psi = -1.375
        ind, _ = violation_d(q=10.0 - psi, rate=10.0, psi=psi)
        assert not ind


class TestViolationM:
    def test_cases(self):
        assert violation_m(0.0, 1.0) == (False, 0.0)
        ind, x = violation_m(3.0, 1.2)
        assert ind and x == pytest.approx(1.8)
        assert violation_m(2.0, 2.0) == (False, 0.0)


class TestBoundAndMapping:
    def test_bound_is_identity(self):
        assert aoi_bound_d(0.0) == 0.0
        assert aoi_bound_d(0.01) == 0.01

    def test_prob_m_endpoints(self):
        lam, d_m = 0.375, 60e-3
        decay = math.exp(-lam * d_m / TAU)
        assert aoi_prob_m(0.0, lam, d_m, TAU) == pytest.approx(decay)
        assert decay == pytest.approx(5.531e-4, rel=1e-3)
        assert aoi_prob_m(1.0, lam, d_m, TAU) == 1.0

    def test_round_trip_through_effective_tolerance(self):
        cfg = SimConfig()
        der = derive_params(cfg)
        back = aoi_prob_m(der.e_k, der.lam, cfg.d_m, cfg.tau)
        assert back == pytest.approx(cfg.epsilon_k, abs=1e-15)

    def test_affine_strictly_increasing(self):
        lam, d_m = 0.375, 60e-3
        probs = [aoi_prob_m(p, lam, d_m, TAU) for p in (0.0, 0.25, 0.5, 1.0)]
        assert probs == sorted(probs)
        # affine: equal steps in the event prob give equal output steps
        assert probs[2] - probs[1] == pytest.approx(probs[1] - probs[0])

    def test_domain_checks(self):
        with pytest.raises(ValueError):
            aoi_bound_d(1.5)
        with pytest.raises(ValueError):
            aoi_prob_m(-0.1, 0.375, 60e-3, TAU)
