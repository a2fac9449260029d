import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoisim.evt import (FitError, GpdParams, fit_gpd, gpd_cdf, gpd_moments,
                        hb_caps, ks_distance)


def sample_gpd(rng, sigma, xi, n):
    u = rng.uniform(size=n)
    if abs(xi) < 1e-12:
        return -sigma * np.log(u)
    return sigma / xi * (u ** -xi - 1.0)


class TestCdf:
    def test_zero_at_origin(self):
        assert gpd_cdf(0.0, GpdParams(1.0, 0.2)) == 0.0

    def test_exponential_branch(self):
        p = GpdParams(2.0, 0.0)
        assert gpd_cdf(2.0, p) == pytest.approx(1.0 - math.exp(-1.0))

    def test_bounded_support_endpoint(self):
        p = GpdParams(1.0, -0.5)  # support [0, sigma/|xi|] = [0, 2]
        assert gpd_cdf(2.0, p) == pytest.approx(1.0)

    def test_continuity_at_xi_zero(self):
        sigma = 1.3
        xs = np.linspace(0.0, 8.0, 50)
        near = gpd_cdf(xs, GpdParams(sigma, 1e-8))
        exact = 1.0 - np.exp(-xs / sigma)
        assert np.max(np.abs(near - exact)) < 1e-6

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.1, 5.0), st.floats(-1.5, 0.45))
    def test_monotone_with_unit_limits(self, sigma, xi):
        p = GpdParams(sigma, xi)
        xs = np.linspace(0.0, 50.0, 200)
        cdf = gpd_cdf(xs, p)
        assert np.all(np.diff(cdf) >= -1e-12)
        assert cdf[0] == 0.0
        assert cdf[-1] <= 1.0

    def test_domain_validation(self):
        with pytest.raises(ValueError):
            GpdParams(-1.0, 0.0)
        with pytest.raises(ValueError):
            GpdParams(1.0, 0.6)
        with pytest.raises(ValueError):
            gpd_cdf(-0.5, GpdParams(1.0, 0.0))


class TestMoments:
    def test_exponential_case(self):
        mean, var = gpd_moments(GpdParams(1.7, 0.0))
        assert mean == pytest.approx(1.7)
        assert var == pytest.approx(1.7 ** 2)

    def test_table_consistency(self):
        # parameter thresholds that reproduce the configured caps
        mean, _ = gpd_moments(GpdParams(0.1031, -1.0625))
        assert mean == pytest.approx(0.05, rel=1e-3)
        h, b = hb_caps(0.1031, -1.0625)
        assert h == pytest.approx(0.05, rel=1e-3)
        assert b == pytest.approx(0.0033, rel=1e-3)

    def test_monte_carlo_agreement(self):
        rng = np.random.default_rng(12)
        p = GpdParams(1.0, 0.2)
        x = sample_gpd(rng, p.sigma, p.xi, 10**6)
        mean, var = gpd_moments(p)
        assert x.mean() == pytest.approx(mean, rel=0.01)
        assert x.var() == pytest.approx(var, rel=0.02)


class TestHbCaps:
    def test_unit_exponential(self):
        assert hb_caps(1.0, 0.0) == pytest.approx((1.0, 2.0))

    def test_divergence_direction(self):
        bs = [hb_caps(1.0, xi)[1] for xi in (0.0, 0.3, 0.45, 0.49)]
        assert bs == sorted(bs)
        assert bs[-1] > 100.0

    def test_domain(self):
        with pytest.raises(ValueError):
            hb_caps(0.0, 0.0)


class TestFit:
    @pytest.mark.parametrize("xi", [-0.3, 0.0, 0.2])
    def test_recovery(self, xi):
        rng = np.random.default_rng(100 + int(xi * 10))
        x = sample_gpd(rng, 1.0, xi, 10**5)
        params, diag = fit_gpd(x)
        assert params.sigma == pytest.approx(1.0, rel=0.05)
        assert params.xi == pytest.approx(xi, abs=0.03)
        assert diag["n"] == 10**5
        assert diag["ks"] < 0.01

    def test_exponential_samples(self):
        rng = np.random.default_rng(42)
        x = rng.exponential(2.0, size=10**5)
        params, _ = fit_gpd(x)
        assert params.xi == pytest.approx(0.0, abs=0.03)
        assert params.sigma == pytest.approx(2.0, rel=0.05)

    def test_too_few_samples(self):
        with pytest.raises(FitError):
            fit_gpd(np.ones(10) + np.arange(10) * 0.1)

    def test_degenerate_samples(self):
        with pytest.raises(FitError):
            fit_gpd(np.full(100, 2.5))


class TestKsDistance:
    def test_small_for_true_model(self):
        rng = np.random.default_rng(8)
        p = GpdParams(1.0, 0.1)
        x = sample_gpd(rng, p.sigma, p.xi, 10**4)
        assert ks_distance(x, p) < 0.02

    def test_single_sample_at_median(self):
        p = GpdParams(1.0, 0.0)
        median = -p.sigma * math.log(0.5)
        assert ks_distance([median], p) == pytest.approx(0.5, abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ks_distance([], GpdParams(1.0, 0.0))
