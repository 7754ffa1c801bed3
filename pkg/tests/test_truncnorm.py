"""Distributional tests for the truncated-normal sampler."""

import numpy as np
import pytest
from scipy.stats import kstest, truncnorm

from bnpirt.truncnorm import trunc_norm


def ks_against_truncnorm(draws, mean, sd, lower, upper):
    a, b = (lower - mean) / sd, (upper - mean) / sd
    return kstest(draws, truncnorm(a, b, loc=mean, scale=sd).cdf)


class TestCentralRegions:
    def test_two_sided_interval(self):
        rng = np.random.default_rng(42)
        draws = trunc_norm(rng, np.full(50000, 0.5), 1.2, -1.0, 2.0)
        res = ks_against_truncnorm(draws, 0.5, 1.2, -1.0, 2.0)
        assert res.pvalue > 0.01

    def test_half_line_positive(self):
        rng = np.random.default_rng(1)
        draws = trunc_norm(rng, np.zeros(50000), 1.0, 0.0, np.inf)
        res = ks_against_truncnorm(draws, 0.0, 1.0, 0.0, np.inf)
        assert res.pvalue > 0.01
        # half-normal mean oracle
        assert draws.mean() == pytest.approx(np.sqrt(2 / np.pi), abs=0.01)

    def test_negative_half_line(self):
        rng = np.random.default_rng(2)
        draws = trunc_norm(rng, np.zeros(50000), 1.0, -np.inf, 0.0)
        assert np.all(draws <= 0)
        res = ks_against_truncnorm(draws, 0.0, 1.0, -np.inf, 0.0)
        assert res.pvalue > 0.01

    def test_mostly_untruncated(self):
        rng = np.random.default_rng(3)
        draws = trunc_norm(rng, np.full(50000, 10.0), 1.0, 0.0, np.inf)
        res = kstest(draws, "norm", args=(10.0, 1.0))
        assert res.pvalue > 0.01


class TestFarTails:
    def test_upper_tail_interval(self):
        rng = np.random.default_rng(4)
        draws = trunc_norm(rng, np.zeros(50000), 1.0, 9.0, 10.0)
        assert np.all((draws > 9.0) & (draws < 10.0))
        res = ks_against_truncnorm(draws, 0.0, 1.0, 9.0, 10.0)
        assert res.pvalue > 0.01

    def test_lower_tail_interval(self):
        rng = np.random.default_rng(5)
        draws = trunc_norm(rng, np.zeros(50000), 1.0, -10.0, -9.0)
        assert np.all((draws > -10.0) & (draws < -9.0))
        res = ks_against_truncnorm(draws, 0.0, 1.0, -10.0, -9.0)
        assert res.pvalue > 0.01

    def test_extreme_one_sided(self):
        rng = np.random.default_rng(6)
        draws = trunc_norm(rng, np.zeros(10000), 1.0, 38.0, np.inf)
        assert np.all(np.isfinite(draws)) and np.all(draws > 38.0)

    def test_unit_interval_far_from_mean(self):
        # the weight-model latents need intervals like (z-1, z) many sd out
        rng = np.random.default_rng(7)
        draws = trunc_norm(rng, np.zeros(20000), 1.0, 19.0, 20.0)
        assert np.all((draws > 19.0) & (draws < 20.0))
        # conditional density is essentially exponential near the left edge
        assert np.quantile(draws, 0.9) < 19.2


class TestBroadcastAndValidation:
    def test_broadcasting(self):
        rng = np.random.default_rng(8)
        means = np.array([-2.0, 0.0, 3.0])
        draws = trunc_norm(rng, means[:, None], 1.0, 0.0, np.inf)
        assert draws.shape == (3, 1)
        assert np.all(draws > 0)

    def test_bad_bounds(self):
        rng = np.random.default_rng(9)
        with pytest.raises(ValueError):
            trunc_norm(rng, 0.0, 1.0, 1.0, 1.0)

    def test_open_interval_contract(self):
        rng = np.random.default_rng(10)
        draws = trunc_norm(rng, np.zeros(200000), 1e-6, 0.0, 1e-9)
        assert np.all((draws > 0.0) & (draws < 1e-9))
