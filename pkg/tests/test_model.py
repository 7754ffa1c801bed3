"""Tests for mixture weights, response probabilities, and prior density."""

import numpy as np
import pytest
from scipy.special import ndtr
from scipy.stats import invgamma, norm

from bnpirt.model import (
    ParameterState,
    PriorConfig,
    data_log_likelihood,
    latent_moments,
    log_cell_weight_matrix,
    log_prior_density,
    mixture_weight,
    observation_pmf,
    response_probability,
    weight_window,
)


def flat_state(dim=2, half=20, **overrides):
    """All-zero-location state wide enough that no window extension happens."""
    fields = dict(
        mu=np.zeros(2 * half + 1),
        sigma_mu=0.5,
        beta=np.zeros(dim),
        beta_omega=np.zeros(dim),
        sigma2=1.0,
        sigma_omega2=1.0,
    )
    fields.update(overrides)
    return ParameterState(**fields)


class TestMixtureWeight:
    def test_standard_cell(self):
        # oracle: direct standard-normal cdf difference
        expected = ndtr(0.0) - ndtr(-1.0)
        assert mixture_weight(0, 0.0, 1.0) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.3413447460685429, abs=1e-12)

    def test_shift_invariance(self):
        assert mixture_weight(1, 1.0, 1.0) == pytest.approx(
            mixture_weight(0, 0.0, 1.0), abs=1e-15
        )

    def test_translation_equivariance_random(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            j = int(rng.integers(-8, 9))
            k = int(rng.integers(-5, 6))
            eta = rng.normal(0, 2)
            sigma = float(rng.uniform(0.1, 3))
            assert mixture_weight(j, eta, sigma) == pytest.approx(
                mixture_weight(j + k, eta + k, sigma), rel=1e-12, abs=1e-300
            )

    def test_cells_telescope_to_one(self):
        total = sum(mixture_weight(j, 0.0, 1.0) for j in range(-10, 11))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_scale(self):
        with pytest.raises(ValueError):
            mixture_weight(0, 0.0, 0.0)
        with pytest.raises(ValueError):
            mixture_weight(0, 0.0, -1.0)


class TestWeightWindow:
    def test_tiny_eps_covers_wide_window(self):
        w = weight_window(0.0, 1.0, eps=1e-10)
        assert w.j_lo <= -7 and w.j_hi >= 7
        assert w.tail_mass <= 1e-10

    def test_tiny_scale_concentrates_by_eta_position(self):
        # oracle: cdf limit. eta interior to cell 0 puts all mass there;
        # eta exactly on the cell edge splits it evenly with the next cell.
        w = weight_window(-0.5, 1e-8, eps=1e-10)
        weights = dict(zip(w.indices.tolist(), w.weights))
        assert weights[0] == pytest.approx(1.0, abs=1e-12)
        w_edge = weight_window(0.0, 1e-8, eps=1e-10)
        weights = dict(zip(w_edge.indices.tolist(), w_edge.weights))
        assert weights[0] == pytest.approx(0.5, abs=1e-9)
        assert weights[1] == pytest.approx(0.5, abs=1e-9)

    def test_mass_partition_random(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            eta = rng.normal(0, 3)
            sigma = float(rng.uniform(0.05, 4))
            w = weight_window(eta, sigma, eps=1e-12)
            assert np.all(w.weights >= 0) and np.all(w.weights <= 1)
            assert w.weights.sum() + w.tail_mass == pytest.approx(1.0, abs=1e-12)

    def test_eps_validation(self):
        with pytest.raises(ValueError):
            weight_window(0.0, 1.0, eps=0.0)
        with pytest.raises(ValueError):
            weight_window(0.0, 1.0, eps=1.5)


class TestLogCellWeights:
    def test_matches_linear_domain_where_representable(self):
        rng = np.random.default_rng(3)
        eta = rng.normal(0, 1, size=50)
        log_w = log_cell_weight_matrix(-5, 5, eta, 1.3)
        direct = np.log(
            [[mixture_weight(j, e, 1.3) for j in range(-5, 6)] for e in eta]
        )
        np.testing.assert_allclose(log_w, direct, rtol=1e-10)

    def test_far_tail_stays_finite(self):
        log_w = log_cell_weight_matrix(-60, -59, np.array([0.0]), 1.0)
        assert np.all(np.isfinite(log_w))
        # oracle: log cell mass ~ -hi^2/2 asymptotically, 59 sd out
        assert log_w[0, 0] < -1500


class TestResponseProbability:
    def test_symmetric_point(self):
        zeta = flat_state()
        assert response_probability(np.array([1.0, -1.0]), zeta) == pytest.approx(
            0.5, abs=1e-10
        )

    def test_ninety_five_percent_point(self):
        zeta = flat_state(beta=np.array([0.0, 1.0]))
        p = response_probability(np.array([1.0, 1.6448536]), zeta)
        assert p == pytest.approx(0.95, abs=1e-7)

    def test_degenerate_weights_single_location(self):
        # weights pinned to cell 0 (eta interior, tiny scale), location 2
        zeta = flat_state(sigma_omega2=1e-16)
        zeta.beta_omega = np.array([-0.5, 0.0])
        half = zeta.j_act
        zeta.mu[half] = 2.0
        p = response_probability(np.array([1.0, 0.0]), zeta)
        assert p == pytest.approx(ndtr(2.0), abs=1e-9)
        assert ndtr(2.0) == pytest.approx(0.9772498680518208, abs=1e-12)

    def test_rasch_reduction_property(self):
        rng = np.random.default_rng(42)
        for _ in range(500):
            dim = 3
            zeta = flat_state(
                dim=dim,
                half=60,
                beta=rng.normal(0, 1.5, size=dim),
                beta_omega=rng.normal(0, 1.0, size=dim),
                sigma2=float(rng.uniform(0.2, 3.0)),
                sigma_omega2=float(rng.uniform(0.04, 4.0)),
            )
            x = np.array([1.0, rng.normal(), rng.normal()])
            p = response_probability(x, zeta, eps=1e-10)
            expected = ndtr(float(x @ zeta.beta) / zeta.sigma)
            assert p == pytest.approx(expected, abs=1e-10)

    def test_strictly_inside_unit_interval(self):
        zeta = flat_state(beta=np.array([0.0, 40.0]))
        hi = response_probability(np.array([1.0, 1.0]), zeta)
        lo = response_probability(np.array([1.0, -1.0]), zeta)
        assert 0.0 < lo < hi < 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            response_probability(np.array([1.0, 0.0, 0.0]), flat_state())


class TestObservationPmf:
    def test_complement_pair(self):
        zeta = flat_state(sigma_omega2=1e-16)
        zeta.beta_omega = np.array([-0.5, 0.0])
        zeta.mu[zeta.j_act] = 2.0
        x = np.array([1.0, 0.0])
        assert observation_pmf(0, x, zeta) == pytest.approx(1 - ndtr(2.0), abs=1e-9)

    def test_simple_half(self):
        assert observation_pmf(1, np.array([1.0, -1.0]), flat_state()) == pytest.approx(
            0.5, abs=1e-10
        )

    def test_normalization_random_states(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            zeta = flat_state(
                half=40,
                beta=rng.normal(0, 1, size=2),
                beta_omega=rng.normal(0, 1, size=2),
                sigma2=float(rng.uniform(0.3, 2)),
                sigma_omega2=float(rng.uniform(0.3, 2)),
            )
            zeta.mu = rng.normal(0, 0.5, size=zeta.mu.size)
            x = np.array([1.0, rng.normal()])
            total = observation_pmf(0, x, zeta) + observation_pmf(1, x, zeta)
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_invalid_response(self):
        with pytest.raises(ValueError):
            observation_pmf(2, np.array([1.0, 0.0]), flat_state())


class FakeDesign:
    def __init__(self, X, u):
        self.X = np.asarray(X, dtype=float)
        self.u = np.asarray(u, dtype=int)


class TestDataLogLikelihood:
    def test_single_half_probability_cell(self):
        design = FakeDesign([[1.0, -1.0]], [1])
        val = data_log_likelihood(design, flat_state())
        assert val == pytest.approx(np.log(0.5), abs=1e-10)

    def test_duplicated_cell_doubles(self):
        x = [1.0, 0.7]
        zeta = flat_state(beta=np.array([0.2, 0.4]))
        one = data_log_likelihood(FakeDesign([x], [1]), zeta)
        two = data_log_likelihood(FakeDesign([x, x], [1, 1]), zeta)
        assert two == pytest.approx(2 * one, rel=1e-12)

    def test_matches_per_cell_product_oracle(self):
        rng = np.random.default_rng(5)
        zeta = flat_state(half=40, beta=rng.normal(0, 1, 2), beta_omega=rng.normal(0, 1, 2))
        zeta.mu = rng.normal(0, 0.4, size=zeta.mu.size)
        X = np.column_stack([np.ones(4), rng.normal(0, 1, 4)])
        u = np.array([1, 0, 1, 0])
        # brute-force oracle: per-cell pmf product, logged at the end.
        # eps far below the target tolerance so the cell-window truncation
        # (shared window in batch, per-row in the oracle) cannot matter.
        prod = 1.0
        for k in range(4):
            prod *= observation_pmf(int(u[k]), X[k], zeta, eps=1e-14)
        assert data_log_likelihood(FakeDesign(X, u), zeta, eps=1e-14) == pytest.approx(
            np.log(prod), abs=1e-12
        )

    def test_empty_design_rejected(self):
        with pytest.raises(ValueError):
            data_log_likelihood(FakeDesign(np.empty((0, 2)), []), flat_state())


class TestLatentMoments:
    def test_zero_locations_collapse(self):
        zeta = flat_state(beta=np.array([0.3, 1.1]), sigma2=0.64)
        mean, var = latent_moments(np.array([1.0, 2.0]), zeta)
        assert mean == pytest.approx(0.3 + 2.2, abs=1e-9)
        assert var == pytest.approx(0.64, abs=1e-9)

    def test_two_component_oracle(self):
        # half/half cells at locations -1 and +1: mean 0, variance 1 + 1
        zeta = flat_state(half=5)
        zeta.mu[zeta.j_act] = -1.0  # cell 0
        zeta.mu[zeta.j_act + 1] = 1.0  # cell 1
        zeta.beta_omega = np.array([0.0, 0.0])  # eta = 0 splits cells 0 and 1 evenly
        zeta.sigma_omega2 = 1e-16
        mean, var = latent_moments(np.array([1.0, 0.0]), zeta)
        assert mean == pytest.approx(0.0, abs=1e-7)
        assert var == pytest.approx(2.0, abs=1e-6)

    def test_variance_floor_random(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            zeta = flat_state(
                half=40,
                beta=rng.normal(0, 1, 2),
                beta_omega=rng.normal(0, 1, 2),
                sigma2=float(rng.uniform(0.2, 2.5)),
            )
            zeta.mu = rng.normal(0, 0.6, size=zeta.mu.size)
            _, var = latent_moments(np.array([1.0, rng.normal()]), zeta)
            assert var >= zeta.sigma2 - 1e-12


class TestLogPriorDensity:
    def test_scale_outside_support(self):
        zeta = flat_state(sigma_mu=2.0)
        assert log_prior_density(zeta, PriorConfig(b_sigma_mu=1.0)) == -np.inf

    def test_matches_piecewise_oracle(self):
        prior = PriorConfig(b_sigma_mu=1.0, v=10.0, a0=1000.0, v_omega=1.0, a_omega=0.01)
        rng = np.random.default_rng(9)
        zeta = ParameterState(
            mu=rng.normal(0, 0.4, size=7),
            sigma_mu=0.6,
            beta=rng.normal(0, 1, size=4),
            beta_omega=rng.normal(0, 1, size=4),
            sigma2=1.3,
            sigma_omega2=0.8,
        )
        # hand-assembled oracle, term by term
        expected = norm.logpdf(zeta.mu, 0, 0.6).sum()
        expected += -np.log(1.0)
        expected += norm.logpdf(zeta.beta[1:], 0, np.sqrt(1.3 * 10.0)).sum()
        expected += norm.logpdf(zeta.beta_omega, 0, np.sqrt(0.8 * 1.0)).sum()
        expected += invgamma.logpdf(1.3, 500.0, scale=500.0)
        expected += invgamma.logpdf(0.8, 0.005, scale=0.005)
        assert log_prior_density(zeta, prior) == pytest.approx(expected, rel=1e-12)

    def test_zero_slopes_term(self):
        prior = PriorConfig(v=10.0)
        zeta = flat_state(dim=4, sigma2=1.0)
        val = log_prior_density(zeta, prior)
        slope_term = norm.logpdf(np.zeros(3), 0, np.sqrt(10.0)).sum()
        assert slope_term == pytest.approx(3 * norm.logpdf(0, 0, np.sqrt(10.0)), abs=1e-12)
        # removing the slope block from the total leaves the other terms
        rest = (
            norm.logpdf(zeta.mu, 0, zeta.sigma_mu).sum()
            - np.log(prior.b_sigma_mu)
            + norm.logpdf(np.zeros(4), 0, 1.0).sum()
            + invgamma.logpdf(1.0, 500.0, scale=500.0)
            + invgamma.logpdf(1.0, 0.005, scale=0.005)
        )
        assert val == pytest.approx(slope_term + rest, rel=1e-12)

    def test_inverse_gamma_seed_example(self):
        prior = PriorConfig(a0=1000.0)
        zeta = flat_state()
        base = log_prior_density(zeta, prior)
        zeta2 = flat_state(sigma2=2.0)
        delta = log_prior_density(zeta2, prior) - base
        oracle = invgamma.logpdf(2.0, 500, scale=500) - invgamma.logpdf(1.0, 500, scale=500)
        # sigma2 also scales the slope prior, but there are no slopes here
        # beyond zero-valued ones whose density changes with the scale
        slope_change = (
            norm.logpdf(0, 0, np.sqrt(2.0 * prior.v)) - norm.logpdf(0, 0, np.sqrt(prior.v))
        )
        assert delta == pytest.approx(oracle + slope_change, rel=1e-10)


class TestParameterState:
    def test_window_must_be_symmetric_odd(self):
        with pytest.raises(ValueError):
            ParameterState(
                mu=np.zeros(4),
                sigma_mu=0.5,
                beta=np.zeros(2),
                beta_omega=np.zeros(2),
                sigma2=1.0,
                sigma_omega2=1.0,
            )

    def test_coefficient_length_mismatch(self):
        with pytest.raises(ValueError):
            ParameterState(
                mu=np.zeros(3),
                sigma_mu=0.5,
                beta=np.zeros(2),
                beta_omega=np.zeros(3),
                sigma2=1.0,
                sigma_omega2=1.0,
            )

    def test_extension_draws_from_prior_and_is_deterministic(self):
        rng = np.random.default_rng(123)
        zeta = flat_state(half=1)
        zeta.ensure_window(3, rng)
        assert zeta.j_act == 3 and zeta.mu.size == 7
        rng2 = np.random.default_rng(123)
        zeta2 = flat_state(half=1)
        zeta2.ensure_window(3, rng2)
        np.testing.assert_array_equal(zeta.mu, zeta2.mu)

    def test_extension_requires_rng(self):
        zeta = flat_state(half=1)
        with pytest.raises(ValueError):
            zeta.ensure_window(5, None)

    def test_resize_shrinks_center(self):
        zeta = flat_state(half=4)
        zeta.mu = np.arange(-4.0, 5.0)
        zeta.resize_window(2, None)
        np.testing.assert_array_equal(zeta.mu, np.arange(-2.0, 3.0))
