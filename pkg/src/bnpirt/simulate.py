"""Synthetic dichotomous response data from the generative model.

Used for parameter-recovery studies: fix (or draw) a true parameter state,
evaluate the response probability of every (person, item) cell, and draw
Bernoulli responses.  The true state is returned alongside the data so a
fit can be scored against it.
"""

from __future__ import annotations

import numpy as np

from .design import ItemResponseData, ObservationDesign, build_dichotomous
from .model import ParameterState, PriorConfig, response_probabilities
from .sampler import substream


def default_true_state(
    n_persons: int,
    n_items: int,
    rng: np.random.Generator,
    theta_sd: float = 1.0,
    difficulty_sd: float = 1.0,
    sigma2: float = 1.0,
    sigma_mu: float = 0.5,
    sigma_omega2: float = 1.0,
    mu_zero: bool = False,
    window: int = 10,
) -> ParameterState:
    """Spread abilities/difficulties with unit variances: a usable default.

    Abilities and difficulties are N(0, sd^2); weight-model coefficients are
    zero, so mixture cells center on index zero.  ``mu_zero`` forces every
    materialized location to zero, reducing the model to a plain
    normal-ogive response surface.
    """
    dim = 1 + n_persons + n_items
    beta = np.zeros(dim)
    beta[1 : 1 + n_persons] = rng.normal(0.0, theta_sd, size=n_persons)
    beta[1 + n_persons :] = rng.normal(0.0, difficulty_sd, size=n_items)
    mu = np.zeros(2 * window + 1) if mu_zero else rng.normal(0.0, sigma_mu, size=2 * window + 1)
    return ParameterState(
        mu=mu,
        sigma_mu=sigma_mu,
        beta=beta,
        beta_omega=np.zeros(dim),
        sigma2=sigma2,
        sigma_omega2=sigma_omega2,
    )


def prior_true_state(
    n_persons: int,
    n_items: int,
    prior: PriorConfig,
    rng: np.random.Generator,
    window: int = 10,
) -> ParameterState:
    """Draw a full parameter state from the joint prior.

    The flat-prior intercept has no proper distribution and is set to zero.
    Heavy-tailed variance draws (small inverse-gamma seeds) can make the
    resulting data degenerate; prefer the defaults for routine studies.
    """
    sigma2 = float(1.0 / rng.gamma(prior.a0 / 2.0, 2.0 / prior.a0))
    sigma_omega2 = float(1.0 / rng.gamma(prior.a_omega / 2.0, 2.0 / prior.a_omega))
    sigma_mu = float(rng.uniform(0.0, prior.b_sigma_mu))
    sigma_mu = max(sigma_mu, 1e-12)
    dim = 1 + n_persons + n_items
    beta = rng.normal(0.0, np.sqrt(sigma2 * prior.v), size=dim)
    beta[0] = 0.0
    beta_omega = rng.normal(0.0, np.sqrt(sigma_omega2 * prior.v_omega), size=dim)
    mu = rng.normal(0.0, sigma_mu, size=2 * window + 1)
    return ParameterState(
        mu=mu,
        sigma_mu=sigma_mu,
        beta=beta,
        beta_omega=beta_omega,
        sigma2=sigma2,
        sigma_omega2=sigma_omega2,
    )


def simulate_dataset(
    n_persons: int,
    n_items: int,
    seed: int,
    state: ParameterState | None = None,
    eps: float = 1e-10,
    **state_kwargs,
) -> tuple[ItemResponseData, ParameterState, ObservationDesign]:
    """Simulate one response per (person, item) cell.

    Returns the data, the true parameter state actually used, and the
    design the probabilities were evaluated on.  Deterministic in the seed.
    """
    if n_persons < 1 or n_items < 1:
        raise ValueError("need at least one person and one item")
    rng = substream(int(seed), "simulate")
    if state is None:
        state = default_true_state(n_persons, n_items, rng, **state_kwargs)
    expected_dim = 1 + n_persons + n_items
    if state.dimension != expected_dim:
        raise ValueError(
            f"true parameter state has dimension {state.dimension}, expected {expected_dim}"
        )
    persons, items = np.meshgrid(
        np.arange(1, n_persons + 1), np.arange(1, n_items + 1), indexing="ij"
    )
    skeleton = ItemResponseData(
        n_persons=n_persons,
        n_items=n_items,
        persons=persons.ravel(),
        items=items.ravel(),
        scores=np.zeros(n_persons * n_items, dtype=int),
        category_counts=np.ones(n_items, dtype=int),
    )
    design = build_dichotomous(skeleton)
    probs = response_probabilities(design.X, state, eps, rng)
    responses = (rng.uniform(size=probs.size) < probs).astype(int)
    data = ItemResponseData(
        n_persons=n_persons,
        n_items=n_items,
        persons=design.persons,
        items=design.items,
        scores=responses,
        category_counts=np.ones(n_items, dtype=int),
    )
    return data, state, build_dichotomous(data)
