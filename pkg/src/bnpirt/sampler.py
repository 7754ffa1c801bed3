"""Latent-variable slice-sampling Gibbs chain for the mixture IRT model.

Each observed cell carries four auxiliary variables: a slice variable
bounding the feasible mixture indices, the integer mixture index itself,
a signed response propensity, and a second propensity that linearizes the
ordered-probit weight model.  Conditional on them every parameter block
has a standard full conditional (normal, inverse-gamma, or a bounded
one-dimensional slice update), so a sweep cycles through exact draws and
the infinite mixture is handled through a finite, data-driven index range.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.special import ndtri

from .design import ObservationDesign
from .model import (
    ParameterState,
    PriorConfig,
    _cell_mass,
    _log_cell_mass,
    cell_weight_matrix,
)
from .truncnorm import trunc_norm

logger = logging.getLogger(__name__)

LOG2PI = float(np.log(2.0 * np.pi))

# Fixed substream indices: every update type owns one RNG stream so that
# draws stay reproducible regardless of how cell-level work is batched.
STREAM_INDEX = {
    "init": 0,
    "u_slice": 1,
    "z": 2,
    "u_star": 3,
    "mu": 4,
    "sigma_mu": 5,
    "beta": 6,
    "sigma2": 7,
    "z_star": 8,
    "beta_omega": 9,
    "sigma_omega2": 10,
    "predictive": 20,
    "simulate": 21,
    "mu_impute": 22,
}


class NumericalError(RuntimeError):
    """Non-finite or numerically unusable state encountered while sampling."""


def substream(seed: int, name: str) -> np.random.Generator:
    """Named deterministic RNG substream derived from one master seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(STREAM_INDEX[name],)))


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    return {name: substream(seed, name) for name in STREAM_INDEX}


@dataclass
class LatentState:
    """Per-cell auxiliary variables, stored flat in design-row order."""

    u_slice: np.ndarray
    z: np.ndarray
    u_star: np.ndarray
    z_star: np.ndarray
    n_max: int

    @property
    def n_cells(self) -> int:
        return int(self.z.size)


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 62_000
    burn_in: int = 2_000
    thin: int = 5
    seed: int = 0
    prior: PriorConfig = field(default_factory=PriorConfig)
    eps: float = 1e-10

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit an unsigned 64-bit integer")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")

    @property
    def n_stored(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


@dataclass
class ChainSamples:
    """Thinned post-burn-in parameter snapshots plus run bookkeeping."""

    draws: list[ParameterState]
    config: ChainConfig
    column_labels: tuple[str, ...]
    acceptance_stats: dict[str, int]

    @property
    def n_draws(self) -> int:
        return len(self.draws)

    @property
    def union_j_act(self) -> int:
        return max(d.j_act for d in self.draws)


def xi(l) -> np.ndarray | float:
    """Decreasing slice-deflation sequence exp(-l) for l >= 0."""
    arr = np.asarray(l)
    if np.any(arr < 0):
        raise ValueError("xi is defined for nonnegative indices only")
    out = np.exp(-arr.astype(float))
    return float(out) if np.isscalar(l) or arr.ndim == 0 else out


def _feasible_half_width(u_slice: np.ndarray) -> np.ndarray:
    """Largest l with exp(-l) > u, elementwise (integer array, >= 0)."""
    cand = np.floor(-np.log(u_slice)).astype(int)
    # float-boundary fixups keep the strict inequality exact
    cand = np.where(np.exp(-(cand + 1.0)) > u_slice, cand + 1, cand)
    cand = np.where((cand > 0) & (np.exp(-cand.astype(float)) <= u_slice), cand - 1, cand)
    return cand


def compute_n_max(u_slice: np.ndarray) -> int:
    """Chain-wide bound on |z| implied by the smallest slice variable."""
    u_slice = np.asarray(u_slice, dtype=float)
    if np.any((u_slice <= 0) | (u_slice >= 1)):
        raise ValueError("slice variables must lie strictly inside (0, 1)")
    return int(_feasible_half_width(u_slice).max())


def update_u_slice(latent: LatentState, rng: np.random.Generator) -> None:
    """Redraw each slice variable uniformly on (0, xi(|z|))."""
    u = rng.uniform(size=latent.z.shape)
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    latent.u_slice = u * np.exp(-np.abs(latent.z).astype(float))


def update_z(
    latent: LatentState,
    zeta: ParameterState,
    design: ObservationDesign,
    rng: np.random.Generator,
) -> None:
    """Redraw the mixture index of every cell from its discrete conditional.

    Support is the slice-feasible index range; log weights combine the
    inverse deflation factor, the propensity normal density at the cell's
    location, and the ordered-probit cell probability.  Extends the
    materialized location window when the feasible range outgrows it.
    """
    widths = _feasible_half_width(latent.u_slice)
    n_max = int(widths.max())
    latent.n_max = n_max
    # resize (not just grow): discarded locations are pure prior draws, so
    # shrinking marginalizes them out exactly and keeps the location-scale
    # feedback loop mixing on a bounded window
    zeta.resize_window(n_max, rng)
    j_grid = np.arange(-n_max, n_max + 1)
    eta = design.X @ zeta.beta_omega
    shift = design.X @ zeta.beta
    mu = zeta.mu_slice(-n_max, n_max)
    resid = latent.u_star[:, None] - shift[:, None] - mu[None, :]
    # cell probabilities in the linear domain; rare underflowed entries are
    # recomputed in log space so extreme states keep correct relative weights
    edges = (np.arange(-n_max - 1, n_max + 1)[None, :] - eta[:, None]) / zeta.sigma_omega
    lo, hi = edges[:, :-1], edges[:, 1:]
    cells = _cell_mass(lo, hi)
    with np.errstate(divide="ignore"):
        log_omega = np.log(cells)
    underflow = cells == 0.0
    if underflow.any():
        log_omega[underflow] = _log_cell_mass(lo[underflow], hi[underflow])
    log_w = np.abs(j_grid)[None, :].astype(float) - 0.5 * (resid / zeta.sigma) ** 2 + log_omega
    log_w[np.abs(j_grid)[None, :] > widths[:, None]] = -np.inf
    log_w -= log_w.max(axis=1, keepdims=True)
    w = np.exp(log_w)
    cum = np.cumsum(w, axis=1)
    totals = cum[:, -1]
    if not np.all(np.isfinite(totals)) or np.any(totals <= 0):
        raise NumericalError("empty feasible index set in mixture-index update")
    u = rng.uniform(size=totals.shape) * totals
    idx = (cum < u[:, None]).sum(axis=1)
    latent.z = j_grid[np.minimum(idx, j_grid.size - 1)]


def update_u_star(
    latent: LatentState,
    zeta: ParameterState,
    design: ObservationDesign,
    rng: np.random.Generator,
) -> None:
    """Redraw response propensities; sign is pinned by the observed response."""
    off = zeta.j_act
    mean = design.X @ zeta.beta + zeta.mu[latent.z + off]
    lower = np.where(design.u == 1, 0.0, -np.inf)
    upper = np.where(design.u == 1, np.inf, 0.0)
    latent.u_star = trunc_norm(rng, mean, zeta.sigma, lower, upper)


def update_mu(
    latent: LatentState,
    zeta: ParameterState,
    design: ObservationDesign,
    rng: np.random.Generator,
) -> None:
    """Conjugate normal redraw of every materialized location.

    Cells assigned to index j contribute their propensity minus the
    regression part; unassigned indices fall back to the N(0, sigma_mu^2)
    prior automatically (zero data precision).
    """
    off = zeta.j_act
    size = zeta.mu.size
    resid = latent.u_star - design.X @ zeta.beta
    counts = np.bincount(latent.z + off, minlength=size)
    sums = np.bincount(latent.z + off, weights=resid, minlength=size)
    precision = counts / zeta.sigma2 + 1.0 / zeta.sigma_mu**2
    mean = (sums / zeta.sigma2) / precision
    zeta.mu = mean + rng.normal(size=size) / np.sqrt(precision)


def update_sigma_mu(
    zeta: ParameterState,
    prior: PriorConfig,
    rng: np.random.Generator,
    stats: dict[str, int] | None = None,
) -> None:
    """One stepping-out slice-sampling sweep for the location scale.

    Target is the product of N(0, sigma_mu^2) densities of the materialized
    locations times the uniform prior indicator on (0, b_sigma_mu). The
    initial bracket width is one tenth of the support.
    """
    b = prior.b_sigma_mu
    n_w = zeta.mu.size
    m2 = float(zeta.mu @ zeta.mu)
    floor = 1e-150  # below this 1/s^2 overflows; the target is ~0 there anyway

    def logf(s: float) -> float:
        if s <= floor:
            return -np.inf if m2 > 0 else -n_w * np.log(max(s, 1e-300))
        return -n_w * np.log(s) - 0.5 * m2 / (s * s)

    x0 = min(zeta.sigma_mu, b)
    log_y = logf(x0) + np.log(rng.uniform())
    width = b / 10.0
    left = max(x0 - width * rng.uniform(), floor)
    right = min(left + width, b)
    while left > floor and logf(left) > log_y:
        left = max(left - width, floor)
        if stats is not None:
            stats["sigma_mu_stepouts"] = stats.get("sigma_mu_stepouts", 0) + 1
    while right < b and logf(right) > log_y:
        right = min(right + width, b)
        if stats is not None:
            stats["sigma_mu_stepouts"] = stats.get("sigma_mu_stepouts", 0) + 1
    while True:
        candidate = left + rng.uniform() * (right - left)
        if candidate > 0 and logf(candidate) > log_y:
            zeta.sigma_mu = float(candidate)
            return
        if candidate < x0:
            left = candidate
        else:
            right = candidate
        if stats is not None:
            stats["sigma_mu_shrinks"] = stats.get("sigma_mu_shrinks", 0) + 1


def _posterior_normal_draw(
    X: np.ndarray,
    y: np.ndarray,
    ridge: np.ndarray,
    noise_var: float,
    rng: np.random.Generator,
    labels: tuple[str, ...],
    chol: np.ndarray | None = None,
    stats: dict[str, int] | None = None,
) -> np.ndarray:
    """Draw from N(A^-1 X'y, noise_var * A^-1) with A = X'X + diag(ridge).

    The prior scales with the noise variance, so the precision matrix A is
    iteration-invariant and its Cholesky factor can be passed in.
    """
    if chol is None:
        A = X.T @ X + np.diag(ridge)
        try:
            chol = cholesky(A, lower=True)
        except np.linalg.LinAlgError:
            jitter = 1e-12 * max(1.0, float(np.trace(A)) / A.shape[0])
            logger.warning("precision factorization failed; retrying with %.1e jitter", jitter)
            if stats is not None:
                stats["precision_jitter"] = stats.get("precision_jitter", 0) + 1
            try:
                chol = cholesky(A + jitter * np.eye(A.shape[0]), lower=True)
            except np.linalg.LinAlgError:
                weak = [labels[k] for k in np.flatnonzero(np.diag(A) <= 1e-10)]
                raise NumericalError(
                    f"singular precision matrix; offending columns: {weak or 'unknown'}"
                ) from None
    mean = cho_solve((chol, True), X.T @ y)
    noise = solve_triangular(chol.T, rng.normal(size=mean.size), lower=False)
    return mean + np.sqrt(noise_var) * noise


def update_beta(
    latent: LatentState,
    zeta: ParameterState,
    design: ObservationDesign,
    prior: PriorConfig,
    rng: np.random.Generator,
    chol: np.ndarray | None = None,
    stats: dict[str, int] | None = None,
) -> None:
    """Conjugate multivariate-normal redraw of the regression coefficients.

    Responses are the propensities with their mixture location removed;
    the intercept has zero prior precision and the slopes share ridge 1/v.
    """
    off = zeta.j_act
    y = latent.u_star - zeta.mu[latent.z + off]
    ridge = np.full(design.dimension, 1.0 / prior.v)
    ridge[0] = 0.0
    zeta.beta = _posterior_normal_draw(
        design.X, y, ridge, zeta.sigma2, rng, design.column_labels, chol, stats
    )


def update_sigma2(
    latent: LatentState,
    zeta: ParameterState,
    design: ObservationDesign,
    prior: PriorConfig,
    rng: np.random.Generator,
) -> None:
    """Inverse-gamma redraw of the kernel variance.

    The slope prior scales with this variance, so the slope quadratic form
    joins the residual sum and the slope count joins the shape; the flat
    intercept contributes neither.
    """
    off = zeta.j_act
    resid = latent.u_star - zeta.mu[latent.z + off] - design.X @ zeta.beta
    slopes = zeta.beta[1:]
    shape = 0.5 * (prior.a0 + resid.size + slopes.size)
    rate = 0.5 * (prior.a0 + float(resid @ resid) + float(slopes @ slopes) / prior.v)
    zeta.sigma2 = rate / rng.gamma(shape)


def update_z_star(
    latent: LatentState,
    zeta: ParameterState,
    design: ObservationDesign,
    rng: np.random.Generator,
) -> None:
    """Redraw the weight-model propensities, truncated to (z - 1, z) per cell."""
    eta = design.X @ zeta.beta_omega
    z = latent.z.astype(float)
    latent.z_star = trunc_norm(rng, eta, zeta.sigma_omega, z - 1.0, z)


def update_beta_omega(
    latent: LatentState,
    zeta: ParameterState,
    design: ObservationDesign,
    prior: PriorConfig,
    rng: np.random.Generator,
    chol: np.ndarray | None = None,
    stats: dict[str, int] | None = None,
) -> None:
    """Conjugate redraw of the weight-model coefficients (ridge 1/v_omega)."""
    ridge = np.full(design.dimension, 1.0 / prior.v_omega)
    zeta.beta_omega = _posterior_normal_draw(
        design.X,
        latent.z_star,
        ridge,
        zeta.sigma_omega2,
        rng,
        design.column_labels,
        chol,
        stats,
    )


def update_sigma_omega2(
    latent: LatentState,
    zeta: ParameterState,
    design: ObservationDesign,
    prior: PriorConfig,
    rng: np.random.Generator,
) -> None:
    """Inverse-gamma redraw of the weight-model variance."""
    resid = latent.z_star - design.X @ zeta.beta_omega
    coef = zeta.beta_omega
    shape = 0.5 * (prior.a_omega + resid.size + coef.size)
    rate = 0.5 * (prior.a_omega + float(resid @ resid) + float(coef @ coef) / prior.v_omega)
    zeta.sigma_omega2 = rate / rng.gamma(shape)


def initial_state(
    design: ObservationDesign,
    prior: PriorConfig,
    rng: np.random.Generator,
) -> tuple[ParameterState, LatentState]:
    """Deterministic-shape starting point: zero coefficients, unit variances,
    all cells on index 0, one prior location, fresh slice/propensity draws."""
    n_obs = design.n_observations
    sigma_mu0 = prior.b_sigma_mu / 2.0
    zeta = ParameterState(
        mu=np.array([rng.normal(0.0, sigma_mu0)]),
        sigma_mu=sigma_mu0,
        beta=np.zeros(design.dimension),
        beta_omega=np.zeros(design.dimension),
        sigma2=1.0,
        sigma_omega2=1.0,
    )
    z = np.zeros(n_obs, dtype=int)
    u_slice = rng.uniform(size=n_obs)
    u_slice = np.where(u_slice == 0.0, np.nextafter(0.0, 1.0), u_slice)
    lower = np.where(design.u == 1, 0.0, -np.inf)
    upper = np.where(design.u == 1, np.inf, 0.0)
    u_star = trunc_norm(rng, zeta.mu_at(0), 1.0, lower, upper)
    z_star = trunc_norm(rng, 0.0, 1.0, -1.0, np.zeros(n_obs))
    latent = LatentState(u_slice=u_slice, z=z, u_star=u_star, z_star=z_star, n_max=0)
    return zeta, latent


def draw_latents_from_model(
    design: ObservationDesign,
    zeta: ParameterState,
    rng: np.random.Generator,
    eps: float = 1e-12,
) -> tuple[LatentState, np.ndarray]:
    """Joint generative draw of all latent variables and binary responses.

    Samples each cell's mixture index from its weight cells, the propensity
    from the indexed normal, the response as the propensity sign, and the
    remaining auxiliaries from their model distributions.  Used by the
    prior-preservation sampler check and by data simulation.
    """
    eta = design.X @ zeta.beta_omega
    shift = design.X @ zeta.beta
    half = ndtri(1.0 - eps / 2.0) * zeta.sigma_omega
    j_lo = int(np.floor(eta.min() - half))
    j_hi = int(np.ceil(eta.max() + half))
    zeta.ensure_window(max(abs(j_lo), abs(j_hi)), rng)
    weights = cell_weight_matrix(j_lo, j_hi, eta, zeta.sigma_omega)
    cum = np.cumsum(weights, axis=1)
    u = rng.uniform(size=eta.size) * cum[:, -1]
    z = np.arange(j_lo, j_hi + 1)[np.minimum((cum < u[:, None]).sum(axis=1), j_hi - j_lo)]
    mu_z = zeta.mu[z + zeta.j_act]
    u_star = rng.normal(mu_z + shift, zeta.sigma)
    responses = (u_star > 0).astype(int)
    su = rng.uniform(size=eta.size)
    su = np.where(su == 0.0, np.nextafter(0.0, 1.0), su)
    u_slice = su * np.exp(-np.abs(z).astype(float))
    zf = z.astype(float)
    z_star = trunc_norm(rng, eta, zeta.sigma_omega, zf - 1.0, zf)
    latent = LatentState(
        u_slice=u_slice,
        z=z,
        u_star=u_star,
        z_star=z_star,
        n_max=compute_n_max(u_slice),
    )
    return latent, responses


def validate_latent_state(latent: LatentState, zeta: ParameterState, design: ObservationDesign) -> None:
    """Assert every per-cell invariant; raises AssertionError on violation."""
    bound = np.exp(-np.abs(latent.z).astype(float))
    assert np.all((latent.u_slice > 0) & (latent.u_slice < bound)), "slice bound violated"
    assert np.all((latent.u_star > 0) == (design.u == 1)), "propensity sign violated"
    zf = latent.z.astype(float)
    assert np.all((latent.z_star > zf - 1.0) & (latent.z_star < zf)), "interval bound violated"
    assert np.all(np.abs(latent.z) <= latent.n_max), "index bound violated"
    assert zeta.j_act >= latent.n_max, "location window narrower than index bound"


def _check_finite(iteration: int, **named_values) -> None:
    for name, value in named_values.items():
        if not np.all(np.isfinite(value)):
            raise NumericalError(f"non-finite {name} at iteration {iteration}")


def gibbs_sweep(
    latent: LatentState,
    zeta: ParameterState,
    design: ObservationDesign,
    prior: PriorConfig,
    streams: dict[str, np.random.Generator],
    chol_beta: np.ndarray | None = None,
    chol_omega: np.ndarray | None = None,
    stats: dict[str, int] | None = None,
) -> None:
    """One full update cycle over all latent variables and parameters."""
    update_u_slice(latent, streams["u_slice"])
    latent.n_max = compute_n_max(latent.u_slice)
    update_z(latent, zeta, design, streams["z"])
    update_u_star(latent, zeta, design, streams["u_star"])
    update_mu(latent, zeta, design, streams["mu"])
    update_sigma_mu(zeta, prior, streams["sigma_mu"], stats)
    update_beta(latent, zeta, design, prior, streams["beta"], chol_beta, stats)
    update_sigma2(latent, zeta, design, prior, streams["sigma2"])
    update_z_star(latent, zeta, design, streams["z_star"])
    update_beta_omega(latent, zeta, design, prior, streams["beta_omega"], chol_omega, stats)
    update_sigma_omega2(latent, zeta, design, prior, streams["sigma_omega2"])


def precompute_precision_factors(
    design: ObservationDesign, prior: PriorConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Cholesky factors of the two coefficient precision matrices.

    Both matrices are iteration-invariant because each coefficient prior
    scales with its model's noise variance.
    """
    XtX = design.X.T @ design.X
    ridge_beta = np.full(design.dimension, 1.0 / prior.v)
    ridge_beta[0] = 0.0
    ridge_omega = np.full(design.dimension, 1.0 / prior.v_omega)
    factors = []
    for ridge, label in ((ridge_beta, "beta"), (ridge_omega, "beta_omega")):
        A = XtX + np.diag(ridge)
        try:
            factors.append(cholesky(A, lower=True))
        except np.linalg.LinAlgError:
            jitter = 1e-12 * max(1.0, float(np.trace(A)) / A.shape[0])
            logger.warning(
                "%s precision factorization failed; retrying with %.1e jitter", label, jitter
            )
            try:
                factors.append(cholesky(A + jitter * np.eye(A.shape[0]), lower=True))
            except np.linalg.LinAlgError:
                weak = [design.column_labels[k] for k in np.flatnonzero(np.diag(A) <= 1e-10)]
                raise NumericalError(
                    f"singular {label} precision matrix; offending columns: {weak or 'unknown'}"
                ) from None
    return factors[0], factors[1]


def run_chain(
    design: ObservationDesign,
    config: ChainConfig,
    validate: bool = False,
) -> ChainSamples:
    """Run the Gibbs chain and return thinned post-burn-in snapshots.

    Fully deterministic for a given config: one master seed feeds a named
    substream per update type.  Aborts with the iteration index if any
    parameter goes non-finite.
    """
    if design.n_observations == 0:
        raise ValueError("design has no observed cells")
    streams = make_streams(int(config.seed))
    zeta, latent = initial_state(design, config.prior, streams["init"])
    chol_beta, chol_omega = precompute_precision_factors(design, config.prior)
    stats: dict[str, int] = {}
    draws: list[ParameterState] = []
    for iteration in range(1, config.iterations + 1):
        gibbs_sweep(latent, zeta, design, config.prior, streams, chol_beta, chol_omega, stats)
        _check_finite(
            iteration,
            mu=zeta.mu,
            sigma_mu=zeta.sigma_mu,
            beta=zeta.beta,
            beta_omega=zeta.beta_omega,
            sigma2=zeta.sigma2,
            sigma_omega2=zeta.sigma_omega2,
        )
        if validate:
            validate_latent_state(latent, zeta, design)
        if iteration > config.burn_in and (iteration - config.burn_in) % config.thin == 0:
            draws.append(zeta.copy())
    stats["mu_window_final_half_width"] = zeta.j_act
    return ChainSamples(
        draws=draws,
        config=config,
        column_labels=design.column_labels,
        acceptance_stats=stats,
    )
