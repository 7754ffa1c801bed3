"""Core probability model: likelihood, mixture weights, priors, latent moments.

The response model is an infinite location mixture of normal-ogive curves.
A latent response propensity is normal with mean ``mu_j + x'beta`` and
variance ``sigma2``, where the integer mixture index j has ordered-probit
cell probabilities driven by ``x'beta_omega`` and scale ``sigma_omega``.
Only a finite, symmetric window of the ``mu_j`` locations is ever
materialized; indices outside the window are drawn lazily from their
N(0, sigma_mu^2) prior when first needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri
from scipy.stats import invgamma, norm

# Probability clamp bounds: keep log-likelihoods finite in long products.
PROB_FLOOR = 1e-300
PROB_CEIL = 1.0 - 1e-16


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters of the joint prior.

    Attributes
    ----------
    b_sigma_mu : upper bound of the uniform prior on sigma_mu.
    v : variance scale of the normal prior on regression slopes
        (slope variance is sigma2 * v; the intercept is flat).
    a0 : inverse-gamma seed for sigma2, which is IG(a0/2, a0/2).
    v_omega : variance scale of the normal prior on the weight-model
        coefficients (variance sigma_omega2 * v_omega, all coordinates).
    a_omega : inverse-gamma seed for sigma_omega2, IG(a_omega/2, a_omega/2).
    """

    b_sigma_mu: float = 1.0
    v: float = 10.0
    a0: float = 1000.0
    v_omega: float = 1.0
    a_omega: float = 0.01

    def __post_init__(self) -> None:
        for name in ("b_sigma_mu", "v", "a0", "v_omega", "a_omega"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"prior parameter {name} must be strictly positive, got {value}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.b_sigma_mu, self.v, self.a0, self.v_omega, self.a_omega)


@dataclass
class ParameterState:
    """One realization of the model parameters.

    ``mu`` holds the mixture locations for j in [-j_act, +j_act], stored as
    a flat array with index j mapped to position ``j + j_act``.  The window
    is symmetric, always contains j = 0, and grows on demand via
    :meth:`ensure_window`.
    """

    mu: np.ndarray
    sigma_mu: float
    beta: np.ndarray
    beta_omega: np.ndarray
    sigma2: float
    sigma_omega2: float

    def __post_init__(self) -> None:
        self.mu = np.asarray(self.mu, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        self.beta_omega = np.asarray(self.beta_omega, dtype=float)
        if self.mu.ndim != 1 or self.mu.size % 2 != 1:
            raise ValueError("mu must be a 1-d array of odd length (symmetric window about j=0)")
        if self.beta.shape != self.beta_omega.shape:
            raise ValueError(
                f"beta and beta_omega must have identical length, got {self.beta.size} and {self.beta_omega.size}"
            )
        if not (self.sigma_mu > 0 and self.sigma2 > 0 and self.sigma_omega2 > 0):
            raise ValueError("sigma_mu, sigma2 and sigma_omega2 must be strictly positive")

    @property
    def j_act(self) -> int:
        """Half-width of the materialized location window."""
        return (self.mu.size - 1) // 2

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))

    @property
    def sigma_omega(self) -> float:
        return float(np.sqrt(self.sigma_omega2))

    @property
    def dimension(self) -> int:
        return int(self.beta.size)

    def mu_at(self, j: int) -> float:
        return float(self.mu[j + self.j_act])

    def mu_slice(self, j_lo: int, j_hi: int) -> np.ndarray:
        """Locations for j = j_lo..j_hi (inclusive); window must cover them."""
        if max(abs(j_lo), abs(j_hi)) > self.j_act:
            raise IndexError("requested locations outside the materialized window")
        off = self.j_act
        return self.mu[j_lo + off : j_hi + off + 1]

    def ensure_window(self, max_abs_j: int, rng: np.random.Generator | None) -> None:
        """Grow the location window to cover |j| <= max_abs_j.

        New locations are drawn from N(0, sigma_mu^2); this requires an RNG.
        Draw order is fixed (negative side first, ring by ring) so results
        are reproducible for a given generator state.
        """
        if max_abs_j <= self.j_act:
            return
        if rng is None:
            raise ValueError(
                f"location window must grow to |j|={max_abs_j} but no RNG was supplied"
            )
        old = self.j_act
        grown = np.zeros(2 * max_abs_j + 1)
        grown[max_abs_j - old : max_abs_j + old + 1] = self.mu
        for k in range(old + 1, max_abs_j + 1):
            grown[max_abs_j - k] = rng.normal(0.0, self.sigma_mu)
            grown[max_abs_j + k] = rng.normal(0.0, self.sigma_mu)
        self.mu = grown

    def resize_window(self, half_width: int, rng: np.random.Generator | None) -> None:
        """Set the window to exactly |j| <= half_width.

        Shrinking discards locations outside the new bound, which is exact:
        unused locations are independent prior draws and marginalize away.
        Growing draws new locations as in :meth:`ensure_window`.
        """
        if half_width < 0:
            raise ValueError("window half-width must be nonnegative")
        if half_width < self.j_act:
            off = self.j_act
            self.mu = self.mu[off - half_width : off + half_width + 1].copy()
        else:
            self.ensure_window(half_width, rng)

    def copy(self) -> "ParameterState":
        return ParameterState(
            mu=self.mu.copy(),
            sigma_mu=float(self.sigma_mu),
            beta=self.beta.copy(),
            beta_omega=self.beta_omega.copy(),
            sigma2=float(self.sigma2),
            sigma_omega2=float(self.sigma_omega2),
        )


@dataclass(frozen=True)
class MixtureWeightVector:
    """Materialized ordered-probit cell weights over j in [j_lo, j_hi]."""

    j_lo: int
    j_hi: int
    weights: np.ndarray
    tail_mass: float

    def __post_init__(self) -> None:
        if self.weights.size != self.j_hi - self.j_lo + 1:
            raise ValueError("weights length does not match the window bounds")

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.j_lo, self.j_hi + 1)


def _cell_mass(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Phi(hi) - Phi(lo), computed on the numerically favorable side.

    For cells far in the upper tail the difference of upper-tail survival
    values avoids the catastrophic cancellation of 1 - (1 - tiny).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    lower_side = ndtr(hi) - ndtr(lo)
    upper_side = ndtr(-lo) - ndtr(-hi)
    out = np.where(lo + hi > 0, upper_side, lower_side)
    return np.clip(out, 0.0, 1.0)


def _log_cell_mass(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """log(Phi(hi) - Phi(lo)) without underflow, for hi > lo.

    Mirroring keeps both cdf evaluations in the lower tail, where log_ndtr
    is accurate; the difference is then a stable log1p(-exp(.)).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    flip = lo + hi > 0
    a = np.where(flip, -hi, lo)
    b = np.where(flip, -lo, hi)
    log_pa = log_ndtr(a)
    log_pb = log_ndtr(b)
    diff = log_pa - log_pb
    with np.errstate(divide="ignore"):
        out = log_pb + np.log1p(-np.exp(np.minimum(diff, 0.0)))
    return out


def log_cell_weight_matrix(
    j_lo: int, j_hi: int, eta: np.ndarray, sigma_omega: float
) -> np.ndarray:
    """Log cell probabilities for j in [j_lo, j_hi] at each eta; shape (n, n_j)."""
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    edges = (np.arange(j_lo - 1, j_hi + 1)[None, :] - eta[:, None]) / sigma_omega
    return _log_cell_mass(edges[:, :-1], edges[:, 1:])


def mixture_weight(j: int, eta: float, sigma_omega: float) -> float:
    """Ordered-probit cell probability for integer cell j.

    The cell covers the latent interval (j-1, j] on the scale of a normal
    variable with mean ``eta`` and standard deviation ``sigma_omega``, so
    the value depends on (j, eta) only through j - eta.
    """
    if not sigma_omega > 0:
        raise ValueError(f"sigma_omega must be strictly positive, got {sigma_omega}")
    hi = (j - eta) / sigma_omega
    lo = (j - 1 - eta) / sigma_omega
    return float(_cell_mass(lo, hi))


def weight_window(eta: float, sigma_omega: float, eps: float = 1e-10) -> MixtureWeightVector:
    """Materialize the cell weights that capture at least 1 - eps total mass.

    The window is j in [floor(eta - z*sigma_omega), ceil(eta + z*sigma_omega)]
    with z the standard-normal quantile of 1 - eps/2; whatever mass falls
    outside is reported as ``tail_mass``.
    """
    if not sigma_omega > 0:
        raise ValueError(f"sigma_omega must be strictly positive, got {sigma_omega}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    z = ndtri(1.0 - eps / 2.0)
    j_lo = int(np.floor(eta - z * sigma_omega))
    j_hi = int(np.ceil(eta + z * sigma_omega))
    edges = (np.arange(j_lo - 1, j_hi + 1) - eta) / sigma_omega
    weights = _cell_mass(edges[:-1], edges[1:])
    tail = max(0.0, 1.0 - float(weights.sum()))
    return MixtureWeightVector(j_lo=j_lo, j_hi=j_hi, weights=weights, tail_mass=tail)


def cell_weight_matrix(j_lo: int, j_hi: int, eta: np.ndarray, sigma_omega: float) -> np.ndarray:
    """Cell probabilities for every j in [j_lo, j_hi] at each eta; shape (n, n_j)."""
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    edges = (np.arange(j_lo - 1, j_hi + 1)[None, :] - eta[:, None]) / sigma_omega
    return _cell_mass(edges[:, :-1], edges[:, 1:])


def response_probabilities(
    X: np.ndarray,
    zeta: ParameterState,
    eps: float = 1e-10,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """P(response = 1) for each design row of X; vectorized over rows.

    Uses one shared location window wide enough for every row.  Extends the
    materialized ``mu`` window from its prior when required (this mutates
    ``zeta``; pass an RNG whenever the stored window may be too narrow).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != zeta.dimension:
        raise ValueError(
            f"design dimension {X.shape[1]} does not match parameter dimension {zeta.dimension}"
        )
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    eta = X @ zeta.beta_omega
    shift = X @ zeta.beta
    z = ndtri(1.0 - eps / 2.0)
    j_lo = int(np.floor(eta.min() - z * zeta.sigma_omega))
    j_hi = int(np.ceil(eta.max() + z * zeta.sigma_omega))
    zeta.ensure_window(max(abs(j_lo), abs(j_hi)), rng)
    weights = cell_weight_matrix(j_lo, j_hi, eta, zeta.sigma_omega)
    mu = zeta.mu_slice(j_lo, j_hi)
    ogive = ndtr((mu[None, :] + shift[:, None]) / zeta.sigma)
    probs = np.einsum("nj,nj->n", weights, ogive)
    return np.clip(probs, PROB_FLOOR, PROB_CEIL)


def response_probability(
    x: np.ndarray,
    zeta: ParameterState,
    eps: float = 1e-10,
    rng: np.random.Generator | None = None,
) -> float:
    """P(response = 1 | x): mass of the latent normal mixture above zero."""
    return float(response_probabilities(np.asarray(x, dtype=float)[None, :], zeta, eps, rng)[0])


def observation_pmf(
    u: int,
    x: np.ndarray,
    zeta: ParameterState,
    eps: float = 1e-10,
    rng: np.random.Generator | None = None,
) -> float:
    """Bernoulli pmf p^u (1-p)^(1-u) with p = response_probability(x)."""
    if u not in (0, 1):
        raise ValueError(f"response must be 0 or 1, got {u}")
    p = response_probability(x, zeta, eps, rng)
    return p if u == 1 else 1.0 - p


def data_log_likelihood(
    design,
    zeta: ParameterState,
    eps: float = 1e-10,
    rng: np.random.Generator | None = None,
) -> float:
    """Sum of log Bernoulli pmfs over all observed cells of a design.

    ``design`` is anything exposing ``X`` (row matrix) and ``u`` (binary
    responses); unobserved cells simply have no row.
    """
    X = np.asarray(design.X, dtype=float)
    u = np.asarray(design.u)
    if X.shape[0] == 0:
        raise ValueError("design has no observed cells")
    p = response_probabilities(X, zeta, eps, rng)
    p = np.clip(p, PROB_FLOOR, PROB_CEIL)
    return float(np.sum(np.where(u == 1, np.log(p), np.log1p(-p))))


def latent_moments(
    x: np.ndarray,
    zeta: ParameterState,
    eps: float = 1e-10,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Mean and variance of the latent propensity at design vector x.

    The mean averages ``mu_j + x'beta`` over the cell weights; the variance
    adds the between-location spread to the kernel variance, so it is never
    below ``sigma2``.
    """
    x = np.asarray(x, dtype=float)
    if x.size != zeta.dimension:
        raise ValueError(
            f"design dimension {x.size} does not match parameter dimension {zeta.dimension}"
        )
    eta = float(x @ zeta.beta_omega)
    shift = float(x @ zeta.beta)
    window = weight_window(eta, zeta.sigma_omega, eps)
    zeta.ensure_window(max(abs(window.j_lo), abs(window.j_hi)), rng)
    centers = zeta.mu_slice(window.j_lo, window.j_hi) + shift
    w = window.weights / window.weights.sum()
    mean = float(w @ centers)
    variance = float(w @ ((centers - mean) ** 2)) + zeta.sigma2
    return mean, variance


def log_prior_density(zeta: ParameterState, prior: PriorConfig) -> float:
    """Log joint prior density at ``zeta`` (materialized locations only).

    The flat intercept contributes a constant treated as zero.  States
    outside the support (e.g. sigma_mu above its bound) return -inf.
    """
    if not 0 < zeta.sigma_mu <= prior.b_sigma_mu:
        return -np.inf
    total = float(np.sum(norm.logpdf(zeta.mu, loc=0.0, scale=zeta.sigma_mu)))
    total += -np.log(prior.b_sigma_mu)
    slope_scale = np.sqrt(zeta.sigma2 * prior.v)
    total += float(np.sum(norm.logpdf(zeta.beta[1:], loc=0.0, scale=slope_scale)))
    omega_scale = np.sqrt(zeta.sigma_omega2 * prior.v_omega)
    total += float(np.sum(norm.logpdf(zeta.beta_omega, loc=0.0, scale=omega_scale)))
    total += float(invgamma.logpdf(zeta.sigma2, prior.a0 / 2.0, scale=prior.a0 / 2.0))
    total += float(
        invgamma.logpdf(zeta.sigma_omega2, prior.a_omega / 2.0, scale=prior.a_omega / 2.0)
    )
    return total
