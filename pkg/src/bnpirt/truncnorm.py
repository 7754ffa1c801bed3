"""Vectorized truncated-normal sampling robust to far-tail regions.

Central regions use the inverse-cdf transform on whichever side of the
distribution keeps the cdf values well resolved.  Regions starting beyond
``TAIL_Z`` standard deviations switch to rejection from a translated
exponential proposal, which stays exact where the inverse cdf underflows
(e.g. an interval like (9, 10) on a standard normal).
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr, ndtri

# Standardized bound beyond which inverse-cdf sampling loses precision.
TAIL_Z = 5.0


def _central(rng: np.random.Generator, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Mirror intervals sitting in the upper half so ndtr sees arguments
    # where its output is far from 1 and subtraction keeps precision.
    flip = a + b > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    p_lo = ndtr(lo)
    p_hi = ndtr(hi)
    u = rng.uniform(size=a.shape)
    x = ndtri(p_lo + u * (p_hi - p_lo))
    x = np.clip(x, lo, hi)
    return np.where(flip, -x, x)


def _upper_tail(rng: np.random.Generator, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Rejection from an exponential with rate lam translated to start at a,
    # truncated to (a, b); acceptance uses the exact normal/proposal ratio.
    lam = 0.5 * (a + np.sqrt(a * a + 4.0))
    span = -np.expm1(-lam * (b - a))  # 1 - exp(-lam (b-a)), inf-safe
    out = np.empty_like(a)
    pending = np.ones(a.shape, dtype=bool)
    while pending.any():
        idx = np.flatnonzero(pending)
        u = rng.uniform(size=idx.size)
        x = a[idx] - np.log1p(-u * span[idx]) / lam[idx]
        accept = rng.uniform(size=idx.size) <= np.exp(-0.5 * (x - lam[idx]) ** 2)
        hit = idx[accept]
        out.flat[hit] = x[accept]
        pending.flat[hit] = False
    return out


def trunc_norm(
    rng: np.random.Generator,
    mean,
    sd,
    lower,
    upper,
) -> np.ndarray:
    """Draw from N(mean, sd^2) conditioned on the open interval (lower, upper).

    All arguments broadcast; +-inf bounds are accepted.  Returns an array of
    the broadcast shape (0-d inputs give a 0-d array).
    """
    mean, sd, lower, upper = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (mean, sd, lower, upper))
    )
    if np.any(lower >= upper):
        raise ValueError("lower truncation bound must be below the upper bound")
    a = (lower - mean) / sd
    b = (upper - mean) / sd
    z = np.empty(a.shape)

    upper_tail = a > TAIL_Z
    lower_tail = b < -TAIL_Z
    central = ~(upper_tail | lower_tail)
    if np.any(central):
        z[central] = _central(rng, a[central], b[central])
    if np.any(upper_tail):
        z[upper_tail] = _upper_tail(rng, a[upper_tail], b[upper_tail])
    if np.any(lower_tail):
        z[lower_tail] = -_upper_tail(rng, -b[lower_tail], -a[lower_tail])

    x = mean + sd * z
    # Open-interval contract: push any boundary hit from cdf rounding inward.
    x = np.where(x <= lower, np.nextafter(lower, np.inf), x)
    x = np.where(x >= upper, np.nextafter(upper, -np.inf), x)
    return x
