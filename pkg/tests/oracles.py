"""Shared independent oracles for distributional tests.

The grid oracle normalizes an unnormalized log-density by trapezoid
quadrature on a fine grid and interpolates the resulting cdf, giving a
reference distribution that never touches the sampler implementations.
"""

import numpy as np
from scipy.stats import kstest


def grid_cdf(log_density, lo: float, hi: float, n: int = 40001):
    grid = np.linspace(lo, hi, n)
    logf = np.array([log_density(x) for x in grid], dtype=float)
    logf -= logf[np.isfinite(logf)].max()
    dens = np.exp(logf)
    cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2.0 * np.diff(grid))])
    cdf /= cdf[-1]

    def cdf_fn(x):
        return np.interp(x, grid, cdf)

    return cdf_fn


def ks_against_grid(draws, log_density, lo: float, hi: float, n: int = 40001):
    return kstest(np.asarray(draws), grid_cdf(log_density, lo, hi, n))
