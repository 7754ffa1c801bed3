"""Posterior summaries, predictive fit measures, and chain diagnostics.

Everything here is a pure function of stored draws (and, for fit measures,
the observed design): posterior-predictive response probabilities, their
standardized residuals, the squared-error-plus-variance predictive
criterion, batch-means Monte Carlo confidence intervals, and long-format
trace tables for plotting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import t as student_t

from .design import ObservationDesign
from .model import response_probabilities
from .sampler import ChainSamples, substream

QUANTILE_LEVELS = (0.025, 0.25, 0.50, 0.75, 0.975)


class DiagnosticsError(ValueError):
    """Undefined statistic, insufficient data, or invalid comparison."""


@dataclass(frozen=True)
class FitReport:
    """Per-cell predictive fit plus the global criterion decomposition."""

    label: str
    persons: np.ndarray
    items: np.ndarray
    u: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    residuals: np.ndarray
    gof: float
    penalty: float
    criterion_d: float
    r_squared: float
    outlier_threshold: float

    @property
    def outlier_cells(self) -> list[tuple[int, int]]:
        flagged = np.abs(self.residuals) > self.outlier_threshold
        return [(int(p), int(i)) for p, i in zip(self.persons[flagged], self.items[flagged])]

    def cell_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(zip(self.persons.tolist(), self.items.tolist()))


@dataclass(frozen=True)
class PosteriorSummary:
    """Per-parameter moments, quantiles, extremes, and MCCI half-widths.

    ``quantiles`` has one row per parameter and one column per level in
    QUANTILE_LEVELS; ``mcci_quantiles`` matches its shape.  Half-widths are
    NaN when the chain is too short for a batch-means analysis.
    """

    names: tuple[str, ...]
    mean: np.ndarray
    sd: np.ndarray
    quantiles: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray
    mcci_mean: np.ndarray
    mcci_quantiles: np.ndarray
    n_draws: int


@dataclass(frozen=True)
class ParameterTable:
    """Flattened draws: one named scalar column per model parameter."""

    names: tuple[str, ...]
    values: np.ndarray
    dimension: int
    n_imputed: int = 0

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.names.index(name)]
        except ValueError:
            raise DiagnosticsError(
                f"unknown parameter {name!r}; valid names: {', '.join(self.names)}"
            ) from None


def parameter_table(samples: ChainSamples) -> ParameterTable:
    """Flatten stored draws into a named scalar table.

    Location columns span the union window over all draws; draws whose
    window was narrower get the gaps imputed from their own N(0, sigma_mu^2)
    prior via a dedicated deterministic substream, and the imputation count
    is reported so it can be flagged in run metadata.
    """
    labels = samples.column_labels
    union = samples.union_j_act
    names = (
        list(labels)
        + [f"Omega:{lab}" for lab in labels]
        + ["sigma_mu", "sigma2", "sigma_omega2"]
        + [f"mu({j})" for j in range(-union, union + 1)]
    )
    rng = substream(int(samples.config.seed), "mu_impute")
    n_imputed = 0
    rows = []
    for draw in samples.draws:
        mu_full = np.empty(2 * union + 1)
        half = draw.j_act
        mu_full[union - half : union + half + 1] = draw.mu
        gap = 2 * (union - half)
        if gap:
            n_imputed += gap
            fill = rng.normal(0.0, draw.sigma_mu, size=gap)
            mu_full[: union - half] = fill[: union - half]
            mu_full[union + half + 1 :] = fill[union - half :]
        rows.append(
            np.concatenate(
                [
                    draw.beta,
                    draw.beta_omega,
                    [draw.sigma_mu, draw.sigma2, draw.sigma_omega2],
                    mu_full,
                ]
            )
        )
    return ParameterTable(
        names=tuple(names),
        values=np.asarray(rows),
        dimension=len(labels),
        n_imputed=n_imputed,
    )


def predictive_means(
    design_X: np.ndarray,
    samples: ChainSamples,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Posterior-predictive P(response = 1) per design row, averaged over draws."""
    if samples.n_draws == 0:
        raise DiagnosticsError("no stored draws")
    if rng is None:
        rng = substream(int(samples.config.seed), "predictive")
    X = np.atleast_2d(np.asarray(design_X, dtype=float))
    acc = np.zeros(X.shape[0])
    for draw in samples.draws:
        acc += response_probabilities(X, draw, samples.config.eps, rng)
    return acc / samples.n_draws


def posterior_predictive(
    x: np.ndarray,
    samples: ChainSamples,
    rng: np.random.Generator | None = None,
) -> tuple[float, float, float]:
    """(pmf at 1, predictive mean, predictive variance) for one design vector.

    The response is Bernoulli under the predictive distribution, so the mean
    equals the pmf at 1 and the variance is mean * (1 - mean).
    """
    pmf1 = float(predictive_means(np.asarray(x, dtype=float)[None, :], samples, rng)[0])
    return pmf1, pmf1, pmf1 * (1.0 - pmf1)


def standardized_residual(
    u: int,
    x: np.ndarray,
    samples: ChainSamples,
    rng: np.random.Generator | None = None,
) -> float:
    """(u - predictive mean) / predictive standard deviation for one cell."""
    _, mean, variance = posterior_predictive(x, samples, rng)
    if variance == 0.0:
        raise DiagnosticsError("predictive variance is zero; residual undefined")
    return (u - mean) / float(np.sqrt(variance))


def criterion_from_predictions(
    u: np.ndarray, means: np.ndarray, variances: np.ndarray
) -> tuple[float, float, float]:
    """(gof, penalty, criterion) from a per-cell prediction table."""
    u = np.asarray(u, dtype=float)
    gof = float(np.sum((u - means) ** 2))
    penalty = float(np.sum(variances))
    return gof, penalty, gof + penalty


def r_squared_from_predictions(u: np.ndarray, means: np.ndarray) -> float:
    u = np.asarray(u, dtype=float)
    tss = float(np.sum((u - u.mean()) ** 2))
    if tss == 0.0:
        raise DiagnosticsError("all responses identical; R-squared undefined")
    gof = float(np.sum((u - means) ** 2))
    return 1.0 - gof / tss


def predictive_criterion(
    design: ObservationDesign,
    samples: ChainSamples,
    rng: np.random.Generator | None = None,
) -> tuple[float, float, float]:
    """Squared prediction error plus predictive-variance penalty over all cells."""
    means = predictive_means(design.X, samples, rng)
    return criterion_from_predictions(design.u, means, means * (1.0 - means))


def r_squared(
    design: ObservationDesign,
    samples: ChainSamples,
    rng: np.random.Generator | None = None,
) -> float:
    """Proportion of response variance explained by the predictive means."""
    means = predictive_means(design.X, samples, rng)
    return r_squared_from_predictions(design.u, means)


def fit_report(
    design: ObservationDesign,
    samples: ChainSamples,
    outlier_threshold: float = 2.0,
    label: str = "model",
    rng: np.random.Generator | None = None,
) -> FitReport:
    """Full per-cell residual analysis and global fit criteria."""
    means = predictive_means(design.X, samples, rng)
    variances = means * (1.0 - means)
    if np.any(variances == 0.0):
        raise DiagnosticsError("degenerate predictive variance; residuals undefined")
    residuals = (design.u - means) / np.sqrt(variances)
    gof, penalty, criterion = criterion_from_predictions(design.u, means, variances)
    return FitReport(
        label=label,
        persons=design.persons.copy(),
        items=design.items.copy(),
        u=design.u.copy(),
        means=means,
        variances=variances,
        residuals=residuals,
        gof=gof,
        penalty=penalty,
        criterion_d=criterion,
        r_squared=r_squared_from_predictions(design.u, means),
        outlier_threshold=outlier_threshold,
    )


def batch_means_mcci(
    scalar_chain: np.ndarray,
    level: float = 0.95,
    quantile: float | None = None,
) -> tuple[float, float]:
    """Batch-means Monte Carlo confidence interval for a chain statistic.

    The chain is split into floor(sqrt(S)) equal batches (trailing draws
    beyond an even split are ignored for the batching).  With ``quantile``
    unset the statistic is the mean; otherwise the empirical quantile is
    taken per batch.  Returns the full-chain estimate and the Student-t
    half-width of the batch statistics at the given confidence level.
    """
    chain = np.asarray(scalar_chain, dtype=float)
    n = chain.size
    if n < 100:
        raise DiagnosticsError(f"chain of length {n} is too short for batch means (need >= 100)")
    if not 0 < level < 1:
        raise DiagnosticsError(f"confidence level must lie in (0, 1), got {level}")
    n_batches = int(np.floor(np.sqrt(n)))
    batch_size = n // n_batches
    used = chain[: n_batches * batch_size].reshape(n_batches, batch_size)
    if quantile is None:
        estimate = float(chain.mean())
        batch_stats = used.mean(axis=1)
    else:
        estimate = float(np.quantile(chain, quantile))
        batch_stats = np.quantile(used, quantile, axis=1)
    se = float(np.std(batch_stats, ddof=1)) / np.sqrt(n_batches)
    t_crit = float(student_t.ppf(0.5 + level / 2.0, n_batches - 1))
    return estimate, t_crit * se


def posterior_summary(
    samples: ChainSamples | ParameterTable, level: float = 0.95
) -> PosteriorSummary:
    """Per-parameter posterior summaries with batch-means MCCIs.

    MCCI half-widths are NaN when the chain is shorter than the batch-means
    minimum, so toy runs still summarize cleanly.
    """
    table = samples if isinstance(samples, ParameterTable) else parameter_table(samples)
    values = table.values
    if values.shape[0] == 0:
        raise DiagnosticsError("no stored draws")
    q = np.quantile(values, QUANTILE_LEVELS, axis=0).T
    n_params = values.shape[1]
    mcci_mean = np.full(n_params, np.nan)
    mcci_q = np.full((n_params, len(QUANTILE_LEVELS)), np.nan)
    if values.shape[0] >= 100:
        for k in range(n_params):
            _, mcci_mean[k] = batch_means_mcci(values[:, k], level)
            for qi, ql in enumerate(QUANTILE_LEVELS):
                _, mcci_q[k, qi] = batch_means_mcci(values[:, k], level, quantile=ql)
    return PosteriorSummary(
        names=table.names,
        mean=values.mean(axis=0),
        sd=np.std(values, axis=0, ddof=1) if values.shape[0] > 1 else np.zeros(n_params),
        quantiles=q,
        minimum=values.min(axis=0),
        maximum=values.max(axis=0),
        mcci_mean=mcci_mean,
        mcci_quantiles=mcci_q,
        n_draws=values.shape[0],
    )


def compare_models(reports: list[FitReport]) -> list[FitReport]:
    """Rank fit reports by ascending criterion (ties: gof, then label).

    All reports must cover the same observed cells; otherwise the criteria
    are not comparable.
    """
    if len(reports) < 2:
        raise DiagnosticsError("model comparison needs at least two fit reports")
    cells = reports[0].cell_set()
    for report in reports[1:]:
        if report.cell_set() != cells:
            raise DiagnosticsError(
                f"fit reports {reports[0].label!r} and {report.label!r} cover different cells"
            )
    return sorted(reports, key=lambda r: (r.criterion_d, r.gof, r.label))


def trace_export(
    samples: ChainSamples | ParameterTable,
    parameter_names: list[str] | None = None,
) -> list[tuple[int, str, float]]:
    """Long-format (draw index, parameter, value) rows, draw-major.

    An empty or missing name list exports every parameter in table order.
    """
    table = samples if isinstance(samples, ParameterTable) else parameter_table(samples)
    if not parameter_names:
        selected = list(range(len(table.names)))
    else:
        selected = []
        for name in parameter_names:
            if name not in table.names:
                raise DiagnosticsError(
                    f"unknown parameter {name!r}; valid names: {', '.join(table.names)}"
                )
            selected.append(table.names.index(name))
    rows = []
    for s in range(table.values.shape[0]):
        for k in selected:
            rows.append((s, table.names[k], float(table.values[s, k])))
    return rows
