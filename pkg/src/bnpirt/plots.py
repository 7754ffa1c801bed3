"""Static SVG figures: posterior box plots and trace plots."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import ParameterTable, PosteriorSummary

MAX_TRACE_POINTS = 5000
MAX_BOX_PARAMS = 80


def select_boxplot_names(summary: PosteriorSummary) -> list[str]:
    """Item, covariate, weight-model, and scale parameters (abilities and
    location cells are too numerous for one readable figure)."""
    keep = [
        name
        for name in summary.names
        if not name.startswith(("Ability(", "Omega:Ability(", "mu(", "Intercept", "Omega:Intercept"))
    ]
    return keep[:MAX_BOX_PARAMS]


def boxplot_svg(path, summary: PosteriorSummary, names: list[str] | None = None) -> None:
    """Box plot of marginal posteriors from their five-number summaries."""
    if names is None:
        names = select_boxplot_names(summary)
    index = {name: k for k, name in enumerate(summary.names)}
    stats = []
    for name in names:
        k = index[name]
        stats.append(
            {
                "label": name,
                "whislo": summary.minimum[k],
                "q1": summary.quantiles[k][1],
                "med": summary.quantiles[k][2],
                "q3": summary.quantiles[k][3],
                "whishi": summary.maximum[k],
                "fliers": [],
            }
        )
    fig, ax = plt.subplots(figsize=(max(6.0, 0.35 * len(stats)), 5.0))
    ax.bxp(stats, showfliers=False)
    ax.axhline(0.0, color="grey", linewidth=0.6, linestyle=":")
    ax.set_ylabel("posterior value")
    ax.tick_params(axis="x", rotation=90, labelsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def traceplot_svg(path, table: ParameterTable, names: list[str]) -> None:
    """Stacked trace plots, downsampled to at most MAX_TRACE_POINTS each."""
    if not names:
        raise ValueError("trace plot needs at least one parameter name")
    fig, axes = plt.subplots(len(names), 1, figsize=(8.0, 1.8 * len(names)), squeeze=False)
    n_draws = table.values.shape[0]
    step = max(1, int(np.ceil(n_draws / MAX_TRACE_POINTS)))
    idx = np.arange(0, n_draws, step)
    for ax, name in zip(axes[:, 0], names):
        ax.plot(idx, table.column(name)[idx], linewidth=0.5)
        ax.set_ylabel(name, fontsize=7)
    axes[-1, 0].set_xlabel("stored draw")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
