"""CSV and metadata readers/writers for runs, summaries, and fit reports.

Floats are serialized with ``repr``, the shortest representation that
round-trips exactly, so re-summarizing stored draws reproduces the original
outputs byte for byte.  Metadata sidecars are flat ``key = value`` text.
"""

from __future__ import annotations

import csv
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .design import DataError
from .diagnostics import QUANTILE_LEVELS, FitReport, ParameterTable, PosteriorSummary
from .model import ParameterState, PriorConfig
from .sampler import ChainConfig, ChainSamples


def _fmt(value: float) -> str:
    return repr(float(value))


def write_samples_csv(path, table: ParameterTable) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(table.names)
        for row in table.values:
            writer.writerow([_fmt(v) for v in row])


def write_metadata(path, entries: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for key, value in entries.items():
            handle.write(f"{key} = {value}\n")


def read_metadata(path) -> dict[str, str]:
    entries: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line_num, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"{path}:{line_num}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    return entries


def run_metadata(
    config: ChainConfig,
    table: ParameterTable,
    extra: dict | None = None,
) -> dict:
    meta = {
        "software_version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "iterations": config.iterations,
        "burn_in": config.burn_in,
        "thin": config.thin,
        "seed": config.seed,
        "prior_b_sigma_mu": _fmt(config.prior.b_sigma_mu),
        "prior_v": _fmt(config.prior.v),
        "prior_a0": _fmt(config.prior.a0),
        "prior_v_omega": _fmt(config.prior.v_omega),
        "prior_a_omega": _fmt(config.prior.a_omega),
        "eps": _fmt(config.eps),
        "stored_draws": table.values.shape[0],
        "dimension": table.dimension,
        "mu_imputed_values": table.n_imputed,
    }
    if extra:
        meta.update(extra)
    return meta


def load_samples(samples_path, metadata_path) -> tuple[ChainSamples, ParameterTable, dict[str, str]]:
    """Rebuild stored draws from a samples CSV and its metadata sidecar.

    The column layout is positional: design-coefficient block, weight-model
    block of equal width, the three scale parameters, then the location
    window.  Any mismatch with the metadata is an integrity error.
    """
    meta = read_metadata(metadata_path)
    for key in ("dimension", "stored_draws", "iterations", "burn_in", "thin", "seed"):
        if key not in meta:
            raise DataError(f"{metadata_path}: missing required key {key!r}")
    dim = int(meta["dimension"])
    with open(samples_path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            names = tuple(next(reader))
        except StopIteration:
            raise DataError(f"{samples_path}: empty file") from None
        values = np.array([[float(f) for f in row] for row in reader if row])
    n_scalars = 3
    n_mu = len(names) - 2 * dim - n_scalars
    if n_mu < 1 or n_mu % 2 == 0:
        raise DataError(
            f"{samples_path}: column count {len(names)} inconsistent with dimension {dim}"
        )
    if values.ndim != 2 or values.shape[0] != int(meta["stored_draws"]):
        found = 0 if values.ndim != 2 else values.shape[0]
        raise DataError(
            f"{samples_path}: {found} draws found but metadata records {meta['stored_draws']}"
        )
    expected_omega = tuple(f"Omega:{lab}" for lab in names[:dim])
    if names[dim : 2 * dim] != expected_omega:
        raise DataError(f"{samples_path}: weight-coefficient columns do not mirror the design columns")
    prior = PriorConfig(
        b_sigma_mu=float(meta.get("prior_b_sigma_mu", 1.0)),
        v=float(meta.get("prior_v", 10.0)),
        a0=float(meta.get("prior_a0", 1000.0)),
        v_omega=float(meta.get("prior_v_omega", 1.0)),
        a_omega=float(meta.get("prior_a_omega", 0.01)),
    )
    config = ChainConfig(
        iterations=int(meta["iterations"]),
        burn_in=int(meta["burn_in"]),
        thin=int(meta["thin"]),
        seed=int(meta["seed"]),
        prior=prior,
        eps=float(meta.get("eps", 1e-10)),
    )
    draws = []
    for row in values:
        draws.append(
            ParameterState(
                mu=row[2 * dim + n_scalars :].copy(),
                sigma_mu=float(row[2 * dim]),
                beta=row[:dim].copy(),
                beta_omega=row[dim : 2 * dim].copy(),
                sigma2=float(row[2 * dim + 1]),
                sigma_omega2=float(row[2 * dim + 2]),
            )
        )
    samples = ChainSamples(
        draws=draws, config=config, column_labels=names[:dim], acceptance_stats={}
    )
    table = ParameterTable(names=names, values=values, dimension=dim)
    return samples, table, meta


def write_summary_csv(path, summary: PosteriorSummary, include_mcci: bool = False) -> None:
    q_names = [f"q{100 * q:g}" for q in QUANTILE_LEVELS]
    header = ["parameter", "mean", "sd"] + q_names + ["min", "max"]
    if include_mcci:
        header += ["mcci_mean"] + [f"mcci_{name}" for name in q_names]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for k, name in enumerate(summary.names):
            row = [name, _fmt(summary.mean[k]), _fmt(summary.sd[k])]
            row += [_fmt(v) for v in summary.quantiles[k]]
            row += [_fmt(summary.minimum[k]), _fmt(summary.maximum[k])]
            if include_mcci:
                row.append(_fmt(summary.mcci_mean[k]))
                row += [_fmt(v) for v in summary.mcci_quantiles[k]]
            writer.writerow(row)


def write_fit_csv(path, report: FitReport) -> None:
    flagged = np.abs(report.residuals) > report.outlier_threshold
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["person", "item", "u", "mean", "variance", "residual", "outlier"])
        for k in range(report.u.size):
            writer.writerow(
                [
                    int(report.persons[k]),
                    int(report.items[k]),
                    int(report.u[k]),
                    _fmt(report.means[k]),
                    _fmt(report.variances[k]),
                    _fmt(report.residuals[k]),
                    int(flagged[k]),
                ]
            )


def write_fit_stats(path, report: FitReport) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"label = {report.label}\n")
        handle.write(f"n_cells = {report.u.size}\n")
        handle.write(f"gof = {_fmt(report.gof)}\n")
        handle.write(f"penalty = {_fmt(report.penalty)}\n")
        handle.write(f"criterion_d = {_fmt(report.criterion_d)}\n")
        handle.write(f"r_squared = {_fmt(report.r_squared)}\n")
        handle.write(f"outlier_threshold = {_fmt(report.outlier_threshold)}\n")
        handle.write(f"n_outliers = {len(report.outlier_cells)}\n")


def write_trace_csv(path, rows: list[tuple[int, str, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["draw", "parameter", "value"])
        for draw, name, value in rows:
            writer.writerow([draw, name, _fmt(value)])


def write_responses_csv(path, data) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["person", "item", "score"])
        for p, i, s in zip(data.persons, data.items, data.scores):
            writer.writerow([int(p), int(i), int(s)])


def write_parameter_values_csv(path, names, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["parameter", "value"])
        for name, value in zip(names, values):
            writer.writerow([name, _fmt(value)])


def read_parameter_values_csv(path) -> dict[str, float]:
    out: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["parameter", "value"]:
            raise DataError(f"{path}: expected header parameter,value")
        for row in reader:
            if not row:
                continue
            try:
                out[row[0]] = float(row[1])
            except (IndexError, ValueError):
                raise DataError(f"{path}: bad row {row}") from None
    return out


def state_to_named_values(state: ParameterState, labels) -> tuple[list[str], np.ndarray]:
    """Flatten one parameter state with the same naming as the samples table."""
    half = state.j_act
    names = (
        list(labels)
        + [f"Omega:{lab}" for lab in labels]
        + ["sigma_mu", "sigma2", "sigma_omega2"]
        + [f"mu({j})" for j in range(-half, half + 1)]
    )
    values = np.concatenate(
        [
            state.beta,
            state.beta_omega,
            [state.sigma_mu, state.sigma2, state.sigma_omega2],
            state.mu,
        ]
    )
    return names, values


def state_from_named_values(values: dict[str, float], labels) -> ParameterState:
    """Inverse of :func:`state_to_named_values` for a known design layout."""
    try:
        beta = np.array([values[lab] for lab in labels])
        beta_omega = np.array([values[f"Omega:{lab}"] for lab in labels])
        scalars = [values["sigma_mu"], values["sigma2"], values["sigma_omega2"]]
    except KeyError as err:
        raise DataError(f"parameter file is missing entry {err}") from None
    mu_entries = sorted(
        (int(name[3:-1]), v) for name, v in values.items() if name.startswith("mu(")
    )
    if not mu_entries:
        raise DataError("parameter file has no location entries mu(j)")
    js = [j for j, _ in mu_entries]
    half = max(abs(js[0]), abs(js[-1]))
    mu = np.zeros(2 * half + 1)
    for j, v in mu_entries:
        mu[j + half] = v
    return ParameterState(
        mu=mu,
        sigma_mu=scalars[0],
        beta=beta,
        beta_omega=beta_omega,
        sigma2=scalars[1],
        sigma_omega2=scalars[2],
    )


def ensure_out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out
