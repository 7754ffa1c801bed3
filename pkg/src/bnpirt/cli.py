"""Command-line front end: fit, simulate, summarize.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.
Flag values override config-file values, which override built-in defaults;
the effective configuration is echoed into the run metadata.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .design import DataError, ingest_csv
from .diagnostics import (
    DiagnosticsError,
    fit_report,
    parameter_table,
    posterior_summary,
    trace_export,
)
from .estimator import MODEL_KINDS, BnpIrt
from .io import read_metadata, read_parameter_values_csv, state_from_named_values
from .model import PriorConfig
from .sampler import ChainConfig, NumericalError, run_chain
from .simulate import default_true_state, prior_true_state, simulate_dataset

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

DEFAULTS = {
    "model": "dichotomous",
    "iterations": 62_000,
    "burnin": 2_000,
    "thin": 5,
    "seed": 0,
    "prior": "1,10,1000,1,0.01",
    "outlier_threshold": 2.0,
    "chains": 1,
    "eps": 1e-10,
}

DEFAULT_TRACE = ["sigma_mu", "sigma2", "sigma_omega2"]


class UsageError(ValueError):
    pass


def _parse_prior(text: str) -> PriorConfig:
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 5:
        raise UsageError(f"--prior needs five comma-separated values, got {text!r}")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"--prior values must be numeric, got {text!r}") from None
    return PriorConfig(*values)


def _resolve(args, config_file: dict, key: str, cast):
    """Flag > config file > default, for one option."""
    flag_value = getattr(args, key, None)
    if flag_value is not None:
        return flag_value
    if key in config_file:
        return cast(config_file[key])
    return DEFAULTS[key]


def _max_workers(requested: int) -> int:
    env = os.environ.get("BNPIRT_THREADS", "").strip()
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise UsageError(f"BNPIRT_THREADS must be an integer, got {env!r}") from None
        if cap < 1:
            raise UsageError("BNPIRT_THREADS must be at least 1")
        return min(requested, cap)
    return min(requested, os.cpu_count() or 1)


def _derived_seed(master: int, chain_index: int) -> int:
    seq = np.random.SeedSequence(entropy=int(master), spawn_key=(1000 + chain_index,))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _add_common_chain_flags(sub) -> None:
    sub.add_argument("--iterations", type=int, default=None)
    sub.add_argument("--burnin", type=int, default=None)
    sub.add_argument("--thin", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--prior", default=None, help="five comma-separated prior values")
    sub.add_argument("--eps", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bnpirt",
        description="Infinite-mixture IRT: fit by slice-sampling MCMC, simulate, summarize.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    fit = subparsers.add_parser("fit", help="fit the model to response data")
    fit.add_argument("--data", required=True, help="responses CSV (person,item,score)")
    fit.add_argument("--covariates", default=None, help="person covariates CSV")
    fit.add_argument("--dimensions", default=None, help="item dimension CSV")
    fit.add_argument("--model", choices=MODEL_KINDS, default=None)
    fit.add_argument("--config", default=None, help="key = value config file")
    fit.add_argument("--outlier-threshold", dest="outlier_threshold", type=float, default=None)
    fit.add_argument("--chains", type=int, default=None)
    fit.add_argument("--out", required=True, help="output directory")
    fit.add_argument("--plots", action="store_true")
    fit.add_argument("--mcci", action="store_true", help="add MCCI columns to the summary")
    fit.add_argument("--trace", nargs="*", default=None, help="parameters to trace ('all' for every one)")
    _add_common_chain_flags(fit)
    fit.set_defaults(func=cmd_fit)

    sim = subparsers.add_parser("simulate", help="generate synthetic dichotomous data")
    sim.add_argument("--n-persons", dest="n_persons", type=int, required=True)
    sim.add_argument("--n-items", dest="n_items", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.add_argument("--zeta", default=None, help="fixed true-parameter CSV (parameter,value)")
    sim.add_argument("--from-prior", dest="from_prior", action="store_true")
    sim.add_argument("--prior", default=None)
    sim.add_argument("--theta-sd", dest="theta_sd", type=float, default=1.0)
    sim.add_argument("--difficulty-sd", dest="difficulty_sd", type=float, default=1.0)
    sim.add_argument("--sigma2", type=float, default=1.0)
    sim.add_argument("--sigma-mu", dest="sigma_mu", type=float, default=0.5)
    sim.add_argument("--sigma-omega2", dest="sigma_omega2", type=float, default=1.0)
    sim.add_argument("--mu-zero", dest="mu_zero", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    summ = subparsers.add_parser("summarize", help="re-summarize a stored run")
    summ.add_argument("--samples", required=True, help="samples CSV from a fit run")
    summ.add_argument("--metadata", default=None, help="metadata sidecar (default: <samples>.meta.txt)")
    summ.add_argument("--out", required=True)
    summ.add_argument("--plots", action="store_true")
    summ.add_argument("--mcci", action="store_true")
    summ.add_argument("--trace", nargs="*", default=None)
    summ.set_defaults(func=cmd_summarize)

    return parser


def _trace_names(flag_value, table) -> list[str]:
    if flag_value is None:
        return [n for n in DEFAULT_TRACE if n in table.names]
    if flag_value == ["all"] or flag_value == []:
        return list(table.names)
    return flag_value


def _write_run_outputs(
    out_dir: Path,
    suffix: str,
    samples,
    report,
    include_mcci: bool,
    trace_flag,
    plots: bool,
    meta_extra: dict,
    written: list[Path],
) -> None:
    table = parameter_table(samples)
    summary = posterior_summary(table)
    paths = {
        "samples": out_dir / f"samples{suffix}.csv",
        "metadata": out_dir / f"samples{suffix}.meta.txt",
        "summary": out_dir / f"summary{suffix}.csv",
        "fit": out_dir / f"fit{suffix}.csv",
        "fit_stats": out_dir / f"fit_stats{suffix}.txt",
        "trace": out_dir / f"trace{suffix}.csv",
    }
    written.extend(paths.values())
    io.write_samples_csv(paths["samples"], table)
    io.write_metadata(paths["metadata"], io.run_metadata(samples.config, table, meta_extra))
    io.write_summary_csv(paths["summary"], summary, include_mcci=include_mcci)
    io.write_fit_csv(paths["fit"], report)
    io.write_fit_stats(paths["fit_stats"], report)
    names = _trace_names(trace_flag, table)
    io.write_trace_csv(paths["trace"], trace_export(table, names))
    if plots:
        from .plots import boxplot_svg, traceplot_svg

        box_path = out_dir / f"boxplot{suffix}.svg"
        trace_path = out_dir / f"traceplot{suffix}.svg"
        written.extend([box_path, trace_path])
        boxplot_svg(box_path, summary)
        traceplot_svg(trace_path, table, names)


def cmd_fit(args) -> int:
    config_file = read_metadata(args.config) if args.config else {}
    model = _resolve(args, config_file, "model", str)
    if model not in MODEL_KINDS:
        raise UsageError(f"--model must be one of {MODEL_KINDS}, got {model!r}")
    iterations = int(_resolve(args, config_file, "iterations", int))
    burn_in = int(_resolve(args, config_file, "burnin", int))
    thin = int(_resolve(args, config_file, "thin", int))
    seed = int(_resolve(args, config_file, "seed", int))
    prior = _parse_prior(_resolve(args, config_file, "prior", str))
    eps = float(_resolve(args, config_file, "eps", float))
    threshold = float(_resolve(args, config_file, "outlier_threshold", float))
    chains = int(_resolve(args, config_file, "chains", int))
    if chains < 1:
        raise UsageError("--chains must be at least 1")

    data = ingest_csv(args.data, args.covariates, args.dimensions)
    estimator = BnpIrt(model=model)
    design = estimator.build_design(data)
    out_dir = io.ensure_out_dir(args.out)

    def chain_seed(k: int) -> int:
        return seed if chains == 1 else _derived_seed(seed, k)

    def run_one(k: int):
        config = ChainConfig(
            iterations=iterations,
            burn_in=burn_in,
            thin=thin,
            seed=chain_seed(k),
            prior=prior,
            eps=eps,
        )
        return run_chain(design, config)

    written: list[Path] = []
    try:
        if chains == 1:
            all_samples = [run_one(1)]
        else:
            with ThreadPoolExecutor(max_workers=_max_workers(chains)) as pool:
                all_samples = list(pool.map(run_one, range(1, chains + 1)))
        for k, samples in enumerate(all_samples, start=1):
            suffix = "" if chains == 1 else f"_chain{k}"
            report = fit_report(design, samples, threshold, label=model)
            meta_extra = {
                "model": model,
                "data_path": args.data,
                "covariates_path": args.covariates or "",
                "dimensions_path": args.dimensions or "",
                "n_persons": data.n_persons,
                "n_items": data.n_items,
                "n_observations": data.n_observations,
                "outlier_threshold": threshold,
                "chains": chains,
                "chain_index": k,
                "master_seed": seed,
            }
            _write_run_outputs(
                out_dir,
                suffix,
                samples,
                report,
                args.mcci,
                args.trace,
                args.plots,
                meta_extra,
                written,
            )
    except Exception:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    print(f"fit complete: {len(all_samples)} chain(s), {all_samples[0].n_draws} stored draws each")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.n_persons < 1 or args.n_items < 1:
        raise UsageError("--n-persons and --n-items must be positive")
    if args.sigma2 <= 0 or args.sigma_omega2 <= 0 or args.sigma_mu <= 0:
        raise UsageError("variance parameters must be strictly positive")
    out_dir = io.ensure_out_dir(args.out)
    labels = (
        ["Intercept"]
        + [f"Ability({p})" for p in range(1, args.n_persons + 1)]
        + [f"Difficulty({i})" for i in range(1, args.n_items + 1)]
    )
    state = None
    if args.zeta:
        state = state_from_named_values(read_parameter_values_csv(args.zeta), labels)
    elif args.from_prior:
        prior = _parse_prior(args.prior) if args.prior else PriorConfig()
        from .sampler import substream

        state = prior_true_state(args.n_persons, args.n_items, prior, substream(args.seed, "simulate"))
    if state is None:
        data, state, _ = simulate_dataset(
            args.n_persons,
            args.n_items,
            args.seed,
            theta_sd=args.theta_sd,
            difficulty_sd=args.difficulty_sd,
            sigma2=args.sigma2,
            sigma_mu=args.sigma_mu,
            sigma_omega2=args.sigma_omega2,
            mu_zero=args.mu_zero,
        )
    else:
        data, state, _ = simulate_dataset(args.n_persons, args.n_items, args.seed, state=state)
    responses_path = out_dir / "responses.csv"
    params_path = out_dir / "true_params.csv"
    io.write_responses_csv(responses_path, data)
    names, values = io.state_to_named_values(state, labels)
    io.write_parameter_values_csv(params_path, names, values)
    print(f"simulated {data.n_observations} responses to {responses_path}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    samples_path = Path(args.samples)
    if args.metadata is not None:
        metadata_path = Path(args.metadata)
    else:
        metadata_path = Path(str(samples_path).removesuffix(".csv") + ".meta.txt")
    samples, table, meta = io.load_samples(samples_path, metadata_path)
    out_dir = io.ensure_out_dir(args.out)
    written: list[Path] = []
    try:
        summary = posterior_summary(table)
        summary_path = out_dir / "summary.csv"
        written.append(summary_path)
        io.write_summary_csv(summary_path, summary, include_mcci=args.mcci)

        model = meta.get("model", "")
        data_path = meta.get("data_path", "")
        if model and data_path:
            if not Path(data_path).exists():
                raise DataError(
                    f"metadata points at missing response file {data_path!r}; cannot rebuild the fit report"
                )
            data = ingest_csv(
                data_path,
                meta.get("covariates_path") or None,
                meta.get("dimensions_path") or None,
            )
            design = BnpIrt(model=model).build_design(data)
            if design.dimension != table.dimension or design.column_labels != samples.column_labels:
                raise DataError("stored samples do not match the design built from the metadata paths")
            threshold = float(meta.get("outlier_threshold", DEFAULTS["outlier_threshold"]))
            report = fit_report(design, samples, threshold, label=model)
            fit_path = out_dir / "fit.csv"
            stats_path = out_dir / "fit_stats.txt"
            written.extend([fit_path, stats_path])
            io.write_fit_csv(fit_path, report)
            io.write_fit_stats(stats_path, report)

        names = _trace_names(args.trace, table)
        trace_path = out_dir / "trace.csv"
        written.append(trace_path)
        io.write_trace_csv(trace_path, trace_export(table, names))
        if args.plots:
            from .plots import boxplot_svg, traceplot_svg

            box_path = out_dir / "boxplot.svg"
            trace_fig = out_dir / "traceplot.svg"
            written.extend([box_path, trace_fig])
            boxplot_svg(box_path, summary)
            traceplot_svg(trace_fig, table, names)
    except Exception:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    print(f"summarized {table.values.shape[0]} stored draws")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses exit code 2 for usage errors
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DiagnosticsError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
