"""``regime-pcmci`` command line.

Subcommands::

    simulate   write synthetic dataset bundles for a catalog experiment
    discover   fit regimes and causal networks to a CSV time series
    evaluate   score fits against ground truth and aggregate a results table
    select-k   choose the number of regimes by AICc
    climate    two-regime analysis of a pair of monthly climate indices

Exit codes: 0 success, 2 configuration error, 3 data error, 4 all
annealings failed.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .climate import CLIMATE_PARAMETERS, load_climate_pair, summarize_climate
from .core import DataError, InsufficientSamplesError, TimeSeries, load_csv
from .driver import AllAnnealingsFailedError, AnnealingResult, fit_annealed, fit_known_regimes, select_n_regimes
from .io import (ConfigError, RunConfig, coefficient_records, fit_from_dict, fit_to_dict, load_config, read_json,
                 read_truth, write_bundle, write_json, write_manifest, write_regimes_csv, write_rows_csv)
from .metrics import SUMMARY_COLUMNS, evaluate, summarize
from .synthetic import experiment_catalog

log = logging.getLogger("regime_pcmci")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_FAILED = 0, 2, 3, 4

ANNEALING_COLUMNS = ("seed", "objective", "prediction_error", "iterations_used", "converged", "n_links", "failure")


def _out_dir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {path}: {exc}") from None
    return path


def _with_workers(cfg: RunConfig, workers) -> RunConfig:
    return replace(cfg, n_jobs=workers) if workers is not None else cfg


def _load_series(path, cfg: RunConfig) -> TimeSeries:
    return load_csv(path, has_header=True, standardize=cfg.standardize)


def cmd_simulate(args) -> int:
    catalog = experiment_catalog()
    if args.experiment not in catalog:
        raise ConfigError(f"unknown experiment {args.experiment!r}; choose from {sorted(catalog)}")
    if args.realisations < 1:
        raise ConfigError("--realisations must be at least 1")
    exp = catalog[args.experiment]
    out = _out_dir(args.out)
    cfg = RunConfig(n_regimes=exp.n_regimes, switch_budget=exp.switch_budget, n_iterations=exp.n_iterations,
                    n_annealings=exp.n_annealings, tau_max=exp.pcmci.tau_max, alpha=exp.pcmci.alpha,
                    alpha_pc=exp.pcmci.alpha_pc, seed=args.seed, standardize=False, experiment=exp.name,
                    n_realisations=args.realisations)
    files = ["config.json"]
    for r in range(args.realisations):
        name = f"{exp.name}_{r:03d}"
        seed = args.seed + r
        series, truth = exp.generate(seed)
        write_bundle(out / name, series, truth, exp.name, seed)
        files += [f"{name}/series.csv", f"{name}/truth.json"]
        log.info("wrote %s (T=%d, N_X=%d)", name, series.T, series.n_vars)
    write_json(out / "config.json", cfg.to_dict(runtime=False))
    write_manifest(out, "simulate", cfg, args.seed, files)
    return EXIT_OK


def _annealing_rows(annealing: AnnealingResult) -> list[dict]:
    rows = []
    for run in sorted(annealing.runs, key=lambda r: r.seed):
        rows.append({"seed": run.seed, "objective": run.objective, "prediction_error": run.prediction_error,
                     "iterations_used": run.iterations_used, "converged": run.converged,
                     "n_links": int(run.coefficients.support().sum()), "failure": run.failure})
    return rows


def _write_fit_dir(out: Path, series: TimeSeries, cfg: RunConfig, annealing: AnnealingResult):
    best = annealing.best
    fit = fit_to_dict(best, cfg.tau_max, cfg.switch_budget)
    fit["variable_names"] = list(series.variable_names)
    fit["failed_annealings"] = list(annealing.failures)
    write_json(out / "fit.json", fit)
    write_json(out / "network.json", {
        "variable_names": list(series.variable_names),
        "links": coefficient_records(best.coefficients.phi, best.pvalues),
    })
    write_regimes_csv(out / "regimes.csv", best, series.time_index)
    write_rows_csv(out / "annealings.csv", _annealing_rows(annealing), ANNEALING_COLUMNS)
    ranked = sorted(annealing.runs, key=lambda r: (r.prediction_error, r.seed))
    write_rows_csv(out / "annealing_rank.csv",
                   [{"rank": n, "seed": r.seed, "prediction_error": r.prediction_error} for n, r in enumerate(ranked)],
                   ("rank", "seed", "prediction_error"))
    write_json(out / "config.json", cfg.to_dict(runtime=False))
    files = ["fit.json", "network.json", "regimes.csv", "annealings.csv", "annealing_rank.csv", "config.json"]
    return files


def cmd_discover(args) -> int:
    cfg = _with_workers(load_config(args.config), args.workers)
    data = args.data or cfg.data
    out_path = args.out or cfg.out
    if data is None or out_path is None:
        raise ConfigError("--data and --out are required (or set 'data' and 'out' in the config)")
    series = _load_series(data, cfg)
    out = _out_dir(out_path)
    annealing = fit_annealed(series, cfg.driver())
    for msg in annealing.failures:
        log.warning("annealing failed: %s", msg)
    files = _write_fit_dir(out, series, cfg, annealing)
    write_manifest(out, "discover", cfg, cfg.seed, files)
    log.info("best run seed %d, prediction error %.4f", annealing.best.seed, annealing.best.prediction_error)
    return EXIT_OK


def _aggregate_path(out: Path) -> Path:
    return out.with_name(out.stem + "_aggregate.csv")


def cmd_evaluate(args) -> int:
    if len(args.fit) != len(args.truth):
        raise ConfigError(f"{len(args.fit)} fit directories but {len(args.truth)} truth files")
    records, reports, references = [], [], []
    for fit_dir, truth_path in zip(args.fit, args.truth):
        fit_dir = Path(fit_dir)
        cfg = RunConfig.from_dict(read_json(fit_dir / "config.json"))
        try:
            result = fit_from_dict(read_json(fit_dir / "fit.json"))
        except KeyError as exc:
            raise DataError(f"{fit_dir}/fit.json: missing field {exc}") from None
        truth = read_truth(truth_path)
        series = truth.series.standardized() if cfg.standardize else truth.series
        if result.assignment.T != series.T or result.coefficients.n_vars != series.n_vars:
            raise DataError(f"{fit_dir} and {truth_path} disagree in T or N_X")
        if result.n_regimes != truth.truth.assignment.n_regimes:
            raise DataError(f"{fit_dir} has {result.n_regimes} regimes, truth has {truth.truth.assignment.n_regimes}")
        tau = max(cfg.tau_max, truth.truth.coefficients.tau_max)
        ref_phi = truth.truth.coefficients.padded(tau)
        report = evaluate(series, result, truth.truth.assignment, ref_phi, tau)
        reference = None
        if not args.no_reference:
            try:
                known = fit_known_regimes(series, truth.truth.assignment, cfg.pcmci())
                reference = evaluate(series, known, truth.truth.assignment, ref_phi, tau)
            except InsufficientSamplesError as exc:
                log.warning("known-regime reference skipped for %s: %s", truth_path, exc)
        reports.append(report)
        references.append(reference)
        records.append({"fit": str(fit_dir), "truth": str(truth_path), "report": report.to_dict(),
                        "reference": reference.to_dict() if reference is not None else None})
    aggregate = summarize(reports, references, args.max_delta_gamma)
    out = Path(args.out)
    _out_dir(out.parent)
    write_json(out, {"realisations": records,
                     "aggregate": {k: (None if isinstance(v, float) and math.isnan(v) else v)
                                   for k, v in aggregate.items()},
                     "max_delta_gamma": args.max_delta_gamma})
    write_rows_csv(_aggregate_path(out), [aggregate], SUMMARY_COLUMNS)
    return EXIT_OK


def _parse_candidates(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            values = list(range(int(lo), int(hi) + 1))
        else:
            values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse candidates {text!r}; use e.g. 1,2,3 or 1..4") from None
    if not values or min(values) < 1:
        raise ConfigError("candidates must be positive integers")
    return values


def cmd_select_k(args) -> int:
    cfg = _with_workers(load_config(args.config), args.workers)
    candidates = _parse_candidates(args.candidates)
    series = _load_series(args.data, cfg)
    report = select_n_regimes(series, cfg.driver(), candidates, cfg.plateau_tol)
    rows = [{"n_regimes": c.n_regimes, "switch_budget": c.switch_budget, "objective": c.objective,
             "prediction_error": c.prediction_error, "n_para": c.n_para, "loglik": c.loglik,
             "aicc": c.aicc if math.isfinite(c.aicc) else None, "chosen": c.chosen} for c in report.candidates]
    out = Path(args.out)
    _out_dir(out.parent)
    write_json(out, {"chosen": report.chosen, "plateau_tol": report.plateau_tol, "candidates": rows,
                     "config_hash": cfg.hash()})
    log.info("chosen number of regimes: %d", report.chosen)
    return EXIT_OK


def cmd_climate(args) -> int:
    params = dict(CLIMATE_PARAMETERS)
    if args.config:
        params.update(read_json(args.config))
    cfg = _with_workers(RunConfig.from_dict(params), args.workers)
    series = load_climate_pair(args.enso, args.air, standardize=cfg.standardize)
    out = _out_dir(args.out)
    annealing = fit_annealed(series, cfg.driver())
    files = _write_fit_dir(out, series, cfg, annealing)
    summary = summarize_climate(series, annealing, cfg.tau_max, args.top)
    doc = summary.to_dict()
    doc["variable_names"] = list(series.variable_names)
    doc["mean_network"] = coefficient_records(summary.mean_phi)
    doc["T"] = series.T
    write_json(out / "climate.json", doc)
    write_manifest(out, "climate", cfg, cfg.seed, files + ["climate.json"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regime-pcmci", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write synthetic dataset bundles")
    p.add_argument("--experiment", required=True, help=f"one of: {', '.join(sorted(experiment_catalog()))}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--realisations", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    workers = argparse.ArgumentParser(add_help=False)
    workers.add_argument("--workers", type=int, default=None,
                         help="processes for the annealings (default: config value, else all cores)")

    p = sub.add_parser("discover", parents=[workers], help="fit regimes and causal networks")
    p.add_argument("--data")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("evaluate", help="score fits against ground truth")
    p.add_argument("--fit", nargs="+", required=True, help="fit directories written by discover")
    p.add_argument("--truth", nargs="+", required=True, help="truth.json files, in the same order")
    p.add_argument("--out", required=True, help="report JSON; the aggregate CSV is written next to it")
    p.add_argument("--max-delta-gamma", type=float, default=None,
                   help="aggregate only realisations with a regime error below this percentage")
    p.add_argument("--no-reference", action="store_true", help="skip the known-regime reference fits")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("select-k", parents=[workers], help="choose the number of regimes by AICc")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--candidates", default="1..4", help="e.g. 1,2,3 or 1..4")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select_k)

    p = sub.add_parser("climate", parents=[workers], help="two-regime analysis of monthly ENSO and AIR indices")
    p.add_argument("--enso", required=True)
    p.add_argument("--air", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON overriding the default parameter set")
    p.add_argument("--top", type=int, default=13, help="size of the lowest-error annealing cluster")
    p.set_defaults(func=cmd_climate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AllAnnealingsFailedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (DataError, InsufficientSamplesError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
