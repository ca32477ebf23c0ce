"""On-disk formats: run configs, dataset bundles, fit directories, manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .core import (DataError, FitResult, LinkCoefficients, ParentSet, TimeSeries, hard_assignment_from_labels,
                   load_csv)
from .driver import DriverConfig
from .pcmci import PcmciConfig
from .synthetic import GroundTruth, RegimeSchedule


class ConfigError(ValueError):
    pass


# Accepted spellings of config keys, including the parameter-table names.
_ALIASES = {
    "N_K": "n_regimes", "N_C": "switch_budget", "N_Q": "n_iterations", "N_A": "n_annealings",
    "N_R": "n_realisations", "alpha_PC": "alpha_pc", "alpha_pc": "alpha_pc", "workers": "n_jobs",
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs besides its input files; stored as JSON."""

    n_regimes: int = 2
    switch_budget: int = 40
    n_iterations: int = 20
    n_annealings: int = 50
    tau_max: int = 3
    alpha: float = 0.01
    alpha_pc: float = 0.2
    max_conditions: int | None = None
    seed: int = 0
    n_jobs: int | None = None
    standardize: bool = True
    plateau_tol: float = 2.0
    experiment: str | None = None
    n_realisations: int = 1
    data: str | None = None
    out: str | None = None

    # Fields that do not influence results and stay out of the provenance hash.
    RUNTIME_FIELDS = ("n_jobs", "data", "out")

    def __post_init__(self):
        if self.n_realisations < 1:
            raise ConfigError("n_realisations must be at least 1")
        try:
            self.driver()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def pcmci(self) -> PcmciConfig:
        return PcmciConfig(self.tau_max, self.alpha, self.alpha_pc, self.max_conditions)

    def driver(self) -> DriverConfig:
        return DriverConfig(self.n_regimes, self.switch_budget, self.n_iterations, self.n_annealings,
                            self.pcmci(), self.seed, self.n_jobs or os.cpu_count() or 1)

    def to_dict(self, runtime: bool = True) -> dict:
        out = asdict(self)
        if not runtime:
            for name in self.RUNTIME_FIELDS:
                out.pop(name)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = _ALIASES.get(key, key)
            if name not in known:
                raise ConfigError(f"unknown config field {key!r}")
            kwargs[name] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def hash(self) -> str:
        return hashlib.sha256(dumps(self.to_dict(runtime=False)).encode()).hexdigest()


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def load_config(path) -> RunConfig:
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return RunConfig.from_dict(data)


def write_series_csv(path, series: TimeSeries):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if series.time_index is not None:
            writer.writerow(["time", *series.variable_names])
            for label, row in zip(series.time_index, series.values):
                writer.writerow([label, *(repr(float(v)) for v in row)])
        else:
            writer.writerow(series.variable_names)
            for row in series.values:
                writer.writerow([repr(float(v)) for v in row])


def coefficient_records(phi: np.ndarray, pvalues: np.ndarray | None = None) -> list[dict]:
    """``{k, j, i, tau, phi[, pvalue]}`` for every non-zero coefficient."""
    records = []
    for k, j, i, tau in zip(*np.nonzero(phi)):
        rec = {"k": int(k), "j": int(j), "i": int(i), "tau": int(tau), "phi": float(phi[k, j, i, tau])}
        if pvalues is not None:
            p = float(pvalues[k, j, i, tau])
            rec["pvalue"] = None if math.isnan(p) else p
        records.append(rec)
    return records


def phi_from_records(records, n_regimes: int, n_vars: int, tau_max: int) -> np.ndarray:
    phi = np.zeros((n_regimes, n_vars, n_vars, tau_max + 1))
    for rec in records:
        phi[rec["k"], rec["j"], rec["i"], rec["tau"]] = rec["phi"]
    return phi


def truth_to_dict(truth: GroundTruth, series: TimeSeries, experiment: str, seed: int) -> dict:
    phi = truth.coefficients.phi
    return {
        "experiment": experiment,
        "seed": int(seed),
        "series_file": "series.csv",
        "T": series.T,
        "n_vars": series.n_vars,
        "n_regimes": truth.assignment.n_regimes,
        "tau_max": truth.coefficients.tau_max,
        "sigma2": truth.sigma2,
        "n_c": int(truth.assignment.switch_counts.max()),
        "windows": {"lengths": list(truth.schedule.lengths), "labels": list(truth.schedule.labels)},
        "coefficients": coefficient_records(phi),
    }


def write_bundle(directory, series: TimeSeries, truth: GroundTruth, experiment: str, seed: int):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_series_csv(directory / "series.csv", series)
    write_json(directory / "truth.json", truth_to_dict(truth, series, experiment, seed))


@dataclass(frozen=True)
class TruthFile:
    series: TimeSeries
    truth: GroundTruth
    data: dict


def read_truth(path) -> TruthFile:
    path = Path(path)
    data = read_json(path)
    try:
        series = load_csv(path.parent / data.get("series_file", "series.csv"), has_header=True)
        schedule = RegimeSchedule(tuple(data["windows"]["lengths"]), tuple(data["windows"]["labels"]),
                                  data["n_regimes"])
        phi = phi_from_records(data["coefficients"], data["n_regimes"], data["n_vars"], data["tau_max"])
    except KeyError as exc:
        raise DataError(f"{path}: missing field {exc}") from None
    if schedule.T != series.T:
        raise DataError(f"{path}: schedule covers {schedule.T} steps, series has {series.T}")
    truth = GroundTruth(schedule.assignment(), LinkCoefficients(phi), schedule, data.get("sigma2", 1.0))
    return TruthFile(series, truth, data)


def fit_to_dict(result: FitResult, tau_max: int, n_c: int) -> dict:
    return {
        "n_regimes": result.n_regimes,
        "n_vars": result.coefficients.n_vars,
        "tau_max": tau_max,
        "switch_budget": n_c,
        "seed": result.seed,
        "objective": result.objective,
        "prediction_error": result.prediction_error,
        "iterations_used": result.iterations_used,
        "converged": result.converged,
        "failure": result.failure,
        "labels": [int(v) for v in result.assignment.labels],
        "network": coefficient_records(result.coefficients.phi, result.pvalues),
    }


def fit_from_dict(data: dict) -> FitResult:
    n_k, n, tau = data["n_regimes"], data["n_vars"], data["tau_max"]
    phi = phi_from_records(data["network"], n_k, n, tau)
    coeffs = LinkCoefficients(phi)
    parents = coeffs.to_parents()
    parents = ParentSet(parents.parents, tau)
    pvalues = np.full(phi.shape, np.nan)
    for rec in data["network"]:
        if rec.get("pvalue") is not None:
            pvalues[rec["k"], rec["j"], rec["i"], rec["tau"]] = rec["pvalue"]
    assignment = hard_assignment_from_labels(data["labels"], n_k)
    return FitResult(assignment, parents, coeffs, data["objective"], data["prediction_error"],
                     data["iterations_used"], data["converged"], data["seed"], pvalues, data.get("failure"))


def write_regimes_csv(path, result: FitResult, time_index=None):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "label"])
        for t, label in enumerate(result.assignment.labels):
            writer.writerow([time_index[t] if time_index is not None else t, int(label)])


def write_rows_csv(path, rows: list[dict], columns):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: _fmt(row.get(c)) for c in columns})


def _fmt(value):
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return "" if value is None else value


def write_manifest(directory, command: str, config: RunConfig | None, seed: int | None, files):
    manifest = {
        "tool": "regime-pcmci",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config_hash": config.hash() if config is not None else None,
        "config": config.to_dict(runtime=False) if config is not None else None,
        "files": sorted(str(f) for f in files),
    }
    write_json(Path(directory) / "manifest.json", manifest)
