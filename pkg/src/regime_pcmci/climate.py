"""Monthly climate indices: ingestion and the two-regime ENSO/AIR recipe.

Index files are local CSVs in one of two layouts:

* long: ``time,value`` with ``time`` as ``YYYY-MM`` (or ``YYYY-MM-DD``) or a
  decimal year such as ``1871.0417``;
* wide: ``year,v1,...,v12``, one row per year.

Missing values (empty, ``NaN`` or values at or below ``-99``) are rejected
rather than filled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DataError, ParseError, TimeSeries
from .driver import AnnealingResult
from .metrics import match_regimes

SUMMER = (6, 7, 8, 9)
WINTER = (12, 1, 2, 3)
LINK_THRESHOLD = 0.1


@dataclass(frozen=True)
class MonthlyIndex:
    year: np.ndarray
    month: np.ndarray
    values: np.ndarray

    @property
    def keys(self) -> list[str]:
        return [f"{y:04d}-{m:02d}" for y, m in zip(self.year, self.month)]


def _value(text: str, where: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"{where}: cannot parse {text!r} as a number") from None
    if not math.isfinite(v) or v <= -99:
        raise DataError(f"{where}: missing value {text!r}")
    return v


def _parse_time(text: str, where: str) -> tuple[int, int]:
    text = text.strip()
    if "-" in text[1:]:
        parts = text.split("-")
        try:
            year, month = int(parts[0]), int(parts[1])
        except (ValueError, IndexError):
            raise ParseError(f"{where}: cannot parse time {text!r}") from None
    else:
        try:
            frac = float(text)
        except ValueError:
            raise ParseError(f"{where}: cannot parse time {text!r}") from None
        year = int(math.floor(frac))
        month = int(math.floor((frac - year) * 12 + 1e-6)) + 1
    if not 1 <= month <= 12:
        raise ParseError(f"{where}: month out of range in {text!r}")
    return year, month


def load_monthly_index(path) -> MonthlyIndex:
    """Read a monthly index in long or wide layout (see module docstring)."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    if rows and not _looks_numeric(rows[0][-1]):
        rows = rows[1:]  # header
    if not rows:
        raise DataError(f"{path}: no data rows")
    years, months, values = [], [], []
    width = len(rows[0])
    for n, row in enumerate(rows, start=1):
        where = f"{path.name} row {n}"
        if len(row) != width:
            raise ParseError(f"{where}: expected {width} fields, got {len(row)}")
        if width == 2:
            y, m = _parse_time(row[0], where)
            years.append(y)
            months.append(m)
            values.append(_value(row[1], where))
        elif width == 13:
            y = int(_value(row[0], where))
            for m in range(1, 13):
                years.append(y)
                months.append(m)
                values.append(_value(row[m], f"{where} month {m}"))
        else:
            raise ParseError(f"{where}: expected 2 (time,value) or 13 (year + 12 months) columns")
    idx = MonthlyIndex(np.array(years), np.array(months), np.array(values, dtype=float))
    keys = idx.year * 12 + idx.month
    if np.any(np.diff(keys) != 1):
        raise DataError(f"{path}: months are not consecutive")
    return idx


def _looks_numeric(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_climate_pair(driver_path, response_path, names=("ENSO", "AIR"), standardize: bool = True) -> TimeSeries:
    """Align two monthly indices on their common months."""
    a, b = load_monthly_index(driver_path), load_monthly_index(response_path)
    ka, kb = a.year * 12 + a.month, b.year * 12 + b.month
    start, stop = max(ka[0], kb[0]), min(ka[-1], kb[-1])
    if stop < start:
        raise DataError("the two indices share no months")
    sa, sb = slice(start - ka[0], stop - ka[0] + 1), slice(start - kb[0], stop - kb[0] + 1)
    values = np.column_stack([a.values[sa], b.values[sb]])
    series = TimeSeries(values, tuple(names), tuple(a.keys[sa]))
    return series.standardized() if standardize else series


def month_of(series: TimeSeries) -> np.ndarray:
    if series.time_index is None:
        raise DataError("series has no time index")
    return np.array([int(str(key).split("-")[1]) for key in series.time_index])


@dataclass(frozen=True)
class ClimateSummary:
    cluster_seeds: tuple
    cluster_errors: tuple
    mean_phi: np.ndarray  # (K, N, N, tau+1), averaged over the cluster after relabelling
    link_regimes: tuple  # regimes whose mean driver->response effect reaches LINK_THRESHOLD
    link_effects: tuple  # strongest mean lagged effect in each regime
    summer_fraction: tuple  # share of June-September months in each regime
    winter_fraction: tuple  # share of December-March months in each regime
    departure_pct: tuple  # label disagreement of each cluster run with the best run

    def to_dict(self) -> dict:
        return {
            "cluster_seeds": list(self.cluster_seeds),
            "cluster_prediction_errors": list(self.cluster_errors),
            "link_regimes": list(self.link_regimes),
            "link_effects": list(self.link_effects),
            "summer_fraction": list(self.summer_fraction),
            "winter_fraction": list(self.winter_fraction),
            "departure_pct": list(self.departure_pct),
        }


def summarize_climate(series: TimeSeries, annealing: AnnealingResult, tau_max: int, top: int = 13,
                      driver: int = 0, response: int = 1) -> ClimateSummary:
    """Aggregate the ``top`` lowest-error runs.

    Each run's regimes are relabelled to best match the overall best run,
    coefficients and labels are averaged across the cluster, and the seasonal
    make-up of every regime is reported.
    """
    runs = sorted((r for r in annealing.runs if not r.failed), key=lambda r: (r.prediction_error, r.seed))
    if not runs:
        raise DataError("no successful annealing to summarize")
    cluster = runs[:top]
    best = cluster[0]
    n_k = best.n_regimes
    months = month_of(series)
    phis, departures, member = [], [], np.zeros((n_k, series.T))
    for run in cluster:
        perm = match_regimes(run.assignment, best.assignment, tau_max)
        assignment = run.assignment.permuted(perm)
        phis.append(run.coefficients.permuted(perm).padded(tau_max))
        member += assignment.gamma
        departures.append(100.0 * float(np.mean(assignment.labels[tau_max:] != best.assignment.labels[tau_max:])))
    mean_phi = np.mean(phis, axis=0)
    effects = []
    for k in range(n_k):
        lagged = mean_phi[k, response, driver, 1:]
        effects.append(float(lagged[np.argmax(np.abs(lagged))]))
    link_regimes = tuple(k for k in range(n_k) if abs(effects[k]) >= LINK_THRESHOLD)
    member /= len(cluster)
    summer = np.isin(months, SUMMER)
    winter = np.isin(months, WINTER)
    return ClimateSummary(
        tuple(r.seed for r in cluster), tuple(r.prediction_error for r in cluster), mean_phi, link_regimes,
        tuple(effects),
        tuple(float(member[k, summer].mean()) for k in range(n_k)),
        tuple(float(member[k, winter].mean()) for k in range(n_k)),
        tuple(departures))


# Parameter set of the two-regime ENSO/AIR analysis.
CLIMATE_PARAMETERS = {
    "N_K": 2, "N_C": 292, "tau_max": 2, "alpha": 0.01, "alpha_PC": 0.2, "N_A": 100, "N_Q": 100,
    "standardize": True,
}
