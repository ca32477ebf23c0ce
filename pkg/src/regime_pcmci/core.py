"""Shared data model: observed series, regime assignments, parents, coefficients."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class RegimePcmciError(Exception):
    """Base class for all errors raised by this package."""


class DataError(RegimePcmciError, ValueError):
    """Input data cannot be used (bad file, bad shape, degenerate values)."""


class ParseError(DataError):
    pass


class DegenerateColumnError(DataError):
    pass


class InsufficientSamplesError(RegimePcmciError):
    """Too few usable samples for the requested estimate.

    The number of available samples is kept in ``n_samples`` and the
    required minimum in ``required``.
    """

    def __init__(self, message: str, n_samples: int = 0, required: int = 0):
        super().__init__(message)
        self.n_samples = n_samples
        self.required = required


@dataclass(frozen=True)
class TimeSeries:
    """A ``T x N_X`` panel of real observations.

    Parameters
    ----------
    values : array of shape (T, N_X)
    variable_names : sequence of str, optional
        Defaults to ``X1, ..., XN``.
    time_index : sequence, optional
        One label per row, e.g. ``"1871-01"``.
    """

    values: np.ndarray
    variable_names: tuple[str, ...] = ()
    time_index: tuple | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError(f"expected a non-empty T x N_X matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("time series contains NaN or Inf")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

        names = tuple(self.variable_names) or tuple(f"X{j + 1}" for j in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise DataError(f"{len(names)} variable names for {values.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DataError("variable names must be distinct")
        object.__setattr__(self, "variable_names", names)

        if self.time_index is not None:
            index = tuple(self.time_index)
            if len(index) != values.shape[0]:
                raise DataError(f"time index has {len(index)} entries for {values.shape[0]} rows")
            object.__setattr__(self, "time_index", index)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def standardized(self) -> "TimeSeries":
        """Return a copy with every column at zero mean and unit variance."""
        std = self.values.std(axis=0)
        bad = [self.variable_names[j] for j in np.flatnonzero(std <= 1e-12 * (1 + np.abs(self.values).max()))]
        if bad:
            raise DegenerateColumnError(f"zero-variance column(s): {', '.join(bad)}")
        z = (self.values - self.values.mean(axis=0)) / std
        return TimeSeries(z, self.variable_names, self.time_index)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(path, has_header: bool = True, standardize: bool = False) -> TimeSeries:
    """Read a comma-separated numeric table.

    A leading time column is detected automatically: if the first field of
    the first data row is not numeric, the whole first column is treated as
    time labels.

    Raises
    ------
    ParseError
        Ragged rows or a non-numeric cell (the message names row and column).
    DegenerateColumnError
        A constant column when ``standardize`` is set.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    if has_header:
        if not rows:
            raise ParseError(f"{path}: empty file")
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    else:
        header = None
    if not rows:
        raise ParseError(f"{path}: no data rows")

    width = len(rows[0])
    for r, row in enumerate(rows):
        if len(row) != width:
            line = r + 1 + int(has_header)
            raise ParseError(f"{path}: line {line} has {len(row)} fields, expected {width}")

    has_time = not _is_number(rows[0][0].strip())
    first = 1 if has_time else 0
    if width - first < 1:
        raise ParseError(f"{path}: no value columns")

    values = np.empty((len(rows), width - first))
    for r, row in enumerate(rows):
        for c in range(first, width):
            cell = row[c].strip()
            try:
                values[r, c - first] = float(cell)
            except ValueError:
                line = r + 1 + int(has_header)
                raise ParseError(f"{path}: non-numeric cell {cell!r} at line {line}, column {c + 1}") from None
    if not np.all(np.isfinite(values)):
        raise ParseError(f"{path}: non-finite values")

    names = tuple(header[first:]) if header is not None and len(header) == width else ()
    time_index = tuple(row[0].strip() for row in rows) if has_time else None
    series = TimeSeries(values, names, time_index)
    return series.standardized() if standardize else series


def per_regime_variation(gamma: np.ndarray) -> np.ndarray:
    """Total variation ``sum_t |gamma_k(t+1) - gamma_k(t)|`` of every row."""
    gamma = np.asarray(gamma)
    if gamma.shape[1] < 2:
        return np.zeros(gamma.shape[0], dtype=int)
    return np.abs(np.diff(gamma.astype(int), axis=1)).sum(axis=1)


@dataclass(frozen=True)
class RegimeAssignment:
    """Hard regime-assigning process, one row per regime.

    ``n_c`` is the per-regime switch budget the assignment was built under;
    ``None`` means unconstrained. Regime indices are 0-based.
    """

    gamma: np.ndarray
    n_c: int | None = None

    def __post_init__(self):
        gamma = np.array(self.gamma)
        if gamma.ndim != 2 or gamma.shape[0] < 1 or gamma.shape[1] < 1:
            raise ValueError(f"gamma must be a non-empty N_K x T matrix, got shape {gamma.shape}")
        if not np.all((gamma == 0) | (gamma == 1)):
            raise ValueError("gamma entries must be 0 or 1")
        gamma = gamma.astype(np.int8)
        if not np.all(gamma.sum(axis=0) == 1):
            raise ValueError("every column of gamma must sum to one")
        if self.n_c is not None:
            variation = per_regime_variation(gamma)
            if np.any(variation > self.n_c):
                raise ValueError(f"per-regime variation {variation.tolist()} exceeds budget {self.n_c}")
        gamma.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def from_labels(cls, labels: Sequence[int], n_regimes: int, n_c: int | None = None) -> "RegimeAssignment":
        return hard_assignment_from_labels(labels, n_regimes, n_c)

    @property
    def n_regimes(self) -> int:
        return self.gamma.shape[0]

    @property
    def T(self) -> int:
        return self.gamma.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.gamma, axis=0)

    @property
    def switch_counts(self) -> np.ndarray:
        """Realized per-regime total variation."""
        return per_regime_variation(self.gamma)

    @property
    def n_changepoints(self) -> int:
        return int(np.count_nonzero(np.diff(self.labels)))

    def permuted(self, perm: Sequence[int]) -> "RegimeAssignment":
        """Relabel so that old regime ``k`` becomes regime ``perm[k]``."""
        gamma = np.zeros_like(self.gamma)
        gamma[list(perm)] = self.gamma
        return RegimeAssignment(gamma, self.n_c)

    def __eq__(self, other):
        if not isinstance(other, RegimeAssignment):
            return NotImplemented
        return self.gamma.shape == other.gamma.shape and bool(np.array_equal(self.gamma, other.gamma))

    def __hash__(self):
        return hash(self.gamma.tobytes())


def hard_assignment_from_labels(labels: Iterable[int], n_regimes: int, n_c: int | None = None) -> RegimeAssignment:
    """One-hot encode 0-based regime labels.

    >>> hard_assignment_from_labels([0, 1, 1, 0], 2).gamma.tolist()
    [[1, 0, 0, 1], [0, 1, 1, 0]]
    """
    labels = np.asarray(list(labels) if not isinstance(labels, np.ndarray) else labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ValueError("labels must be a non-empty 1-d sequence")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(labels == np.round(labels)):
            raise ValueError("labels must be integers")
        labels = labels.astype(int)
    if labels.min() < 0 or labels.max() >= n_regimes:
        raise ValueError(f"labels must lie in [0, {n_regimes - 1}]")
    gamma = np.zeros((n_regimes, labels.size), dtype=np.int8)
    gamma[labels, np.arange(labels.size)] = 1
    return RegimeAssignment(gamma, n_c)


def regime_members(assignment: RegimeAssignment, k: int) -> np.ndarray:
    """Sorted time indices at which regime ``k`` is active (``gamma_k(t) >= 0.5``)."""
    if not 0 <= k < assignment.n_regimes:
        raise IndexError(f"regime {k} out of range for {assignment.n_regimes} regimes")
    return np.flatnonzero(assignment.gamma[k] >= 0.5)


@dataclass(frozen=True)
class ParentSet:
    """Lagged parents per regime and target.

    ``parents[k][j]`` is a tuple of ``(i, tau)`` pairs with ``1 <= tau <= tau_max``.
    """

    parents: tuple
    tau_max: int

    def __post_init__(self):
        normalized = []
        for per_regime in self.parents:
            rows = []
            for plist in per_regime:
                pairs = tuple((int(i), int(tau)) for i, tau in plist)
                if len(set(pairs)) != len(pairs):
                    raise ValueError(f"duplicate parents in {pairs}")
                for _, tau in pairs:
                    if not 1 <= tau <= self.tau_max:
                        raise ValueError(f"lag {tau} outside [1, {self.tau_max}]")
                rows.append(pairs)
            normalized.append(tuple(rows))
        object.__setattr__(self, "parents", tuple(normalized))

    @property
    def n_regimes(self) -> int:
        return len(self.parents)

    def counts(self) -> np.ndarray:
        """``|P^j_k|`` as an ``(N_K, N_X)`` integer array."""
        return np.array([[len(p) for p in per_regime] for per_regime in self.parents], dtype=int)

    def links(self):
        """Yield ``(k, j, i, tau)`` for every parent."""
        for k, per_regime in enumerate(self.parents):
            for j, plist in enumerate(per_regime):
                for i, tau in plist:
                    yield k, j, i, tau


@dataclass(frozen=True)
class LinkCoefficients:
    """Linear effects ``phi[k, j, i, tau]`` of ``x^i_{t-tau}`` on ``x^j_t`` in regime ``k``.

    The lag axis has length ``tau_max + 1``; index 0 is unused and always zero.
    """

    phi: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 4 or phi.shape[1] != phi.shape[2]:
            raise ValueError(f"phi must have shape (K, N, N, tau_max + 1), got {phi.shape}")
        if np.any(phi[..., 0] != 0):
            raise ValueError("contemporaneous coefficients must be zero")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def n_regimes(self) -> int:
        return self.phi.shape[0]

    @property
    def n_vars(self) -> int:
        return self.phi.shape[1]

    @property
    def tau_max(self) -> int:
        return self.phi.shape[3] - 1

    def support(self) -> np.ndarray:
        return self.phi != 0

    def to_parents(self) -> ParentSet:
        parents = []
        for k in range(self.n_regimes):
            parents.append(tuple(
                tuple((int(i), int(tau)) for i, tau in zip(*np.nonzero(self.phi[k, j])))
                for j in range(self.n_vars)))
        return ParentSet(tuple(parents), max(self.tau_max, 1))

    def padded(self, tau_max: int) -> np.ndarray:
        """Coefficient array zero-padded (or checked) to a given lag range."""
        if tau_max >= self.tau_max:
            out = np.zeros(self.phi.shape[:3] + (tau_max + 1,))
            out[..., : self.tau_max + 1] = self.phi
            return out
        if np.any(self.phi[..., tau_max + 1:] != 0):
            raise ValueError(f"non-zero coefficients beyond lag {tau_max}")
        return self.phi[..., : tau_max + 1].copy()

    def permuted(self, perm: Sequence[int]) -> "LinkCoefficients":
        phi = np.zeros_like(self.phi)
        phi[list(perm)] = self.phi
        return LinkCoefficients(phi)


@dataclass(frozen=True)
class FitResult:
    """Outcome of one alternating-optimization (annealing) run."""

    assignment: RegimeAssignment
    parents: ParentSet
    coefficients: LinkCoefficients
    objective: float
    prediction_error: float
    iterations_used: int
    converged: bool
    seed: int
    pvalues: np.ndarray | None = None
    failure: str | None = None
    history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not (self.objective >= 0 and self.prediction_error >= 0):
            raise ValueError("objective and prediction error must be non-negative")
        if self.converged and self.failure is not None:
            raise ValueError("a failed run cannot be converged")
        support = self.coefficients.support()
        for k, j, i, tau in zip(*np.nonzero(support)):
            if (i, tau) not in self.parents.parents[k][j]:
                raise ValueError(f"coefficient ({k}, {j}, {i}, {tau}) is non-zero outside the parent set")

    @property
    def n_regimes(self) -> int:
        return self.assignment.n_regimes

    @property
    def failed(self) -> bool:
        return self.failure is not None

