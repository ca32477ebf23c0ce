"""Lagged PCMCI with partial correlation on a masked subset of time steps.

Only the *target* time ``t`` has to belong to the regime; lagged predictor
values ``x_{t-tau}`` are taken from the full series even when ``t - tau`` lies
in another regime.

Variables are indexed ``0..N_X-1`` and a lagged node is a pair ``(i, tau)``
meaning ``x^i_{t-tau}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InsufficientSamplesError, TimeSeries
from .stats import ols_fit, partial_correlation_cov


@dataclass(frozen=True)
class PcmciConfig:
    """Discovery settings.

    Parameters
    ----------
    tau_max : int
        Largest lag considered.
    alpha : float
        Significance level of the MCI tests.
    alpha_pc : float
        More liberal level used to prune conditions in PC1.
    max_conditions : int, optional
        Cap on the condition-set size in PC1; ``None`` is unlimited.
    """

    tau_max: int = 3
    alpha: float = 0.01
    alpha_pc: float = 0.2
    max_conditions: int | None = None

    def __post_init__(self):
        if self.tau_max < 1:
            raise ValueError("tau_max must be at least 1")
        if not 0 < self.alpha <= self.alpha_pc < 1:
            raise ValueError("need 0 < alpha <= alpha_pc < 1")
        if self.max_conditions is not None and self.max_conditions < 0:
            raise ValueError("max_conditions must be non-negative")


def sample_floor(n_vars: int, tau_max: int) -> int:
    """Minimum number of usable target rows a regime must contribute."""
    return max(25, 3 * tau_max * n_vars)


class LaggedSampleSet:
    """Lagged copies ``x^i_{t-tau}``, ``0 <= tau <= max_lag``, at target times ``t``.

    Rows are the members ``t`` with ``t >= max_lag``. Column ``tau * N_X + i``
    holds ``x^i_{t-tau}``.
    """

    def __init__(self, series: TimeSeries, members=None, max_lag: int = 1):
        x = series.values
        T, n = x.shape
        if members is None:
            rows = np.arange(max_lag, T)
        else:
            rows = np.unique(np.asarray(members, dtype=np.int64))
            if rows.size and (rows[0] < 0 or rows[-1] >= T):
                raise IndexError("member index outside the series")
            rows = rows[rows >= max_lag]
        self.n_vars = n
        self.max_lag = max_lag
        self.rows = rows
        self.data = np.concatenate([x[rows - tau] for tau in range(max_lag + 1)], axis=1)
        self._cov = None

    @property
    def n(self) -> int:
        return self.rows.size

    def column(self, i: int, tau: int) -> int:
        return tau * self.n_vars + i

    @property
    def cov(self) -> np.ndarray:
        if self._cov is None:
            centred = self.data - self.data.mean(axis=0)
            self._cov = centred.T @ centred / max(self.n - 1, 1)
        return self._cov

    def test(self, x_node, y_node, z_nodes):
        """Partial correlation test of two lagged nodes given others."""
        return partial_correlation_cov(
            self.cov, self.n, self.column(*x_node), self.column(*y_node),
            [self.column(i, tau) for i, tau in z_nodes])


def _check_floor(samples: LaggedSampleSet, cfg: PcmciConfig):
    floor = sample_floor(samples.n_vars, cfg.tau_max)
    if samples.n < floor:
        raise InsufficientSamplesError(
            f"{samples.n} usable samples, at least {floor} required", samples.n, floor)


def _pc1(samples: LaggedSampleSet, j: int, cfg: PcmciConfig):
    candidates = [(i, tau) for i in range(samples.n_vars) for tau in range(1, cfg.tau_max + 1)]
    strength = {c: np.inf for c in candidates}
    parents = list(candidates)
    max_dim = len(candidates) if cfg.max_conditions is None else cfg.max_conditions
    s = 0
    while s <= max_dim and s <= len(parents) - 1:
        removed = []
        for node in parents:
            conds = [p for p in parents if p != node][:s]
            res = samples.test(node, (j, 0), conds)
            strength[node] = min(strength[node], abs(res.statistic))
            if res.pvalue > cfg.alpha_pc:
                removed.append(node)
        for node in removed:
            del strength[node]
        parents = sorted(strength, key=lambda node: (-strength[node], node))
        s += 1
    return parents, {node: strength[node] for node in parents}


def pc1_condition_selection(series: TimeSeries, members, j: int, cfg: PcmciConfig) -> list[tuple[int, int]]:
    """Select conditions for target ``j`` by iterative PC1 pruning.

    Stage ``s`` tests every surviving candidate ``(i, tau)`` against ``x^j_t``
    conditioned on its ``s`` strongest fellow survivors and drops those with
    p-value above ``alpha_pc``. Stages continue while ``s`` does not exceed the
    number of other survivors. Survivors are returned ranked by their
    smallest absolute statistic over all stages, ties broken by ``(i, tau)``.
    """
    samples = LaggedSampleSet(series, members, cfg.tau_max)
    _check_floor(samples, cfg)
    return _pc1(samples, j, cfg)[0]


@dataclass(frozen=True)
class PcmciResult:
    """Parents of every variable with MCI statistics.

    ``pvalues[j, i, tau]`` and ``statistics[j, i, tau]`` refer to the link
    ``x^i_{t-tau} -> x^j_t``; the ``tau = 0`` slice is NaN.
    """

    parents: tuple
    pvalues: np.ndarray
    statistics: np.ndarray
    conditions: tuple
    n_samples: int


def _mci(samples: LaggedSampleSet, conditions, cfg: PcmciConfig):
    n = samples.n_vars
    pvals = np.full((n, n, cfg.tau_max + 1), np.nan)
    stats = np.full_like(pvals, np.nan)
    parents = []
    for j in range(n):
        found = []
        for i in range(n):
            for tau in range(1, cfg.tau_max + 1):
                z = [c for c in conditions[j] if c != (i, tau)]
                z += [c for c in ((k, tau + lag) for k, lag in conditions[i]) if c not in z]
                res = samples.test((i, tau), (j, 0), z)
                pvals[j, i, tau] = res.pvalue
                stats[j, i, tau] = res.statistic
                if res.pvalue <= cfg.alpha:
                    found.append((i, tau))
        parents.append(tuple(found))
    return tuple(parents), pvals, stats


def mci_links(series: TimeSeries, members, conditions, cfg: PcmciConfig) -> PcmciResult:
    """Momentary conditional independence tests for all lagged pairs.

    The link ``x^i_{t-tau} -> x^j_t`` is kept when its partial correlation
    given the conditions of ``j`` (without the tested node) and the conditions
    of ``i`` shifted back by ``tau`` has p-value at most ``alpha``.
    """
    samples = LaggedSampleSet(series, members, 2 * cfg.tau_max)
    _check_floor(samples, cfg)
    conditions = tuple(tuple(c) for c in conditions)
    if len(conditions) != series.n_vars:
        raise ValueError("need one condition list per variable")
    parents, pvals, stats = _mci(samples, conditions, cfg)
    return PcmciResult(parents, pvals, stats, conditions, samples.n)


def run_pcmci(series: TimeSeries, members=None, cfg: PcmciConfig = PcmciConfig()) -> PcmciResult:
    """PC1 condition selection followed by MCI on the samples ``members``.

    ``members=None`` uses the whole series.

    Raises
    ------
    InsufficientSamplesError
        If fewer than :func:`sample_floor` target rows are available.
    """
    mci_samples = LaggedSampleSet(series, members, 2 * cfg.tau_max)
    _check_floor(mci_samples, cfg)
    pc_samples = LaggedSampleSet(series, members, cfg.tau_max)
    conditions = tuple(tuple(_pc1(pc_samples, j, cfg)[0]) for j in range(series.n_vars))
    parents, pvals, stats = _mci(mci_samples, conditions, cfg)
    return PcmciResult(parents, pvals, stats, conditions, mci_samples.n)


def estimate_effects(series: TimeSeries, members, parents, tau_max: int) -> np.ndarray:
    """Least-squares linear effects of each variable's parents.

    Parameters
    ----------
    parents : sequence over targets ``j`` of ``(i, tau)`` pairs

    Returns
    -------
    phi : array of shape (N_X, N_X, tau_max + 1)
        ``phi[j, i, tau]``; entries outside the parent sets are exactly zero.
    """
    samples = LaggedSampleSet(series, members, tau_max)
    n = series.n_vars
    floor = sample_floor(n, tau_max)
    phi = np.zeros((n, n, tau_max + 1))
    for j, plist in enumerate(parents):
        plist = list(plist)
        if samples.n < len(plist) + floor:
            raise InsufficientSamplesError(
                f"{samples.n} samples for {len(plist)} parents of variable {j}",
                samples.n, len(plist) + floor)
        if not plist:
            continue
        cols = [samples.column(i, tau) for i, tau in plist]
        fit = ols_fit(samples.data[:, cols], samples.data[:, samples.column(j, 0)])
        for (i, tau), coef in zip(plist, fit.coefficients):
            phi[j, i, tau] = coef
    return phi
