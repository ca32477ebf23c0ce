"""Regime assignment under a persistence budget.

Given per-regime prediction costs ``cost[k, t] = ||x_t - xhat_{k,t}||^2``, find
the hard assignment minimizing ``sum_t cost[label_t, t]`` with at most ``n_c``
regime changes. The problem is a shortest path over states
``(t, regime, changes used)`` and is solved exactly by dynamic programming in
``O(T * K * n_c)``; :func:`brute_force_assignment` enumerates every labelling
and is kept as a test oracle.

For two regimes the per-regime total variation of ``gamma_k`` equals the number
of change points, so the DP budget is exactly the per-regime constraint. For
three or more regimes the DP bounds the *total* number of change points by
``n_c``; since every change touches two regimes, no regime can then exceed
``n_c``, i.e. the result is always feasible but the search space is smaller
than the per-regime one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numba
import numpy as np

from .core import RegimeAssignment, TimeSeries, hard_assignment_from_labels, per_regime_variation


@dataclass(frozen=True)
class ResidualMatrix:
    """Per-regime squared prediction errors, shape ``(N_K, T)``.

    Columns before ``valid_from`` (the unpredictable first ``tau_max`` steps)
    are zero.
    """

    cost: np.ndarray
    valid_from: int = 0

    def __post_init__(self):
        cost = np.array(self.cost, dtype=float)
        if cost.ndim != 2:
            raise ValueError("cost must be an N_K x T matrix")
        if not np.all(np.isfinite(cost)) or np.any(cost < 0):
            raise ValueError("costs must be finite and non-negative")
        if not 0 <= self.valid_from <= cost.shape[1]:
            raise ValueError("valid_from outside the time range")
        cost[:, : self.valid_from] = 0.0
        cost.setflags(write=False)
        object.__setattr__(self, "cost", cost)

    @property
    def n_regimes(self) -> int:
        return self.cost.shape[0]

    @property
    def T(self) -> int:
        return self.cost.shape[1]

    def objective(self, assignment: RegimeAssignment) -> float:
        """``sum_k sum_t gamma_k(t) cost[k, t]`` over the predictable range."""
        g = assignment.gamma[:, self.valid_from:]
        return float(np.sum(g * self.cost[:, self.valid_from:]))


def reconstruct_per_regime(series: TimeSeries, phi: np.ndarray) -> np.ndarray:
    """One-step predictions of every regime model at every time step.

    Parameters
    ----------
    series : TimeSeries
    phi : array of shape (N_K, N_X, N_X, tau_max + 1)
        ``phi[k, j, i, tau]`` is the effect of ``x^i_{t-tau}`` on ``x^j_t``.

    Returns
    -------
    xhat : array of shape (N_K, T, N_X)
        Predictions from the *observed* lagged values. The first ``tau_max``
        steps cannot be predicted and are copied from the data.
    """
    phi = np.asarray(phi, dtype=float)
    x = series.values
    T, n = x.shape
    n_k, tau_max = phi.shape[0], phi.shape[3] - 1
    xhat = np.empty((n_k, T, n))
    xhat[:, :tau_max] = x[:tau_max]
    for k in range(n_k):
        acc = np.zeros((T - tau_max, n))
        for tau in range(1, tau_max + 1):
            acc += x[tau_max - tau: T - tau] @ phi[k, :, :, tau].T
        xhat[k, tau_max:] = acc
    return xhat


def residual_matrix(series: TimeSeries, predictions: np.ndarray, valid_from: int) -> ResidualMatrix:
    diff = series.values[None, :, :] - np.asarray(predictions)
    cost = np.einsum("ktn,ktn->kt", diff, diff)
    return ResidualMatrix(cost, valid_from)


def combined_reconstruction(predictions: np.ndarray, assignment: RegimeAssignment) -> np.ndarray:
    """Single prediction ``sum_k gamma_k(t) xhat_{k,t}``, shape ``(T, N_X)``."""
    return np.einsum("kt,ktn->tn", assignment.gamma.astype(float), np.asarray(predictions))


@numba.njit(cache=True)
def _dp(cost, budget):
    n_k, T = cost.shape
    inf = np.inf
    value = np.full((n_k, budget + 1), inf)
    value[:, 0] = cost[:, 0]
    # back[t, k, c]: regime at t-1 on the best path into (t, k, c)
    back = np.empty((T, n_k, budget + 1), dtype=np.int32)
    new = np.empty_like(value)
    for t in range(1, T):
        for c in range(budget + 1):
            # best and second best predecessor with c-1 changes (lowest index wins ties)
            b1 = -1
            b2 = -1
            if c > 0:
                for kp in range(n_k):
                    v = value[kp, c - 1]
                    if b1 < 0 or v < value[b1, c - 1]:
                        b2 = b1
                        b1 = kp
                    elif b2 < 0 or v < value[b2, c - 1]:
                        b2 = kp
            for k in range(n_k):
                best = value[k, c]
                arg = k
                if c > 0 and n_k > 1:
                    src = b1 if b1 != k else b2
                    if src >= 0 and value[src, c - 1] < best:
                        best = value[src, c - 1]
                        arg = src
                new[k, c] = best + cost[k, t]
                back[t, k, c] = arg
        value[:, :] = new

    best_k = 0
    best_c = 0
    best = inf
    for k in range(n_k):
        for c in range(budget + 1):
            if value[k, c] < best:
                best = value[k, c]
                best_k = k
                best_c = c
    labels = np.empty(T, dtype=np.int64)
    k = best_k
    c = best_c
    for t in range(T - 1, -1, -1):
        labels[t] = k
        if t > 0:
            prev = back[t, k, c]
            if prev != k:
                c -= 1
            k = prev
    return labels


def optimize_assignment(cost: ResidualMatrix, n_c: int) -> tuple[RegimeAssignment, float]:
    """Exact minimizer of the assignment cost with at most ``n_c`` change points.

    Ties are resolved toward keeping the current regime, then toward the
    lower regime index; equal costs everywhere give the constant labelling 0.
    Columns before ``cost.valid_from`` take the label of ``valid_from``.

    Returns
    -------
    assignment : RegimeAssignment
        Built under budget ``n_c``.
    objective : float
    """
    if n_c < 0:
        raise ValueError("switch budget must be non-negative")
    start = min(cost.valid_from, cost.T - 1)
    active = np.ascontiguousarray(cost.cost[:, start:])
    budget = int(min(n_c, active.shape[1] - 1))
    if cost.n_regimes == 1:
        budget = 0
    tail = _dp(active, budget)
    labels = np.concatenate([np.full(start, tail[0], dtype=np.int64), tail])
    assignment = hard_assignment_from_labels(labels, cost.n_regimes, n_c)
    return assignment, cost.objective(assignment)


def brute_force_assignment(cost: ResidualMatrix, n_c: int, max_states: int = 10**7) -> tuple[RegimeAssignment, float]:
    """Exhaustive minimizer under the per-regime variation budget (test oracle).

    Enumerates all ``N_K**T`` labellings. Among equal objectives the
    lexicographically smallest labelling is returned.
    """
    n_k, T = cost.cost.shape
    if n_k ** T > max_states:
        raise ValueError(f"instance too large for enumeration: {n_k}^{T} labellings")
    best_obj = np.inf
    best_labels = None
    chunk = 200_000
    iterator = itertools.product(range(n_k), repeat=T)
    while True:
        block = np.array(list(itertools.islice(iterator, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        block = block.reshape(-1, T)
        onehot = (block[:, None, :] == np.arange(n_k)[None, :, None]).astype(np.int8)
        variation = np.abs(np.diff(onehot, axis=2)).sum(axis=2) if T > 1 else np.zeros((len(block), n_k))
        feasible = np.all(variation <= n_c, axis=1)
        obj = cost.cost[block, np.arange(T)].sum(axis=1)
        obj = np.where(feasible, obj, np.inf)
        idx = int(np.argmin(obj))
        if obj[idx] < best_obj:
            best_obj = float(obj[idx])
            best_labels = block[idx]
    assignment = hard_assignment_from_labels(best_labels, n_k, n_c)
    return assignment, cost.objective(assignment)


__all__ = [
    "ResidualMatrix",
    "reconstruct_per_regime",
    "residual_matrix",
    "combined_reconstruction",
    "optimize_assignment",
    "brute_force_assignment",
    "per_regime_variation",
]
