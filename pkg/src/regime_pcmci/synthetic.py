"""Synthetic regime-switching linear SCMs with known ground truth.

The generator is

    x^j_t = sum_k gamma_k(t) sum_{(i, tau)} phi[k, j, i, tau] x^i_{t-tau} + eps^j_t,
    eps^j_t ~ N(0, sigma2),

with a predefined regime schedule. The catalog holds the two-variable
benchmark cases, the three-regime case and a random ten-variable family.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import LinkCoefficients, RegimeAssignment, TimeSeries, hard_assignment_from_labels
from .pcmci import PcmciConfig


@dataclass(frozen=True)
class ScmSpec:
    """Regime-wise linear lagged SCM.

    ``phi[k, j, i, tau]`` is the effect of ``x^i_{t-tau}`` on ``x^j_t`` in
    regime ``k``; the parents are its non-zero entries.
    """

    phi: np.ndarray
    sigma2: float = 1.0
    name: str = ""

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        LinkCoefficients(phi)
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        if self.sigma2 <= 0:
            raise ValueError("noise variance must be positive")
        radii = self.spectral_radii()
        if np.any(radii >= 1):
            raise ValueError(f"regime(s) not stable, spectral radii {np.round(radii, 3).tolist()}")

    @property
    def n_regimes(self) -> int:
        return self.phi.shape[0]

    @property
    def n_vars(self) -> int:
        return self.phi.shape[1]

    @property
    def tau_max(self) -> int:
        """Largest lag carrying a non-zero coefficient."""
        lags = np.nonzero(np.any(self.phi != 0, axis=(0, 1, 2)))[0]
        return int(lags.max()) if lags.size else 1

    @property
    def coefficients(self) -> LinkCoefficients:
        return LinkCoefficients(self.phi)

    def spectral_radii(self) -> np.ndarray:
        return np.array([companion_spectral_radius(self.phi[k]) for k in range(self.n_regimes)])


def companion_spectral_radius(phi_k: np.ndarray) -> float:
    """Spectral radius of the VAR companion matrix of one regime (``phi_k[j, i, tau]``)."""
    n, _, lags = phi_k.shape
    p = max(lags - 1, 1)
    comp = np.zeros((n * p, n * p))
    for tau in range(1, lags):
        comp[:n, (tau - 1) * n: tau * n] = phi_k[:, :, tau]
    if p > 1:
        comp[n:, : n * (p - 1)] = np.eye(n * (p - 1))
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


@dataclass(frozen=True)
class RegimeSchedule:
    """Piecewise-constant regime labels given as consecutive windows."""

    lengths: tuple
    labels: tuple
    n_regimes: int

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(int(v) for v in self.lengths))
        object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))
        if len(self.lengths) != len(self.labels) or not self.lengths:
            raise ValueError("need one label per window")
        if any(v < 1 for v in self.lengths):
            raise ValueError("window lengths must be positive")
        if any(a == b for a, b in zip(self.labels, self.labels[1:])):
            raise ValueError("consecutive windows must have different labels")
        if any(not 0 <= v < self.n_regimes for v in self.labels):
            raise ValueError("label out of range")

    @property
    def T(self) -> int:
        return sum(self.lengths)

    @property
    def n_switches(self) -> int:
        return len(self.lengths) - 1

    def time_labels(self) -> np.ndarray:
        return np.repeat(np.array(self.labels, dtype=np.int64), self.lengths)

    def assignment(self) -> RegimeAssignment:
        gamma_labels = self.time_labels()
        variation = hard_assignment_from_labels(gamma_labels, self.n_regimes).switch_counts
        return hard_assignment_from_labels(gamma_labels, self.n_regimes, int(variation.max()))


def make_reference_schedule(seed: int, n_regimes: int, window_range=(70, 100), n_windows: int = 41,
                            cap_T: int | None = 3000, choices=None) -> RegimeSchedule:
    """Random window schedule.

    Window lengths are uniform integers in ``window_range`` (inclusive) or,
    if ``choices`` is given, drawn uniformly from it. Two regimes alternate;
    with more regimes each window picks a random label different from the
    previous one. The schedule is truncated at ``cap_T`` steps.
    """
    low, high = window_range
    if low > high:
        raise ValueError("window_range must satisfy low <= high")
    if n_windows < 1 or n_regimes < 1:
        raise ValueError("need at least one window and one regime")
    if n_regimes == 1 and n_windows > 1:
        raise ValueError("a single regime admits only one window")
    rng = np.random.default_rng(seed)
    if choices is not None:
        lengths = rng.choice(np.asarray(choices), size=n_windows)
    else:
        lengths = rng.integers(low, high + 1, size=n_windows)
    labels = [0]
    for _ in range(n_windows - 1):
        if n_regimes == 2:
            labels.append(1 - labels[-1])
        else:
            others = [k for k in range(n_regimes) if k != labels[-1]]
            labels.append(int(rng.choice(others)))
    lengths = [int(v) for v in lengths]
    if cap_T is not None:
        if cap_T < lengths[0]:
            raise ValueError(f"cap_T={cap_T} shorter than the first window ({lengths[0]})")
        kept, total = [], 0
        for v in lengths:
            if total >= cap_T:
                break
            kept.append(min(v, cap_T - total))
            total += kept[-1]
        lengths = kept
        labels = labels[: len(kept)]
    return RegimeSchedule(tuple(lengths), tuple(labels), n_regimes)


def alternating_schedule(window: int, T: int, n_regimes: int = 2) -> RegimeSchedule:
    """Regular cycle ``0, 1, ..., K-1, 0, ...`` of fixed-length windows, cut at ``T``."""
    n_full, rest = divmod(T, window)
    lengths = [window] * n_full + ([rest] if rest else [])
    labels = [w % n_regimes for w in range(len(lengths))]
    return RegimeSchedule(tuple(lengths), tuple(labels), n_regimes)


@dataclass(frozen=True)
class GroundTruth:
    assignment: RegimeAssignment
    coefficients: LinkCoefficients
    schedule: RegimeSchedule
    sigma2: float

    @property
    def parents(self):
        return self.coefficients.to_parents()


def innovations(seed: int, n_vars: int, T: int) -> np.ndarray:
    """Standard-normal noise, one independent stream per variable.

    The stream of variable ``j`` depends only on ``(seed, j)``, so adding or
    removing variables leaves the others' noise unchanged.
    """
    out = np.empty((T, n_vars))
    for j in range(n_vars):
        gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, j])))
        out[:, j] = gen.standard_normal(T)
    return out


def simulate(spec: ScmSpec, schedule: RegimeSchedule, seed: int) -> tuple[TimeSeries, GroundTruth]:
    """Run the regime-switching recursion; the first ``tau_max`` steps are pure noise."""
    if schedule.n_regimes != spec.n_regimes:
        raise ValueError("schedule and SCM disagree on the number of regimes")
    T, n, lag = schedule.T, spec.n_vars, spec.tau_max
    eps = np.sqrt(spec.sigma2) * innovations(seed, n, T)
    labels = schedule.time_labels()
    # A[k, tau] maps x_{t-tau} to x_t
    A = spec.phi[:, :, :, : lag + 1]
    x = np.zeros((T, n))
    x[:lag] = eps[:lag]
    for t in range(lag, T):
        k = labels[t]
        acc = eps[t].copy()
        for tau in range(1, lag + 1):
            acc += A[k, :, :, tau] @ x[t - tau]
        x[t] = acc
    names = tuple(f"X{j + 1}" for j in range(n))
    truth = GroundTruth(schedule.assignment(), spec.coefficients, schedule, spec.sigma2)
    return TimeSeries(x, names), truth


def _phi(n_regimes: int, n_vars: int, tau_max: int, links) -> np.ndarray:
    """Coefficient array from ``{(k, j, i, tau): value}`` with 0-based indices."""
    phi = np.zeros((n_regimes, n_vars, n_vars, tau_max + 1))
    for (k, j, i, tau), value in links.items():
        phi[k, j, i, tau] = value
    return phi


# Two-variable, two-regime cases. Keys are (regime, target, source, lag).
LOW_DIM_LINKS = {
    "arrow_direction": {
        (0, 1, 0, 1): 0.8, (0, 0, 0, 1): 0.2, (0, 1, 1, 1): 0.2,
        (1, 0, 1, 1): 0.8, (1, 0, 0, 1): 0.2, (1, 1, 1, 1): 0.2,
    },
    "causal_effect": {
        (0, 0, 0, 1): 0.8, (0, 1, 1, 1): 0.4,
        (1, 0, 0, 1): 0.1, (1, 1, 1, 1): 0.4,
    },
    "lag": {
        (0, 1, 0, 1): 0.8, (0, 0, 0, 1): 0.2, (0, 1, 1, 1): 0.2,
        (1, 1, 0, 2): 0.8, (1, 0, 0, 1): 0.2, (1, 1, 1, 1): 0.2,
    },
    "sign_x1": {
        (0, 0, 0, 1): 0.8, (0, 1, 1, 1): 0.2,
        (1, 0, 0, 1): -0.8, (1, 1, 1, 1): 0.2,
    },
    "sign_x1x2": {
        (0, 1, 0, 1): 0.8, (0, 0, 0, 1): 0.2, (0, 1, 1, 1): 0.2,
        (1, 1, 0, 1): -0.8, (1, 0, 0, 1): 0.2, (1, 1, 1, 1): 0.2,
    },
}

SIGN_ARROW_LINKS = {
    (0, 1, 0, 1): 0.8, (0, 0, 0, 1): 0.2, (0, 1, 1, 1): 0.2,
    (1, 1, 0, 1): -0.8, (1, 0, 0, 1): 0.2, (1, 1, 1, 1): 0.2,
    (2, 0, 1, 1): 0.8, (2, 0, 0, 1): 0.2, (2, 1, 1, 1): 0.2,
}


def random_linear_network(rng: np.random.Generator, n_vars: int = 10, n_cross: int = 30,
                          coef_range=(-0.4, 0.4), min_abs: float = 0.1,
                          auto_choices=(0.2, 0.5, 0.9), max_lag: int = 3,
                          max_tries: int = 10_000) -> np.ndarray:
    """One stable regime network, ``phi[j, i, tau]``.

    Every variable gets a lag-1 auto-link drawn from ``auto_choices``;
    ``n_cross`` distinct cross links ``(j, i != j, tau)`` get coefficients
    uniform on ``coef_range`` with ``|phi| >= min_abs``. Unstable draws are
    rejected and redrawn.
    """
    slots = [(j, i, tau) for j in range(n_vars) for i in range(n_vars) if i != j
             for tau in range(1, max_lag + 1)]
    low, high = coef_range
    for _ in range(max_tries):
        phi = np.zeros((n_vars, n_vars, max_lag + 1))
        for j in range(n_vars):
            phi[j, j, 1] = rng.choice(auto_choices)
        for idx in rng.choice(len(slots), size=n_cross, replace=False):
            value = 0.0
            while abs(value) < min_abs:
                value = rng.uniform(low, high)
            phi[slots[idx]] = value
        if companion_spectral_radius(phi) < 1:
            return phi
    raise RuntimeError("could not draw a stable network")


@dataclass(frozen=True)
class Experiment:
    """A named benchmark: how to build its SCM and schedule, and the fit settings to use."""

    name: str
    n_regimes: int
    build: Callable[[int], tuple[ScmSpec, RegimeSchedule]] = field(repr=False)
    pcmci: PcmciConfig
    switch_budget: int
    n_iterations: int
    n_annealings: int

    def make(self, seed: int) -> tuple[ScmSpec, RegimeSchedule]:
        return self.build(seed)

    def generate(self, seed: int) -> tuple[TimeSeries, GroundTruth]:
        spec, schedule = self.make(seed)
        return simulate(spec, schedule, seed)


def _low_dim(name: str) -> Experiment:
    phi = _phi(2, 2, 2, LOW_DIM_LINKS[name])
    spec = ScmSpec(phi, 1.0, name)

    def build(seed: int):
        return spec, make_reference_schedule(seed, 2, (70, 100), 41, 3000)

    return Experiment(name, 2, build, PcmciConfig(3, 0.01, 0.2), 40, 20, 50)


def _sign_arrow() -> Experiment:
    spec = ScmSpec(_phi(3, 2, 1, SIGN_ARROW_LINKS), 1.0, "sign_x1x2_arrow")

    def build(seed: int):
        return spec, make_reference_schedule(seed, 3, (60, 80), 20, None, choices=(60, 70, 80))

    return Experiment("sign_x1x2_arrow", 3, build, PcmciConfig(3, 0.01, 0.2), 40, 20, 50)


def high_dimensional(T: int = 15000, window: int = 300) -> Experiment:
    """Random ten-variable, two-regime family; each seed draws new networks."""

    def build(seed: int):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        phi = np.stack([random_linear_network(rng) for _ in range(2)])
        return ScmSpec(phi, 1.0, "high_dimensional"), alternating_schedule(window, T, 2)

    return Experiment("high_dimensional", 2, build, PcmciConfig(4, 0.05, 0.2), 49, 30, 50)


def experiment_catalog() -> dict[str, Experiment]:
    catalog = {name: _low_dim(name) for name in LOW_DIM_LINKS}
    catalog["sign_x1x2_arrow"] = _sign_arrow()
    catalog["high_dimensional"] = high_dimensional()
    return catalog


def get_experiment(name: str) -> Experiment:
    catalog = experiment_catalog()
    if name not in catalog:
        raise KeyError(f"unknown experiment {name!r}; choose from {sorted(catalog)}")
    return catalog[name]
