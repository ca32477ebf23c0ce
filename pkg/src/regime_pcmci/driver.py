"""Alternating regime / causal-graph estimation with random restarts.

One run starts from i.i.d. uniform regime labels and alternates

1. PCMCI plus least-squares effect estimation on each regime's time steps, and
2. the exact persistence-constrained regime assignment given those models,

until the assignment stops changing or ``n_iterations`` is reached. Several
runs ("annealings") with different seeds are made and the one with the
lowest objective is kept. The number of regimes can be chosen by AICc.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (FitResult, InsufficientSamplesError, LinkCoefficients, ParentSet, RegimeAssignment,
                   RegimePcmciError, TimeSeries, hard_assignment_from_labels, regime_members)
from .pcmci import PcmciConfig, estimate_effects, run_pcmci
from .regime_opt import optimize_assignment, reconstruct_per_regime, residual_matrix
from .stats import gaussian_loglik_rss


class AllAnnealingsFailedError(RegimePcmciError):
    pass


class OverparameterizedError(RegimePcmciError, ValueError):
    pass


@dataclass(frozen=True)
class DriverConfig:
    """Settings of the alternating optimization.

    Parameters
    ----------
    n_regimes : int
        Number of assumed regimes.
    switch_budget : int
        Maximum number of transitions per regime.
    n_iterations : int
        Maximum number of alternation steps per run.
    n_annealings : int
        Number of randomly initialized runs.
    pcmci : PcmciConfig
    seed : int
        Run ``a`` uses seed ``seed + a``.
    n_jobs : int
        Worker processes for the annealings; results do not depend on it.
    """

    n_regimes: int = 2
    switch_budget: int = 40
    n_iterations: int = 20
    n_annealings: int = 50
    pcmci: PcmciConfig = field(default_factory=PcmciConfig)
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_regimes < 1 or self.n_annealings < 1 or self.n_iterations < 1:
            raise ValueError("n_regimes, n_annealings and n_iterations must be at least 1")
        if self.switch_budget < 0:
            raise ValueError("switch_budget must be non-negative")


@dataclass(frozen=True)
class IterationRecord:
    """Objective of the current assignment and of its update under the same models."""

    iteration: int
    objective_before: float
    objective_after: float
    incoming_feasible: bool
    n_changed: int


@dataclass(frozen=True)
class RegimeModels:
    parents: ParentSet
    phi: np.ndarray
    pvalues: np.ndarray


def causal_step(series: TimeSeries, assignment: RegimeAssignment, cfg: PcmciConfig) -> RegimeModels:
    """PCMCI and effect estimation on each regime's samples."""
    n, tau = series.n_vars, cfg.tau_max
    parents, phis, pvals = [], [], []
    for k in range(assignment.n_regimes):
        members = regime_members(assignment, k)
        res = run_pcmci(series, members, cfg)
        parents.append(res.parents)
        phis.append(estimate_effects(series, members, res.parents, tau))
        pvals.append(res.pvalues)
    return RegimeModels(ParentSet(tuple(parents), tau),
                        np.stack(phis) if phis else np.zeros((0, n, n, tau + 1)),
                        np.stack(pvals))


def _prediction_error(objective: float, series: TimeSeries, tau_max: int) -> float:
    return math.sqrt(objective / (series.n_vars * (series.T - tau_max)))


def _result(series, assignment, models, objective, iterations, converged, seed, tau, failure, history):
    return FitResult(assignment, models.parents, LinkCoefficients(models.phi), float(objective),
                     _prediction_error(objective, series, tau), iterations, converged, int(seed),
                     models.pvalues, failure, tuple(history))


def fit_once(series: TimeSeries, cfg: DriverConfig, seed: int, initial_labels=None) -> FitResult:
    """One alternating-optimization run from a random initial assignment.

    The run stops early, with ``converged=True``, when an update leaves the
    assignment unchanged. If a regime falls below the sample floor the run
    stops, keeps the best consistent state seen so far and carries a
    ``failure`` note. ``initial_labels`` replaces the seeded random start.

    Raises
    ------
    InsufficientSamplesError
        If not even the initial assignment supports an estimate.
    """
    tau = cfg.pcmci.tau_max
    if series.T <= tau + 1:
        raise InsufficientSamplesError("series shorter than tau_max", series.T, tau + 2)
    if initial_labels is None:
        initial_labels = np.random.default_rng(seed).integers(0, cfg.n_regimes, size=series.T)
    assignment = hard_assignment_from_labels(initial_labels, cfg.n_regimes)

    history: list[IterationRecord] = []
    states: list[tuple] = []  # (objective, feasible, assignment, models)
    converged = False
    failure = None
    for q in range(cfg.n_iterations):
        try:
            models = causal_step(series, assignment, cfg.pcmci)
        except InsufficientSamplesError as exc:
            failure = f"iteration {q}: {exc}"
            break
        cost = residual_matrix(series, reconstruct_per_regime(series, models.phi), tau)
        before = cost.objective(assignment)
        updated, after = optimize_assignment(cost, cfg.switch_budget)
        feasible = assignment.n_changepoints <= cfg.switch_budget
        if feasible and after > before + 1e-9 * max(1.0, before):
            raise RuntimeError(f"assignment update increased the objective ({before} -> {after})")
        n_changed = int(np.count_nonzero(updated.labels != assignment.labels))
        history.append(IterationRecord(q, before, after, feasible, n_changed))
        states.append((before, feasible, assignment, models))
        if n_changed == 0:
            converged = True
            break
        assignment = updated

    iterations = len(history)
    if converged:
        before, _, assignment, models = states[-1]
        return _result(series, assignment, models, before, iterations, True, seed, tau, None, history)

    if failure is None:
        # ran out of iterations: refit the models on the final assignment
        try:
            models = causal_step(series, assignment, cfg.pcmci)
            cost = residual_matrix(series, reconstruct_per_regime(series, models.phi), tau)
            return _result(series, assignment, models, cost.objective(assignment), iterations, False,
                           seed, tau, None, history)
        except InsufficientSamplesError as exc:
            failure = f"refit: {exc}"

    if not states:
        raise InsufficientSamplesError(failure or "no usable state")
    feasible_states = [s for s in states if s[1]] or states
    before, _, assignment, models = min(feasible_states, key=lambda s: s[0])
    return _result(series, assignment, models, before, iterations, False, seed, tau, failure, history)


def _fit_job(args):
    series, cfg, seed = args
    try:
        return fit_once(series, cfg, seed), None
    except InsufficientSamplesError as exc:
        return None, f"seed {seed}: {exc}"


@dataclass(frozen=True)
class AnnealingResult:
    runs: tuple
    best_index: int
    failures: tuple = ()

    @property
    def best(self) -> FitResult:
        return self.runs[self.best_index]

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.runs])


def fit_annealed(series: TimeSeries, cfg: DriverConfig) -> AnnealingResult:
    """Independent runs with seeds ``cfg.seed + a``; the lowest objective wins.

    Runs that could not produce any state are listed in ``failures``. Ties
    in the objective go to the smaller seed.
    """
    jobs = [(series, cfg, cfg.seed + a) for a in range(cfg.n_annealings)]
    if cfg.n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
            outcomes = list(pool.map(_fit_job, jobs))
    else:
        outcomes = [_fit_job(job) for job in jobs]
    runs = tuple(r for r, _ in outcomes if r is not None)
    failures = tuple(msg for _, msg in outcomes if msg is not None)
    if not runs:
        raise AllAnnealingsFailedError(f"all {len(jobs)} annealings failed: {failures[0]}")
    ok = [a for a, r in enumerate(runs) if not r.failed] or list(range(len(runs)))
    best = min(ok, key=lambda a: (runs[a].objective, runs[a].seed))
    return AnnealingResult(runs, best, failures)


def count_parameters(result: FitResult, n_c: int, n_k: int | None = None) -> int:
    """``(N_K - 1) N_C`` change-point parameters plus the number of non-zero effects."""
    n_k = result.n_regimes if n_k is None else n_k
    return (n_k - 1) * n_c + int(np.count_nonzero(result.coefficients.phi))


def aicc(loglik: float, n_para: int, n_obs: int) -> float:
    """Small-sample corrected Akaike information criterion."""
    denom = n_obs - n_para - 1
    if denom <= 0:
        raise OverparameterizedError(f"{n_para} parameters for {n_obs} observations")
    return -2.0 * loglik + 2.0 * n_para + 2.0 * n_para * (n_para + 1) / denom


def model_loglik(series: TimeSeries, result: FitResult, tau_max: int, pooled: bool = True) -> tuple[float, int]:
    """Gaussian log-likelihood of the fitted model's residuals and the number of observations.

    With ``pooled=True`` all variables share one residual variance;
    otherwise each variable gets its own.
    """
    preds = reconstruct_per_regime(series, result.coefficients.phi)
    labels = result.assignment.labels
    chosen = preds[labels, np.arange(series.T)]
    resid = (series.values - chosen)[tau_max:]
    n_t = resid.shape[0]
    if pooled:
        return gaussian_loglik_rss(float(np.sum(resid ** 2)), resid.size), resid.size
    total = sum(gaussian_loglik_rss(float(resid[:, j] @ resid[:, j]), n_t) for j in range(series.n_vars))
    return total, resid.size


@dataclass(frozen=True)
class CandidateScore:
    n_regimes: int
    switch_budget: int
    objective: float
    prediction_error: float
    n_para: int
    loglik: float
    aicc: float
    chosen: bool = False


@dataclass(frozen=True)
class SelectionReport:
    candidates: tuple
    chosen: int
    plateau_tol: float

    @property
    def aicc_curve(self) -> dict:
        return {c.n_regimes: c.aicc for c in self.candidates}


def adapted_budget(base_budget: int, base_regimes: int, n_regimes: int) -> int:
    """Switch budget keeping the mean regime duration fixed across ``N_K``."""
    return max(0, int(round(base_budget * base_regimes / n_regimes)))


def choose_plateau(aicc_values: dict, tol: float = 2.0) -> int:
    """Smallest ``N_K`` whose AICc is within ``tol`` of the minimum."""
    finite = {k: v for k, v in aicc_values.items() if math.isfinite(v)}
    if not finite:
        raise ValueError("no candidate has a finite AICc")
    best = min(finite.values())
    return min(k for k, v in finite.items() if v <= best + tol)


def select_n_regimes(series: TimeSeries, base_cfg: DriverConfig, candidates, plateau_tol: float = 2.0,
                     pooled: bool = True) -> SelectionReport:
    """Fit every candidate number of regimes and pick the AICc plateau entry point."""
    candidates = sorted(set(int(c) for c in candidates))
    if not candidates:
        raise ValueError("no candidate numbers of regimes")
    tau = base_cfg.pcmci.tau_max
    rows = []
    for n_k in candidates:
        budget = adapted_budget(base_cfg.switch_budget, base_cfg.n_regimes, n_k)
        cfg = replace(base_cfg, n_regimes=n_k, switch_budget=budget)
        best = fit_annealed(series, cfg).best
        n_para = count_parameters(best, budget, n_k)
        loglik, n_obs = model_loglik(series, best, tau, pooled)
        try:
            score = aicc(loglik, n_para, n_obs)
        except OverparameterizedError:
            score = math.inf
        rows.append(CandidateScore(n_k, budget, best.objective, best.prediction_error, n_para, loglik, score))
    chosen = choose_plateau({r.n_regimes: r.aicc for r in rows}, plateau_tol)
    rows = tuple(replace(r, chosen=r.n_regimes == chosen) for r in rows)
    return SelectionReport(rows, chosen, plateau_tol)


def fit_known_regimes(series: TimeSeries, assignment: RegimeAssignment, cfg: PcmciConfig) -> FitResult:
    """PCMCI and effect estimation with the regimes given (no regime learning).

    Serves as the reference against which learned regimes are compared.
    """
    tau = cfg.tau_max
    models = causal_step(series, assignment, cfg)
    cost = residual_matrix(series, reconstruct_per_regime(series, models.phi), tau)
    return _result(series, assignment, models, cost.objective(assignment), 0, True, 0, tau, None, ())
