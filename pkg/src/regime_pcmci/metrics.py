"""Scores comparing a fitted model to synthetic ground truth.

Regime labels are arbitrary, so estimates are first relabelled by the
permutation that best matches the reference (:func:`match_regimes`).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import FitResult, LinkCoefficients, RegimeAssignment, TimeSeries
from .regime_opt import reconstruct_per_regime


@dataclass(frozen=True)
class EvalReport:
    delta_gamma_pct: float
    delta_gamma_per_regime: tuple
    tpr_all: float
    fpr_all: float
    tpr_cross: float
    fpr_cross: float
    delta_phi: float
    delta_phi_pct: float
    prediction_error: float
    prediction_mae: float
    matched_permutation: tuple
    converged: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out["delta_gamma_per_regime"] = list(self.delta_gamma_per_regime)
        out["matched_permutation"] = list(self.matched_permutation)
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in out.items()}


def _check_shapes(estimated: RegimeAssignment, reference: RegimeAssignment):
    if estimated.gamma.shape != reference.gamma.shape:
        raise ValueError(f"assignments differ in shape: {estimated.gamma.shape} vs {reference.gamma.shape}")


def delta_gamma(estimated: RegimeAssignment, reference: RegimeAssignment, tau_max: int = 0) -> np.ndarray:
    """Percentage of time steps ``t >= tau_max`` where ``gamma_k`` differs, per regime."""
    _check_shapes(estimated, reference)
    diff = np.abs(estimated.gamma[:, tau_max:].astype(int) - reference.gamma[:, tau_max:])
    return 100.0 * diff.sum(axis=1) / (estimated.T - tau_max)


def match_regimes(estimated: RegimeAssignment, reference: RegimeAssignment, tau_max: int = 0) -> tuple:
    """Relabelling ``perm`` (estimated ``k`` -> reference ``perm[k]``) minimizing the summed mismatch.

    All permutations are enumerated; ties go to the lexicographically first.
    """
    _check_shapes(estimated, reference)
    n_k = estimated.n_regimes
    if n_k > 8:
        raise ValueError("too many regimes for exhaustive matching")
    est = estimated.gamma[:, tau_max:].astype(np.int64)
    ref = reference.gamma[:, tau_max:].astype(np.int64)
    overlap = est @ ref.T  # overlap[a, b]: steps labelled a in the estimate and b in the reference
    best, best_perm = -1, None
    for perm in itertools.permutations(range(n_k)):
        score = sum(overlap[a, perm[a]] for a in range(n_k))
        if score > best:
            best, best_perm = score, perm
    return tuple(int(p) for p in best_perm)


def _as_phi(coeffs) -> np.ndarray:
    return coeffs.phi if isinstance(coeffs, LinkCoefficients) else np.asarray(coeffs, dtype=float)


def _common_lags(est: np.ndarray, ref: np.ndarray, tau_max: int | None):
    tau = max(est.shape[3], ref.shape[3]) - 1 if tau_max is None else tau_max
    out = []
    for a in (est, ref):
        b = np.zeros(a.shape[:3] + (tau + 1,))
        keep = min(a.shape[3], tau + 1)
        b[..., :keep] = a[..., :keep]
        out.append(b)
    return out[0], out[1], tau


@dataclass(frozen=True)
class LinkCounts:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def tpr(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else math.nan

    @property
    def fpr(self) -> float:
        return self.fp / (self.fp + self.tn) if self.fp + self.tn else math.nan


def link_counts(estimated, reference, scope: str = "all", tau_max: int | None = None) -> LinkCounts:
    """Confusion counts over the grid ``(k, j, i, tau)``, ``1 <= tau <= tau_max``.

    ``scope="cross"`` restricts to ``i != j``. ``tau_max`` defaults to the
    larger lag range of the two arrays.
    """
    est, ref, tau = _common_lags(_as_phi(estimated), _as_phi(reference), tau_max)
    if est.shape[:3] != ref.shape[:3]:
        raise ValueError("coefficient arrays disagree in regimes or variables")
    grid = np.ones(est.shape, dtype=bool)
    grid[..., 0] = False
    if scope == "cross":
        n = est.shape[1]
        grid &= ~np.eye(n, dtype=bool)[None, :, :, None]
    elif scope != "all":
        raise ValueError("scope must be 'all' or 'cross'")
    pos = (ref != 0) & grid
    neg = (ref == 0) & grid
    found = est != 0
    return LinkCounts(int(np.sum(found & pos)), int(np.sum(~found & pos)),
                      int(np.sum(found & neg)), int(np.sum(~found & neg)))


def link_rates(estimated, reference, scope: str = "all", tau_max: int | None = None) -> tuple[float, float]:
    """(TPR, FPR) of detected links; NaN when a denominator is empty."""
    counts = link_counts(estimated, reference, scope, tau_max)
    return counts.tpr, counts.fpr


def delta_phi(estimated, reference) -> tuple[float, float]:
    """Mean absolute coefficient error over the reference parents.

    Averaged first over the parents of each regime and then over regimes.
    The percentage variant divides each error by ``|phi_ref|``. Missed links
    count with their full reference value. Regimes without reference
    parents are skipped; if none has parents the result is ``(nan, nan)``.
    """
    est, ref, _ = _common_lags(_as_phi(estimated), _as_phi(reference), None)
    abs_err, pct_err = [], []
    for k in range(ref.shape[0]):
        mask = ref[k] != 0
        if not mask.any():
            continue
        err = np.abs(est[k][mask] - ref[k][mask])
        abs_err.append(err.mean())
        pct_err.append(100.0 * np.mean(err / np.abs(ref[k][mask])))
    if not abs_err:
        return math.nan, math.nan
    return float(np.mean(abs_err)), float(np.mean(pct_err))


def prediction_error(series: TimeSeries, result: FitResult, tau_max: int) -> tuple[float, float]:
    """``(sqrt(L / (N_X (T - tau_max))), mean absolute error)`` of the regime-wise one-step predictions."""
    preds = reconstruct_per_regime(series, result.coefficients.phi)
    labels = result.assignment.labels
    resid = (series.values - preds[labels, np.arange(series.T)])[tau_max:]
    return float(math.sqrt(np.mean(resid ** 2))), float(np.mean(np.abs(resid)))


def evaluate(series: TimeSeries, result: FitResult, reference_assignment: RegimeAssignment,
             reference_coefficients, tau_max: int) -> EvalReport:
    """All scores of one fit after relabelling its regimes to match the reference."""
    perm = match_regimes(result.assignment, reference_assignment, tau_max)
    assignment = result.assignment.permuted(perm)
    coeffs = result.coefficients.permuted(perm)
    dg = delta_gamma(assignment, reference_assignment, tau_max)
    ref_phi = _as_phi(reference_coefficients)
    tpr_all, fpr_all = link_rates(coeffs, ref_phi, "all", tau_max)
    tpr_cross, fpr_cross = link_rates(coeffs, ref_phi, "cross", tau_max)
    d_abs, d_pct = delta_phi(coeffs, ref_phi)
    eps, mae = prediction_error(series, result, tau_max)
    return EvalReport(float(dg.mean()), tuple(float(v) for v in dg), tpr_all, fpr_all, tpr_cross, fpr_cross,
                      d_abs, d_pct, eps, mae, perm, bool(result.converged))


SUMMARY_COLUMNS = ("delta_gamma_pct", "tpr_all", "tpr_all_ref", "fpr_all", "fpr_all_ref",
                   "tpr_cross", "tpr_cross_ref", "fpr_cross", "fpr_cross_ref",
                   "delta_phi", "delta_phi_ref", "delta_phi_pct", "delta_phi_pct_ref",
                   "prediction_error", "local_minima_fraction", "n_runs")


def summarize(reports, reference_reports=None, max_delta_gamma: float | None = None) -> dict:
    """Average a batch of reports into one table row.

    ``reference_reports`` are evaluations of PCMCI run with the true regimes
    and fill the ``*_ref`` columns. With ``max_delta_gamma`` only realisations
    whose regime error is below it are kept.
    """
    reports = list(reports)
    refs = list(reference_reports) if reference_reports is not None else [None] * len(reports)
    if max_delta_gamma is not None:
        keep = [i for i, r in enumerate(reports) if r.delta_gamma_pct < max_delta_gamma]
        reports = [reports[i] for i in keep]
        refs = [refs[i] for i in keep]

    def mean(values):
        values = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
        return float(np.mean(values)) if values else math.nan

    row = {"n_runs": len(reports)}
    for key in ("delta_gamma_pct", "tpr_all", "fpr_all", "tpr_cross", "fpr_cross",
                "delta_phi", "delta_phi_pct", "prediction_error"):
        row[key] = mean([getattr(r, key) for r in reports])
        if key not in ("delta_gamma_pct", "prediction_error"):
            row[key + "_ref"] = mean([getattr(r, key) if r is not None else None for r in refs])
    row["local_minima_fraction"] = mean([float(r.converged) for r in reports])
    return {c: row.get(c, math.nan) for c in SUMMARY_COLUMNS}
