"""Least squares, partial-correlation CI tests and Gaussian likelihoods.

Two routes compute a partial correlation. :func:`partial_correlation_test`
residualizes the raw samples by least squares and is the reference
definition. :func:`partial_correlation_cov` works on a precomputed sample
covariance matrix and is what the discovery loops call, since one covariance
per regime serves every test on it. Both agree to rounding error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .core import InsufficientSamplesError

# Relative eigenvalue cutoff below which a conditioning direction counts as collinear.
RANK_TOL = 1e-10


@dataclass(frozen=True)
class OLSFit:
    coefficients: np.ndarray
    residuals: np.ndarray
    rss: float
    n: int
    p: int
    rank: int


@dataclass(frozen=True)
class CITestResult:
    statistic: float
    pvalue: float
    sample_size: int
    n_conditions: int
    dof: int
    degenerate: bool = False


def ols_fit(design, target) -> OLSFit:
    """Least-squares fit of ``target`` on the columns of ``design`` (no intercept added).

    Uses an SVD-based solver, so rank-deficient designs get the minimum-norm
    solution.
    """
    y = np.asarray(target, dtype=float).ravel()
    X = np.asarray(design, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.size == 0:
        X = np.zeros((y.size, 0))
    n, p = X.shape
    if n != y.size:
        raise ValueError(f"design has {n} rows but target has {y.size} entries")
    if n < p:
        raise InsufficientSamplesError(f"{n} samples for {p} predictors", n, p)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise FloatingPointError("non-finite values in least-squares input")
    if p == 0:
        return OLSFit(np.zeros(0), y.copy(), float(y @ y), n, 0, 0)
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return OLSFit(coef, resid, float(resid @ resid), n, p, int(rank))


@numba.njit(cache=True)
def _betacf(a, b, x):
    fpmin = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, 20000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


@numba.njit(cache=True)
def betainc(a, b, x):
    """Regularized incomplete beta function ``I_x(a, b)`` by continued fraction."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


@numba.njit(cache=True)
def correlation_pvalue(r, dof):
    """Two-sided Student-t p-value of a (partial) correlation ``r``.

    With ``t = r sqrt(dof / (1 - r^2))`` the tail probability is
    ``I_{dof / (dof + t^2)}(dof / 2, 1 / 2)`` and ``dof / (dof + t^2) = 1 - r^2``.
    """
    r2 = r * r
    if r2 >= 1.0:
        return 0.0
    if r2 < 0.5:
        # complement form; avoids cancellation in 1 - r^2 for small r
        p = 1.0 - betainc(0.5, 0.5 * dof, r2)
    else:
        p = betainc(0.5 * dof, 0.5, 1.0 - r2)
    return min(max(p, 0.0), 1.0)


def student_t_sf2(t: float, dof: float) -> float:
    """Two-sided tail probability ``P(|T| > |t|)`` of Student's t."""
    return float(betainc(0.5 * dof, 0.5, dof / (dof + t * t)))


def _fail_dof(n: int, m: int, dof: int):
    raise InsufficientSamplesError(
        f"partial correlation needs n - m - 2 >= 1, got n={n}, m={m}", n, m + 3)


def partial_correlation_test(x, y, z=None) -> CITestResult:
    """Test ``x`` independent of ``y`` given ``z`` by partial correlation.

    ``x`` and ``y`` are residualized on ``[1, z]`` by least squares and the
    Pearson correlation of the residuals is tested with a two-sided t-test on
    ``n - rank(z) - 2`` degrees of freedom. Collinear condition columns are
    dropped by the rank-revealing solve. If either residual has zero
    variance the result is ``statistic=0, pvalue=1`` flagged ``degenerate``.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    if y.size != n:
        raise ValueError("x and y must have equal length")
    if z is None:
        z = np.zeros((n, 0))
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[0] != n:
        raise ValueError("z must have one row per sample")
    m = z.shape[1]

    design = np.column_stack([np.ones(n), z])
    coef, _, rank, _ = np.linalg.lstsq(design, np.column_stack([x, y]), rcond=None)
    resid = np.column_stack([x, y]) - design @ coef
    rank_z = int(rank) - 1
    dof = n - rank_z - 2
    if dof < 1:
        _fail_dof(n, m, dof)

    sxx, syy = resid[:, 0] @ resid[:, 0], resid[:, 1] @ resid[:, 1]
    scale_x = max(1.0, float(x @ x))
    scale_y = max(1.0, float(y @ y))
    if sxx <= 1e-24 * scale_x or syy <= 1e-24 * scale_y:
        return CITestResult(0.0, 1.0, n, m, dof, degenerate=True)
    r = float(resid[:, 0] @ resid[:, 1] / math.sqrt(sxx * syy))
    r = min(1.0, max(-1.0, r))
    return CITestResult(r, float(correlation_pvalue(r, dof)), n, m, dof)


@numba.njit(cache=True)
def _partial_corr_cov(cov, ix, iy, iz):
    """Partial correlation and rank of the conditioning set from a covariance matrix.

    Returns ``(r, rank_z, degenerate)``.
    """
    m = iz.size
    sxx = cov[ix, ix]
    syy = cov[iy, iy]
    sxy = cov[ix, iy]
    rank = 0
    if m > 0:
        czz = np.empty((m, m))
        cza = np.empty((m, 2))
        for a in range(m):
            for b in range(m):
                czz[a, b] = cov[iz[a], iz[b]]
            cza[a, 0] = cov[iz[a], ix]
            cza[a, 1] = cov[iz[a], iy]
        # work in correlation scale so the rank cutoff is unit-free
        d = np.empty(m)
        for a in range(m):
            d[a] = math.sqrt(czz[a, a]) if czz[a, a] > 0.0 else 0.0
        for a in range(m):
            for b in range(m):
                if d[a] > 0.0 and d[b] > 0.0:
                    czz[a, b] /= d[a] * d[b]
                else:
                    czz[a, b] = 1.0 if (a == b and d[a] > 0.0) else 0.0
            if d[a] > 0.0:
                cza[a, 0] /= d[a]
                cza[a, 1] /= d[a]
            else:
                cza[a, 0] = 0.0
                cza[a, 1] = 0.0
        w, v = np.linalg.eigh(czz)
        wmax = w.max()
        proj = v.T @ cza
        for a in range(m):
            if w[a] > RANK_TOL * max(wmax, 1e-300):
                rank += 1
        for a in range(m):
            if w[a] > RANK_TOL * max(wmax, 1e-300):
                sxx -= proj[a, 0] * proj[a, 0] / w[a]
                syy -= proj[a, 1] * proj[a, 1] / w[a]
                sxy -= proj[a, 0] * proj[a, 1] / w[a]
    tol_x = 1e-12 * max(cov[ix, ix], 1e-300)
    tol_y = 1e-12 * max(cov[iy, iy], 1e-300)
    if sxx <= tol_x or syy <= tol_y:
        return 0.0, rank, True
    r = sxy / math.sqrt(sxx * syy)
    if r > 1.0:
        r = 1.0
    elif r < -1.0:
        r = -1.0
    return r, rank, False


def partial_correlation_cov(cov: np.ndarray, n: int, x: int, y: int, z=()) -> CITestResult:
    """Partial correlation test from a sample covariance matrix.

    ``cov`` must be the (mean-centred) covariance of ``n`` samples; ``x``,
    ``y`` and the entries of ``z`` index its rows. Equivalent to
    :func:`partial_correlation_test` on the underlying samples.
    """
    iz = np.asarray(z, dtype=np.int64).reshape(-1)
    r, rank, degenerate = _partial_corr_cov(cov, int(x), int(y), iz)
    dof = n - rank - 2
    if dof < 1:
        _fail_dof(n, iz.size, dof)
    if degenerate:
        return CITestResult(0.0, 1.0, n, iz.size, dof, degenerate=True)
    return CITestResult(float(r), float(correlation_pvalue(r, dof)), n, iz.size, dof)


def gaussian_loglik_rss(rss: float, n_obs: int) -> float:
    """Maximized i.i.d. zero-mean Gaussian log-likelihood given the residual sum of squares.

    Returns ``inf`` for a perfect fit (``rss == 0``); callers treat that as degenerate.
    """
    if n_obs < 1:
        raise ValueError("n_obs must be at least 1")
    if rss <= 0:
        return math.inf
    sigma2 = rss / n_obs
    return -0.5 * n_obs * (math.log(2 * math.pi * sigma2) + 1.0)


def gaussian_loglik(residuals, n_obs: int | None = None) -> float:
    r = np.asarray(residuals, dtype=float).ravel()
    return gaussian_loglik_rss(float(r @ r), r.size if n_obs is None else n_obs)
