"""Empirical-distribution statistics: exact KS distances, tails, slope fits."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from mplab.errors import DomainError


def kolmogorov_c(alpha: float) -> float:
    """Asymptotic Kolmogorov critical constant c(alpha) = sqrt(-ln(alpha/2) / 2)."""
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    return math.sqrt(-0.5 * math.log(alpha / 2.0))


def ks_critical_one_sample(n: int, alpha: float = 0.001) -> float:
    return kolmogorov_c(alpha) / math.sqrt(n)


def ks_critical_two_sample(n: int, m: int, alpha: float = 0.001) -> float:
    return kolmogorov_c(alpha) * math.sqrt((n + m) / (n * m))


def _nonempty(samples, name="samples"):
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise DomainError(f"{name} is empty")
    return x


def _eval_cdf(cdf, x):
    # Try the cdf on the whole array; scalar-only callables fall through.
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", DeprecationWarning)
            out = np.asarray(cdf(x), dtype=float)
        if out.shape == x.shape:
            return out
    except (TypeError, ValueError, DeprecationWarning):
        pass
    return np.array([cdf(float(v)) for v in x])


def ks_one_sample(samples, cdf) -> float:
    """sup_t |ECDF(t) - cdf(t)|, evaluated exactly on both sides of every jump.

    ``cdf`` may be vectorised or scalar-only.
    """
    x = np.sort(_nonempty(samples))
    n = x.size
    f = _eval_cdf(cdf, x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_two_sample(a, b) -> float:
    """sup over the merged sample of |ECDF_a - ECDF_b|."""
    a = np.sort(_nonempty(a, "a"))
    b = np.sort(_nonempty(b, "b"))
    points = np.concatenate([a, b])
    fa = np.searchsorted(a, points, side="right") / a.size
    fb = np.searchsorted(b, points, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def tail_frequencies(samples, thresholds) -> np.ndarray:
    """Fraction of samples with |x| >= t for each t in ascending ``thresholds``."""
    x = np.sort(np.abs(_nonempty(samples)))
    t = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(t) < 0):
        raise DomainError("thresholds must be ascending")
    return (x.size - np.searchsorted(x, t, side="left")) / x.size


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r2: float


def linear_fit(xs, ys) -> LineFit:
    """Ordinary least squares y = slope * x + intercept, with R^2."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise DomainError("need at least two (x, y) pairs of matching shape")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise DomainError("xs are all equal")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - slope * x - intercept) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return LineFit(slope, intercept, r2)


def loglog_slope(xs, ys) -> LineFit:
    """Least-squares slope of log ys against log xs."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("loglog_slope needs strictly positive values")
    return linear_fit(np.log(x), np.log(y))


@dataclass(frozen=True)
class EmpiricalSummary:
    count: int
    sorted_samples: np.ndarray
    mean: float
    variance: float
    ks_vs_reference: float | None = None

    @property
    def moments(self):
        return self.mean, self.variance


def summarize(samples, reference_cdf=None) -> EmpiricalSummary:
    x = np.sort(_nonempty(samples))
    var = float(np.var(x, ddof=1)) if x.size > 1 else 0.0
    ks = ks_one_sample(x, reference_cdf) if reference_cdf is not None else None
    return EmpiricalSummary(int(x.size), x, float(np.mean(x)), var, ks)


def normal_cdf(x):
    return special.ndtr(x)


def chi2_cdf(k):
    return lambda x: special.chdtr(k, np.maximum(x, 0.0))


@dataclass(frozen=True)
class NormalityReport:
    k: int
    marginal_ks: tuple[float, ...]
    max_abs_offdiag_corr: float
    mahalanobis_ks: float


def normality_proxy(draws, mu, sigma, scale=1.0) -> NormalityReport:
    """Marginal, correlation and Mahalanobis checks against N(mu, diag(sigma^2) / scale^2).

    Stands in for the distance over convex sets, which is not computable;
    each part lower-bounds it.
    """
    x = np.asarray(draws, dtype=float)
    if x.ndim != 2:
        raise DomainError(f"draws must be a (trials, k) array, got shape {x.shape}")
    trials, k = x.shape
    if trials < 100:
        raise DomainError(f"need at least 100 trials, got {trials}")
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if mu.shape != (k,) or sigma.shape != (k,):
        raise DomainError("mu and sigma must have one entry per coordinate")
    if np.any(~np.isfinite(sigma)) or np.any(sigma <= 0) or not scale > 0:
        raise DomainError("sigma and scale must be positive")
    z = (x - mu) * scale / sigma
    marginal = tuple(ks_one_sample(z[:, j], normal_cdf) for j in range(k))
    if k > 1:
        corr = np.corrcoef(z, rowvar=False)
        off = corr[~np.eye(k, dtype=bool)]
        max_corr = float(np.max(np.abs(np.nan_to_num(off, nan=1.0))))
    else:
        max_corr = 0.0
    maha = ks_one_sample(np.sum(z * z, axis=1), chi2_cdf(k))
    return NormalityReport(k, marginal, max_corr, maha)
