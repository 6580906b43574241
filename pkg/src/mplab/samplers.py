"""Exact chi-squared samplers for pointwise Lyapunov quantities.

For a fixed orthonormal k-frame, log ||X_{N,n}(Theta)|| is a sum of N k
independent terms (1/2) log(chi^2_{n-j+1} / n), j = 1..k. Drawing those
terms directly gives the pointwise statistics at a cost of O(N k) scalars
instead of N dense QR factorizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mplab import analytic
from mplab.errors import DomainError


def _gamma_marsaglia_tsang(shape_param, rng):
    # Gamma(a, 1) for a >= 1, elementwise over an array of shapes.
    a = np.asarray(shape_param, dtype=float)
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty_like(a)
    todo = np.arange(a.size)
    d_flat, c_flat, out_flat = d.ravel(), c.ravel(), out.reshape(-1)
    while todo.size:
        dd = d_flat[todo]
        cc = c_flat[todo]
        z = rng.standard_normal(todo.size)
        u = rng.random(todo.size)
        v = 1.0 + cc * z
        ok = v > 0
        v = np.where(ok, v, 1.0) ** 3
        with np.errstate(divide="ignore"):
            accept = ok & (np.log(u) < 0.5 * z * z + dd - dd * v + dd * np.log(v))
        out_flat[todo[accept]] = (dd * v)[accept]
        todo = todo[~accept]
    return out


def _check_df(m):
    arr = np.asarray(m)
    if not np.issubdtype(arr.dtype, np.integer) or np.any(arr < 1):
        raise DomainError(f"degrees of freedom must be integers >= 1, got {m!r}")
    return arr


def chi_sq(m, rng: np.random.Generator, size=None):
    """Chi-squared draws with ``m`` degrees of freedom (m may be an integer array).

    Gamma(m/2, 2) by Marsaglia-Tsang rejection; for m = 1 the shape 1/2 is
    boosted to 3/2 and multiplied by U^2.
    """
    df = _check_df(m)
    if size is not None:
        df = np.broadcast_to(df, np.broadcast_shapes(np.shape(df), np.atleast_1d(size).tolist()))
    half = df / 2.0
    small = half < 1.0
    g = _gamma_marsaglia_tsang(np.where(small, half + 1.0, half), rng)
    if np.any(small):
        u = rng.random(int(np.count_nonzero(small)))
        g[small] *= u ** (1.0 / half[small])
    out = 2.0 * g
    return float(out) if out.ndim == 0 else out


def chi_sq_sum_of_squares(m: int, rng: np.random.Generator, size=None):
    """Chi-squared by definition: a sum of m squared standard normals."""
    df = int(_check_df(m))
    shape = (df,) if size is None else (*np.atleast_1d(size), df)
    out = np.sum(rng.standard_normal(shape) ** 2, axis=-1)
    return float(out) if size is None else out


def _check_nkN(n, k, N):
    for name, v in (("n", n), ("k", k), ("N", N)):
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
            raise DomainError(f"{name} must be an integer, got {v!r}")
    if not 1 <= k <= n or N < 1:
        raise DomainError(f"need 1 <= k <= n and N >= 1, got n={n}, k={k}, N={N}")


def _log_chi_terms(n, k, N, rng, size):
    # (..., N, k) array of (1/2) log(chi^2_{n-j+1} / n).
    df = n - np.arange(k)
    shape = (N, k) if size is None else (size, N, k)
    draws = chi_sq(np.broadcast_to(df, shape), rng)
    return 0.5 * np.log(draws / n)


def pointwise_log_norm(n, k, N, rng, size=None):
    """Draw(s) of log ||X_{N,n}(Theta)||, equal in law to the product-simulation value."""
    _check_nkN(n, k, N)
    total = np.sum(_log_chi_terms(n, k, N, rng, size), axis=(-2, -1))
    return float(total) if size is None else total


@dataclass(frozen=True)
class PointwiseVector:
    """Pointwise partial sums s_hat_j = (1/N) log ||X(Theta_{<=j})||, j = 1..k."""

    n: int
    k: int
    N: int
    s_hat: np.ndarray


def sample_s_hat(n, k, N, rng, size=None):
    """Array of s_hat vectors, shape ``(k,)`` or ``(size, k)``.

    Coordinate j reuses the first j chi-squared streams of every step, so the
    joint law of the partial sums is preserved.
    """
    _check_nkN(n, k, N)
    per_coordinate = np.sum(_log_chi_terms(n, k, N, rng, size), axis=-2) / N
    return np.cumsum(per_coordinate, axis=-1)


def pointwise_vector(n, k, N, rng) -> PointwiseVector:
    return PointwiseVector(n, k, N, sample_s_hat(n, k, N, rng))


def lambda_hat(pv) -> np.ndarray:
    """First differences of s_hat, the exact action of the inverse summation matrix."""
    s = pv.s_hat if isinstance(pv, PointwiseVector) else np.asarray(pv, dtype=float)
    return np.diff(s, axis=-1, prepend=0.0)


def summation_matrix(k: int) -> np.ndarray:
    """Lower-triangular matrix of ones (integer dtype)."""
    if k < 1:
        raise DomainError(f"k must be positive, got {k}")
    return np.tril(np.ones((k, k), dtype=np.int64))


def summation_matrix_inverse(k: int) -> np.ndarray:
    """Unit diagonal with -1 on the first subdiagonal (integer dtype)."""
    if k < 1:
        raise DomainError(f"k must be positive, got {k}")
    return np.eye(k, dtype=np.int64) - np.eye(k, k=-1, dtype=np.int64)


@dataclass(frozen=True)
class CovCheck:
    hs_half: float
    bound: float
    matrix: np.ndarray

    @property
    def ratio(self) -> float:
        return self.hs_half / self.bound


def theoretical_cov_check(n, k, N) -> CovCheck:
    """Hilbert-Schmidt size of (T Sigma T^T)^{-1} with Sigma = diag(sigma^2_{n,<=k}) / N.

    The inverse is the tridiagonal (T^T)^{-1} Sigma^{-1} T^{-1}, assembled
    directly. Returns ||.||_HS^{1/2} next to the reference k^{1/4} (nN)^{1/2}.
    """
    _check_nkN(n, k, N)
    prec = np.array([N / analytic.var_log_chi(n, j) for j in range(1, k + 1)])
    mat = np.diag(prec.copy())
    mat[np.arange(k - 1), np.arange(k - 1)] += prec[1:]
    mat[np.arange(k - 1), np.arange(1, k)] = -prec[1:]
    mat[np.arange(1, k), np.arange(k - 1)] = -prec[1:]
    hs = float(np.sqrt(np.sum(mat * mat)))
    return CovCheck(math.sqrt(hs), k ** 0.25 * math.sqrt(n * N), mat)
