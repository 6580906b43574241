"""Dense kernels and the log-domain accumulator for long Ginibre products.

A product X_N = A_N ... A_1 is carried as X_N = Q * R_N ... R_1 with Q
orthogonal and each R_t upper triangular with positive diagonal. Only the
logarithms of the diagonals are kept: the diagonal of a product of upper
triangular matrices is the product of their diagonals, so

    sum_{i <= k} log_scales[i] = log || X_N e_1 ^ ... ^ X_N e_k ||

exactly, with nothing that can overflow however large N grows.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from mplab.errors import ConvergenceError, DegenerateInputError, DomainError, GuardError

REORTHO_EVERY = 64
REORTHO_DRIFT = 1e-12
ORACLE_MAX_LOG_CONDITION = 25.0
ORACLE_BUDGET = 8192


def ginibre(n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """n x n matrix (or a stack of ``size`` of them) with iid N(0, 1/n) entries."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    shape = (n, n) if size is None else (size, n, n)
    return rng.standard_normal(shape) / math.sqrt(n)


def _as_square(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise DomainError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError(f"{name} has non-finite entries")
    return m


def _lapack_qr(m: np.ndarray):
    n = m.shape[0]
    lwork = max(1, 64 * n)
    qr, tau, _, info = lapack.dgeqrf(m, lwork=lwork)
    if info != 0:
        raise DegenerateInputError(f"dgeqrf failed with info={info}")
    r = np.triu(qr)
    q, _, info = lapack.dorgqr(qr, tau, lwork=lwork)
    if info != 0:
        raise DegenerateInputError(f"dorgqr failed with info={info}")
    return q, r


def qr_positive(m) -> tuple[np.ndarray, np.ndarray]:
    """Householder QR with the sign convention diag(r) >= 0.

    Accepts a single square matrix or a stack ``(..., n, n)``.
    """
    m = _as_square(m)
    if m.ndim == 2:
        q, r = _lapack_qr(m)
    else:
        q, r = np.linalg.qr(m)
    signs = np.where(np.diagonal(r, axis1=-2, axis2=-1) < 0, -1.0, 1.0)
    q = q * signs[..., None, :]
    r = r * signs[..., :, None]
    return q, r


def raw_qr(m) -> tuple[np.ndarray, np.ndarray]:
    """Plain LAPACK QR without the sign fix (diagonal of r may be negative)."""
    m = _as_square(m)
    if m.ndim == 2:
        return _lapack_qr(m)
    return np.linalg.qr(m)


def orthogonality_drift(q: np.ndarray) -> float:
    """max |q^T q - I| entrywise."""
    g = q.T @ q
    g[np.diag_indices_from(g)] -= 1.0
    return float(np.max(np.abs(g)))


@dataclass(frozen=True)
class ProductState:
    n: int
    steps_done: int
    q_factor: np.ndarray
    log_scales: np.ndarray

    @classmethod
    def fresh(cls, n: int) -> "ProductState":
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise DomainError(f"n must be a positive integer, got {n!r}")
        return cls(int(n), 0, np.eye(n), np.zeros(n))

    def log_wedge_prefix(self) -> np.ndarray:
        """log ||X e_1 ^ ... ^ X e_k|| for k = 1..n."""
        return np.cumsum(self.log_scales)


def _push(q, log_scales, a, steps_done, qr):
    b = a @ q
    q_new, r = qr(b)
    d = np.diagonal(r)
    if np.any(d == 0):
        raise DegenerateInputError(
            f"zero diagonal in R at step {steps_done + 1}; the factor is singular"
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        log_scales = log_scales + np.log(d)
    steps_done += 1
    if steps_done % REORTHO_EVERY == 0 and orthogonality_drift(q_new) > REORTHO_DRIFT:
        # Q = Q' R' with R' ~ I; fold log diag(R') in so the identity stays exact.
        q_new, r_fix = qr_positive(q_new)
        log_scales = log_scales + np.log(np.diagonal(r_fix))
    return q_new, log_scales, steps_done


def product_push(state: ProductState, a, qr=qr_positive) -> ProductState:
    """Absorb one more factor: X <- a X.

    ``qr`` is the factorization used for a * Q; it exists so the identity
    suite can inject a faulty kernel.
    """
    a = _as_square(a, "factor")
    if a.shape != (state.n, state.n):
        raise DomainError(f"factor has shape {a.shape}, state has n={state.n}")
    q, log_scales, steps = _push(state.q_factor, state.log_scales, a, state.steps_done, qr)
    return ProductState(state.n, steps, q, log_scales)


def push_all(state: ProductState, factors, qr=qr_positive) -> ProductState:
    """Absorb ``factors`` in order (factors[0] is applied first)."""
    q, log_scales, steps = state.q_factor, state.log_scales, state.steps_done
    for a in factors:
        a = _as_square(a, "factor")
        if a.shape != (state.n, state.n):
            raise DomainError(f"factor has shape {a.shape}, state has n={state.n}")
        q, log_scales, steps = _push(q, log_scales, a, steps, qr)
    return ProductState(state.n, steps, q, log_scales)


def _simulate_householder(n, N, rng):
    # Q is kept as LAPACK reflectors times a diagonal sign vector, so
    # a @ Q costs one dormqr instead of dorgqr plus a matrix product.
    lwork = max(1, 64 * n)
    log_scales = np.zeros(n)
    qr = tau = None
    signs = np.ones(n)
    for step in range(N):
        a = np.asfortranarray(ginibre(n, rng))
        if qr is None:
            b = a
        else:
            b, _, info = lapack.dormqr("R", "N", qr, tau, a, lwork=lwork, overwrite_c=1)
            if info != 0:
                raise DegenerateInputError(f"dormqr failed with info={info}")
            b *= signs
        qr, tau, _, info = lapack.dgeqrf(b, lwork=lwork, overwrite_a=1)
        if info != 0:
            raise DegenerateInputError(f"dgeqrf failed with info={info}")
        d = np.diagonal(qr)
        if np.any(d == 0):
            raise DegenerateInputError(f"zero diagonal in R at step {step + 1}")
        signs = np.where(d < 0, -1.0, 1.0)
        log_scales += np.log(np.abs(d))
    if qr is None:
        return np.eye(n), log_scales
    q, _, info = lapack.dorgqr(qr, tau, lwork=lwork)
    return q * signs, log_scales


def simulate_product(n: int, N: int, rng: np.random.Generator, qr=None) -> ProductState:
    """Accumulate N fresh Ginibre factors, drawn one at a time from ``rng``.

    Gives the same state as pushing the same factors through
    :func:`product_push`, up to rounding. Passing ``qr`` forces the explicit
    push path with that factorization.
    """
    if not isinstance(N, (int, np.integer)) or N < 0:
        raise DomainError(f"N must be a nonnegative integer, got {N!r}")
    state = ProductState.fresh(n)
    if qr is None:
        q, log_scales = _simulate_householder(state.n, N, rng)
        return ProductState(state.n, int(N), q, log_scales)
    q, log_scales, steps = state.q_factor, state.log_scales, 0
    for _ in range(N):
        q, log_scales, steps = _push(q, log_scales, ginibre(n, rng), steps, qr)
    return ProductState(state.n, steps, q, log_scales)


def exact_dyadic(m) -> tuple[list[list[int]], int]:
    """Exact form of a float64 matrix as (integer matrix, e) with m = ints * 2**-e."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or not np.all(np.isfinite(m)):
        raise DomainError("exact_dyadic needs a finite 2-D array")
    ratios = [[float(v).as_integer_ratio() for v in row] for row in m]
    e = max(q.bit_length() - 1 for row in ratios for _, q in row)
    return [[p << (e - (q.bit_length() - 1)) for p, q in row] for row in ratios], e


def exact_dense_product(factors) -> tuple[list[list[int]], int]:
    """A_N ... A_1 in exact integer arithmetic, as (ints, e) with X = ints * 2**-e.

    No rounding at all, so small singular directions survive however
    ill-conditioned the product is.
    """
    factors = list(factors)
    if not factors:
        raise DomainError("need at least one factor")
    x, ex = exact_dyadic(factors[0])
    for a in factors[1:]:
        b, eb = exact_dyadic(a)
        if len(b[0]) != len(x):
            raise DomainError("factor shapes do not chain")
        cols = list(zip(*x))
        x = [[sum(p * q for p, q in zip(row, col)) for col in cols] for row in b]
        ex += eb
    return x, ex


class Method(str, enum.Enum):
    QR_ACCUMULATED = "qr_accumulated"
    DENSE_ORACLE = "dense_oracle"


@dataclass(frozen=True)
class SpectrumEstimate:
    n: int
    N: int
    log_singular_values_over_N: np.ndarray
    method: Method

    @property
    def log_abs_det(self) -> float:
        return float(self.N * np.sum(self.log_singular_values_over_N))


def lyapunov_from_state(state: ProductState) -> SpectrumEstimate:
    """Coordinate-frame Lyapunov estimates log_scales / N (not sorted)."""
    if state.steps_done < 1:
        raise DomainError("no factors absorbed yet")
    return SpectrumEstimate(
        state.n, state.steps_done, state.log_scales / state.steps_done, Method.QR_ACCUMULATED
    )


def jacobi_svd(m, max_sweeps: int = 60, tol: float | None = None) -> np.ndarray:
    """Singular values, descending, by one-sided (Hestenes) Jacobi rotations.

    Columns are rotated pairwise until every pair is orthogonal to relative
    tolerance ``tol``; the singular values are then the column norms.
    """
    a = _as_square(m).copy()
    if a.ndim != 2:
        raise DomainError("jacobi_svd expects a single matrix")
    n = a.shape[1]
    if tol is None:
        tol = n * np.finfo(float).eps
    off = 0.0
    for sweep in range(1, max_sweeps + 1):
        off = 0.0
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                ai = a[:, i]
                aj = a[:, j]
                alpha = ai @ ai
                beta = aj @ aj
                gamma = ai @ aj
                if alpha == 0.0 or beta == 0.0:
                    continue
                rel = abs(gamma) / math.sqrt(alpha * beta)
                off = max(off, rel)
                if rel <= tol:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                new_i = c * ai - s * aj
                a[:, j] = s * ai + c * aj
                a[:, i] = new_i
        if not rotated:
            return np.sort(np.linalg.norm(a, axis=0))[::-1]
    raise ConvergenceError(
        f"one-sided Jacobi did not converge in {max_sweeps} sweeps "
        f"(max relative off-diagonal {off:.3e})",
        sweeps=max_sweeps,
        off_norm=off,
    )


def dense_product_log_svd_oracle(
    factors,
    budget: int = ORACLE_BUDGET,
    max_log_condition: float = ORACLE_MAX_LOG_CONDITION,
) -> SpectrumEstimate:
    """Brute force: multiply the factors densely and take exact singular values.

    Refuses when N * n exceeds ``budget`` or when the coordinate-frame
    estimate of the log-condition number exceeds ``max_log_condition`` nats,
    past which the small singular values of the dense product are rounding
    noise.
    """
    factors = [_as_square(a, "factor") for a in factors]
    if not factors:
        raise DomainError("need at least one factor")
    n = factors[0].shape[0]
    if any(a.shape != (n, n) for a in factors):
        raise DomainError("all factors must share one square shape")
    N = len(factors)
    if N * n > budget:
        raise GuardError(f"N*n = {N * n} exceeds the dense oracle budget {budget}")
    state = push_all(ProductState.fresh(n), factors)
    spread = float(np.max(state.log_scales) - np.min(state.log_scales))
    if spread > max_log_condition:
        raise GuardError(
            f"estimated log-condition {spread:.2f} nats exceeds {max_log_condition}; "
            "small singular values of the dense product would be unreliable"
        )
    x = np.eye(n)
    for a in factors:
        x = a @ x
    s = jacobi_svd(x)
    if np.any(s <= 0):
        raise GuardError("dense product has a zero singular value")
    return SpectrumEstimate(n, N, np.log(s) / N, Method.DENSE_ORACLE)
