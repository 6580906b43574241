"""Wedge-product norms, Haar frames and small-ball determinant ratios.

Vectors are passed as the rows of a ``(k, n)`` array. All determinants are
handled as log-determinants of triangular factors; ratios are differences
of logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mplab.errors import DegenerateInputError, DomainError

DEPENDENCE_TOL = 1e-12
ORTHONORMAL_TOL = 1e-12
_MAX_RETRIES = 3


def _as_vectors(vectors, name="vectors"):
    x = np.asarray(vectors, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise DomainError(f"{name} must be a (k, n) array, got shape {x.shape}")
    k, n = x.shape
    if k < 1 or k > n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} has non-finite entries")
    return x


def log_gram_wedge_norm(vectors, dependence_tol: float = DEPENDENCE_TOL) -> float:
    """log ||x_1 ^ ... ^ x_k|| via Householder QR of the n x k column matrix.

    Returns ``-inf`` for linearly dependent vectors (relative volume below
    ``dependence_tol`` of the Hadamard bound). Columns of a long matrix
    product are legitimately this close to dependent; pass 0 there.
    """
    x = _as_vectors(vectors)
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        return -math.inf
    r = np.linalg.qr(x.T, mode="r")
    d = np.abs(np.diagonal(r))
    if np.any(d == 0):
        return -math.inf
    log_vol = float(np.sum(np.log(d)))
    log_hadamard = float(np.sum(np.log(norms)))
    if dependence_tol > 0 and log_vol - log_hadamard < math.log(dependence_tol):
        return -math.inf
    return log_vol


def gram_wedge_norm(vectors) -> float:
    """||x_1 ^ ... ^ x_k|| = sqrt(det(X X^T)), the k-volume of the spanned parallelepiped."""
    return math.exp(log_gram_wedge_norm(vectors))


def exact_log_wedge_prefix(columns, e: int = 0) -> np.ndarray:
    """log ||c_1 ^ ... ^ c_k||, k = 1..K, for the columns of ``columns * 2**-e``.

    ``columns`` is an integer matrix (list of rows). The Gram matrix is
    formed in exact integer arithmetic and its leading principal minors,
    det(C_k^T C_k), are the successive pivots of fraction-free (Bareiss)
    elimination. Entries after the first dependent prefix are ``-inf``.
    """
    cols = [list(c) for c in zip(*columns)]
    K = len(cols)
    a = [[sum(p * q for p, q in zip(ci, cj)) for cj in cols] for ci in cols]
    out = np.full(K, -math.inf)
    prev = 1
    for k in range(K):
        piv = a[k][k]
        if piv == 0:
            break
        # Split off a power of two so the huge integer exponents cancel exactly.
        shift = max(piv.bit_length() - 64, 0)
        out[k] = 0.5 * (math.log(piv >> shift) + (shift - 2 * (k + 1) * e) * math.log(2.0))
        for i in range(k + 1, K):
            for j in range(k + 1, K):
                a[i][j] = (a[i][j] * piv - a[i][k] * a[k][j]) // prev
        prev = piv
    return out


def projection_formula_norm(vectors) -> float:
    """prod_i ||P_{V_{i-1}^perp} x_i|| by explicit (twice-applied) Gram-Schmidt."""
    x = _as_vectors(vectors)
    basis = []
    total = 1.0
    for v in x:
        w = v.copy()
        for _ in range(2):
            for b in basis:
                w -= (b @ w) * b
        norm = float(np.linalg.norm(w))
        total *= norm
        if norm == 0.0:
            return 0.0
        basis.append(w / norm)
    return total


@dataclass(frozen=True)
class Frame:
    """k vectors in R^n stored as rows; ``orthonormal`` flags a checked frame."""

    vectors: np.ndarray
    orthonormal: bool = False

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def standard(cls, n: int, k: int) -> "Frame":
        if not 1 <= k <= n:
            raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
        return cls(np.eye(n)[:k], True)

    @classmethod
    def checked(cls, vectors) -> "Frame":
        x = _as_vectors(vectors)
        gram = x @ x.T
        if np.max(np.abs(gram - np.eye(x.shape[0]))) > ORTHONORMAL_TOL:
            raise DomainError("frame vectors are not orthonormal")
        return cls(x, True)


def projected_wedge_overlap(theta, v) -> float:
    """|<v_1 ^ ... ^ v_k, theta_1 ^ ... ^ theta_k>| for an orthonormal frame theta.

    Computed as |det| of the k x k coordinate matrix of v in the theta basis.
    """
    frame = theta if isinstance(theta, Frame) else Frame.checked(theta)
    if not frame.orthonormal:
        frame = Frame.checked(frame.vectors)
    x = _as_vectors(v, "v")
    if x.shape != frame.vectors.shape:
        raise DomainError(f"v has shape {x.shape}, frame has shape {frame.vectors.shape}")
    coords = x @ frame.vectors.T
    sign, logdet = np.linalg.slogdet(coords)
    return 0.0 if sign == 0 else math.exp(logdet)


def haar_frame(n: int, k: int, rng: np.random.Generator) -> Frame:
    """Haar-distributed orthonormal k-frame: Gram-Schmidt of k iid Gaussian vectors."""
    _check_nk(n, k)
    for _ in range(_MAX_RETRIES):
        g = rng.standard_normal((n, k))
        q, r = np.linalg.qr(g)
        d = np.diagonal(r)
        if np.all(np.abs(d) > 0):
            # Positive-diagonal convention makes this exactly Gram-Schmidt.
            q = q * np.where(d < 0, -1.0, 1.0)
            return Frame(q.T.copy(), True)
    raise DegenerateInputError(f"degenerate Gaussian draw {_MAX_RETRIES} times in a row")


def _log_det_gram(g):
    # log det(G G^T) for a stack of (k, n) matrices, via R of G^T.
    r = np.linalg.qr(np.swapaxes(g, -1, -2), mode="r")
    return 2.0 * np.sum(np.log(np.abs(np.diagonal(r, axis1=-2, axis2=-1))), axis=-1)


def _check_nk(n, k):
    if not (isinstance(n, (int, np.integer)) and isinstance(k, (int, np.integer))) or not 1 <= k <= n:
        raise DomainError(f"need integers 1 <= k <= n, got k={k!r}, n={n!r}")


def small_ball_log_ratio(n, k, rng, size=None):
    """log of (det(G_k G_k^T) / det(G G^T))^{1/2} for k x n standard Gaussian G.

    G_k keeps the first k columns. Vectorised over ``size`` draws.
    """
    _check_nk(n, k)
    shape = (k, n) if size is None else (size, k, n)
    for _ in range(_MAX_RETRIES):
        g = rng.standard_normal(shape)
        with np.errstate(divide="ignore"):
            log_gram = _log_det_gram(g)
        if np.all(np.isfinite(log_gram)):
            _, log_head = np.linalg.slogdet(g[..., :, :k])
            # G_k G_k^T is dominated by G G^T; clip rounding above 0.
            out = np.minimum(log_head - 0.5 * log_gram, 0.0)
            return out if size is not None else float(out)
    raise DegenerateInputError(f"singular Gram matrix {_MAX_RETRIES} times in a row")


def small_ball_ratio(n, k, rng, size=None):
    """(det(G_k G_k^T) / det(G G^T))^{1/2}, a value in [0, 1].

    Equal in law to the k-volume of the projection of a fixed orthonormal
    k-frame onto a Haar-random k-dimensional subspace.
    """
    return np.exp(small_ball_log_ratio(n, k, rng, size))


def small_ball_statistic(ratio, k):
    """Per-dimension normalisation ratio^{1/k}, i.e. the determinant ratio to the power 1/(2k).

    This is the quantity whose small-ball probability at eps*sqrt(k/n)
    decays like eps^{k/2}.
    """
    return np.asarray(ratio, dtype=float) ** (1.0 / k)


def log_det_gram_draws(n, k, rng, size):
    """``size`` iid draws of log det(G G^T) for k x n standard Gaussian G."""
    _check_nk(n, k)
    return _log_det_gram(rng.standard_normal((size, k, n)))


def _check_moment_args(n, k, p):
    _check_nk(n, k)
    if not (math.isfinite(p) and 0 < p <= k * n):
        raise DomainError(f"p must lie in (0, k*n] = (0, {k * n}], got {p!r}")


def moment_from_log_dets(log_dets, k, p) -> float:
    """(mean of det^{p/(2k)})^{1/p} from log-determinant draws, via log-sum-exp."""
    x = np.asarray(log_dets, dtype=float) * (p / (2.0 * k))
    top = np.max(x)
    log_mean = top + math.log(np.mean(np.exp(x - top)))
    return math.exp(log_mean / p)


def det_moment_estimate(n, k, p, draws, rng) -> float:
    """Monte Carlo estimate of (E[det(G G^T)^{p/(2k)}])^{1/p} for k x n Gaussian G."""
    _check_moment_args(n, k, p)
    if not isinstance(draws, (int, np.integer)) or draws < 1000:
        raise DomainError(f"need at least 1000 draws, got {draws!r}")
    log_dets = []
    chunk = 20000
    remaining = draws
    while remaining:
        m = min(chunk, remaining)
        log_dets.append(log_det_gram_draws(n, k, rng, m))
        remaining -= m
    return moment_from_log_dets(np.concatenate(log_dets), k, p)
