"""Closed-form predictors for products of Ginibre matrices.

Means and variances of the Lyapunov exponents are expressed through the
digamma and trigamma functions of half-integer arguments; the remaining
helpers evaluate the shape of the deviation bounds with user-supplied
constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from mplab.errors import DomainError

# Bernoulli numbers B_2, B_4, ..., B_18.
_BERNOULLI = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
)

# Below this the recurrence shifts the argument upward.
_ASYMPTOTIC_START = 6.0


def _check_positive(x, name="x"):
    if not isinstance(x, (int, float)) or isinstance(x, bool):
        try:
            x = float(x)
        except (TypeError, ValueError):
            raise DomainError(f"{name} must be a real number, got {x!r}") from None
    if not math.isfinite(x) or x <= 0:
        raise DomainError(f"{name} must be positive and finite, got {x!r}")
    return float(x)


def digamma(x: float) -> float:
    """Digamma function psi(x) = d/dx log Gamma(x) for x > 0.

    Upward recurrence psi(x) = psi(x + 1) - 1/x moves the argument past 6,
    where the asymptotic Bernoulli series is summed.
    """
    x = _check_positive(x)
    shift = []
    while x < _ASYMPTOTIC_START:
        shift.append(1.0 / x)
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for k, b in enumerate(_BERNOULLI, start=1):
        series += b / (2 * k) * power
        power *= inv2
    value = math.log(x) - 0.5 / x - series
    if shift:
        value -= math.fsum(shift)
    return value


def trigamma(x: float) -> float:
    """Trigamma function psi'(x) for x > 0."""
    x = _check_positive(x)
    shift = []
    while x < _ASYMPTOTIC_START:
        shift.append(1.0 / (x * x))
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    power = inv2 * inv
    for b in _BERNOULLI:
        series += b * power
        power *= inv2
    value = inv + 0.5 * inv2 + series
    if shift:
        value += math.fsum(shift)
    return value


def _check_index(n, k):
    if not isinstance(n, int) or not isinstance(k, int) or isinstance(n, bool):
        raise DomainError(f"n and k must be integers, got n={n!r}, k={k!r}")
    if n < 1 or k < 1 or k > n:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")


def mean_log_chi(n: int, k: int) -> float:
    """Mean of (1/2) log(chi^2_{n-k+1} / n), the limiting k-th Lyapunov exponent."""
    _check_index(n, k)
    return 0.5 * (math.log(2.0 / n) + digamma((n - k + 1) / 2.0))


def mean_asymptotic(n: int, k: int) -> float:
    """Two-term expansion of :func:`mean_log_chi` for large n - k + 1.

    Error is O(1/(n-k+1)^2); crude for small n.
    """
    _check_index(n, k)
    m = n - k + 1
    if m < 2:
        raise DomainError(f"expansion needs n - k + 1 >= 2, got n={n}, k={k}")
    return 0.5 * math.log1p(-(k - 1) / n) - 1.0 / (2.0 * m)


def var_log_chi(n: int, k: int) -> float:
    """Variance of (1/2) log(chi^2_{n-k+1} / n), i.e. psi'((n-k+1)/2) / 4."""
    _check_index(n, k)
    return 0.25 * trigamma((n - k + 1) / 2.0)


@dataclass(frozen=True)
class SpectralProfile:
    n: int
    k: int
    means: tuple[float, ...] = field(repr=False)
    variances: tuple[float, ...] = field(repr=False)

    @classmethod
    def build(cls, n: int, k: int | None = None) -> "SpectralProfile":
        k = n if k is None else k
        _check_index(n, k)
        means = tuple(mean_log_chi(n, j) for j in range(1, k + 1))
        variances = tuple(var_log_chi(n, j) for j in range(1, k + 1))
        return cls(n, k, means, variances)


def rate_function_g(n: int, k: int, s: float) -> float:
    """Rate function g_{n,k}(s) from the deviation estimate for Lyapunov sums.

    The first branch covers k <= n/2 (so k <= floor(n/2) for odd n).
    """
    _check_index(n, k)
    s = _check_positive(s, "s")
    if 2 * k <= n:
        return min(1.0, n * s / k)
    delta = (n - k + 1) / n
    if delta == 1.0:
        # n = k = 1: log(1/delta) = 0, so the second term is +inf.
        return 1.0
    return min(delta, s / math.log(1.0 / delta))


def xi_and_m(n: int, k: int) -> tuple[float, list[int]]:
    """Return xi_{n,k} = (1/n) sum_{j<=k} 1/M_j and M_j = n - j + 1 for j = 1..k."""
    _check_index(n, k)
    m_values = [n - j + 1 for j in range(1, k + 1)]
    xi = math.fsum(1.0 / m for m in m_values) / n
    return xi, m_values


def uniform_cdf(t: float) -> float:
    """CDF of the uniform law on [0, 1]; the triangle law CDF is uniform_cdf(t**2)."""
    if not math.isfinite(t):
        raise DomainError(f"t must be finite, got {t!r}")
    return min(1.0, max(0.0, float(t)))


def triangle_cdf(t: float) -> float:
    if not math.isfinite(t):
        raise DomainError(f"t must be finite, got {t!r}")
    return uniform_cdf(t * t) if t > 0 else 0.0


@dataclass(frozen=True)
class TailBoundParams:
    """Universal constants of the sums deviation bound (never fixed numerically)."""

    c1: float = 1.0
    c2: float = 2.0
    c3: float = 1.0

    def __post_init__(self):
        for name in ("c1", "c2", "c3"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive, got {value!r}")


def sums_tail_bound(n, N, m, k, s, params=TailBoundParams()):
    """Right-hand side of the deviation estimate for (1/n) sum_{i=m..k} (lambda_i - mu_{n,i}).

    Returns ``(bound, s_admissible)``. The bound may exceed 1; it is then
    vacuous rather than a probability.
    """
    _check_index(n, k)
    if not isinstance(m, int) or not 1 <= m <= k:
        raise DomainError(f"need 1 <= m <= k, got m={m!r}, k={k}")
    if not isinstance(N, int) or N < 1:
        raise DomainError(f"N must be a positive integer, got {N!r}")
    s = _check_positive(s, "s")
    g = rate_function_g(n, k, s)
    exponent = params.c3 * n * N * s * min(1.0, n * g)
    bound = params.c2 * math.exp(-exponent)
    threshold = params.c1 * k / (n * N) * math.log(math.e * n / k)
    return bound, s >= threshold


def sums_admissible_threshold(n, N, k, params=TailBoundParams()):
    _check_index(n, k)
    return params.c1 * k / (n * N) * math.log(math.e * n / k)


def pointwise_exponent(n, N, k, s):
    """n N min{M_k s, s^2 / xi_{n,k}}, the Bernstein-type exponent of the pointwise tail."""
    _check_index(n, k)
    s = _check_positive(s, "s")
    xi, m_values = xi_and_m(n, k)
    return n * N * min(m_values[-1] * s, s * s / xi)


def pointwise_tail_bound(n, N, k, s, c=1.0):
    """2 exp(-c n N min{M_k s, s^2 / xi_{n,k}}) for the pointwise log-norm deviation."""
    if not isinstance(N, int) or N < 1:
        raise DomainError(f"N must be a positive integer, got {N!r}")
    c = _check_positive(c, "c")
    return 2.0 * math.exp(-c * pointwise_exponent(n, N, k, s))


@dataclass(frozen=True)
class DigammaGap:
    lhs_plus: float
    lower: float
    lhs_minus: float | None
    upper: float | None
    upper_defined: bool
    # -m(m-6)/(6nq): the integral comparison with the 1/2 prefactor kept.
    upper_corrected: float | None = None

    @property
    def lower_ok(self) -> bool:
        return self.lhs_plus >= self.lower

    @property
    def upper_ok(self) -> bool:
        return not self.upper_defined or self.lhs_minus <= self.upper

    @property
    def upper_corrected_ok(self) -> bool:
        return not self.upper_defined or self.lhs_minus <= self.upper_corrected

    @property
    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok


def digamma_gap_bounds(n, q, m, means=None):
    """Evaluate both sides of the two digamma-sum inequalities for 4 <= m <= q <= n.

    The stated upper bound -m(m-3)/(3nq) is too strong for larger m (for
    example n=14, q=7, m=7); ``upper_corrected`` carries the bound that the
    same argument actually yields.

    ``means`` may carry a precomputed sequence mu_{n,1..n} (0-based) to make
    exhaustive sweeps cheap.
    """
    for name, value in (("n", n), ("q", q), ("m", m)):
        if not isinstance(value, int):
            raise DomainError(f"{name} must be an integer, got {value!r}")
    if not 4 <= m <= q <= n:
        raise DomainError(f"need 4 <= m <= q <= n, got n={n}, q={q}, m={m}")
    if means is None:
        means = [mean_log_chi(n, j) for j in range(1, n + 1)]
    head = m / (2.0 * n) * math.log(q / n)
    # indices j = n-q+1 .. n-q+m, shifted to 0-based
    lhs_plus = head - math.fsum(means[n - q:n - q + m]) / n
    lower = (m - 1) ** 2 / (4.0 * n * q)
    if n - q - m >= 0:
        lhs_minus = head - math.fsum(means[n - q - m:n - q]) / n
        upper = -m * (m - 3) / (3.0 * n * q)
        upper_corrected = -m * (m - 6) / (6.0 * n * q)
        return DigammaGap(lhs_plus, lower, lhs_minus, upper, True, upper_corrected)
    return DigammaGap(lhs_plus, lower, None, None, False)
