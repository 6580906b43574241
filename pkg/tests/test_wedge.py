import itertools
import math

import numpy as np
import pytest
from scipy import special
from scipy import stats as sps

from mplab import stats, wedge
from mplab.errors import DomainError
from mplab.linalg import exact_dyadic
from mplab.wedge import (
    Frame,
    det_moment_estimate,
    gram_wedge_norm,
    haar_frame,
    projected_wedge_overlap,
    projection_formula_norm,
    small_ball_ratio,
)

KS_001 = 1.949


def exact_det_moment(n, k, p):
    """(E det(G G^T)^{p/2k})^{1/p} from the Bartlett decomposition (chi-squared diagonal)."""
    q = p / (2 * k)
    log_m = sum(
        q * math.log(2) + special.gammaln((n - j + 1) / 2 + q) - special.gammaln((n - j + 1) / 2)
        for j in range(1, k + 1)
    )
    return math.exp(log_m / p)


def test_gram_examples():
    assert gram_wedge_norm(np.eye(3)[:2]) == pytest.approx(1.0)
    assert gram_wedge_norm([[1, 0], [1, 1]]) == pytest.approx(1.0)
    assert gram_wedge_norm([[2, 0, 0], [0, 3, 0]]) == pytest.approx(6.0)
    assert gram_wedge_norm([[1, 2, 3], [2, 4, 6]]) == 0.0
    with pytest.raises(DomainError):
        gram_wedge_norm(np.ones((3, 2)))


def test_projection_formula_agrees():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 17))
        k = int(rng.integers(1, n + 1))
        x = rng.normal(size=(k, n))
        assert projection_formula_norm(x) == pytest.approx(gram_wedge_norm(x), rel=1e-9)


def test_pythagorean_sum_over_wedge_basis():
    rng = np.random.default_rng(1)
    for n in range(1, 7):
        for k in range(1, n + 1):
            x = rng.normal(size=(k, n))
            minors = sum(np.linalg.det(x[:, list(c)]) ** 2 for c in itertools.combinations(range(n), k))
            assert gram_wedge_norm(x) ** 2 == pytest.approx(minors, rel=1e-9)


def test_hadamard_bound():
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    ortho = q.T[:3] * np.array([[2.0], [0.5], [3.0]])
    assert gram_wedge_norm(ortho) == pytest.approx(3.0, rel=1e-12)
    perturbed = ortho.copy()
    perturbed[1] += 0.1 * ortho[0]
    hadamard = np.prod(np.linalg.norm(perturbed, axis=1))
    assert gram_wedge_norm(perturbed) < hadamard * (1 - 1e-6)


def test_exact_prefix_matches_float_route():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(5, 4))
    ints, e = exact_dyadic(x)
    exact = wedge.exact_log_wedge_prefix(ints, e)
    for k in range(1, 5):
        assert exact[k - 1] == pytest.approx(wedge.log_gram_wedge_norm(x[:, :k].T), abs=1e-12)


def test_projected_overlap_examples():
    e = np.eye(3)
    assert projected_wedge_overlap(e[:2], e[:2]) == pytest.approx(1.0)
    assert projected_wedge_overlap(e[:2], [[1, 0, 0], [0, 0, 1]]) == pytest.approx(0.0, abs=1e-15)
    rng = np.random.default_rng(4)
    for _ in range(20):
        theta = haar_frame(6, 3, rng)
        v = rng.normal(size=(3, 6))
        coords = v @ theta.vectors.T
        assert projected_wedge_overlap(theta, v) == pytest.approx(gram_wedge_norm(coords), rel=1e-10)
    with pytest.raises(DomainError):
        projected_wedge_overlap([[1, 0, 0], [1, 1, 0]], e[:2])


def test_frames():
    f = Frame.standard(4, 2)
    assert f.orthonormal and (f.n, f.k) == (4, 2)
    with pytest.raises(DomainError):
        Frame.checked([[1.0, 0.0], [1.0, 1.0]])
    rng = np.random.default_rng(5)
    for _ in range(50):
        g = haar_frame(7, 4, rng).vectors
        assert np.max(np.abs(g @ g.T - np.eye(4))) <= 1e-12


def test_haar_circle_angle_uniform():
    rng = np.random.default_rng(6)
    v = np.array([haar_frame(2, 2, rng).vectors[0] for _ in range(100_000)])
    angle = np.mod(np.arctan2(v[:, 1], v[:, 0]), 2 * math.pi)
    d = stats.ks_one_sample(angle, lambda t: np.clip(t / (2 * math.pi), 0, 1))
    assert d <= KS_001 * math.sqrt(2 / 100_000)


def test_haar_rotation_invariance():
    rng = np.random.default_rng(7)
    u, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    a = np.array([haar_frame(3, 2, rng).vectors[0, 0] for _ in range(100_000)])
    b = np.array([(u @ haar_frame(3, 2, rng).vectors[0])[0] for _ in range(100_000)])
    assert stats.ks_two_sample(a, b) <= KS_001 * math.sqrt(2 / 100_000)


def test_small_ball_ratio_full_rank_is_one():
    rng = np.random.default_rng(8)
    np.testing.assert_allclose(small_ball_ratio(5, 5, rng, size=100), 1.0, atol=1e-12)


def test_small_ball_arcsine():
    rng = np.random.default_rng(9)
    r2 = small_ball_ratio(2, 1, rng, size=100_000) ** 2
    p = np.mean(r2 <= 0.5)
    assert abs(p - 0.5) <= 3 * math.sqrt(0.25 / 100_000)


@pytest.mark.parametrize("n", [3, 5, 12])
def test_small_ball_k1_beta_law(n):
    rng = np.random.default_rng(10 + n)
    r2 = small_ball_ratio(n, 1, rng, size=20_000) ** 2
    d = stats.ks_one_sample(r2, sps.beta(0.5, (n - 1) / 2).cdf)
    assert d <= KS_001 / math.sqrt(20_000)


def test_small_ball_in_unit_interval():
    rng = np.random.default_rng(11)
    r = small_ball_ratio(9, 4, rng, size=5000)
    assert np.all((r >= 0) & (r <= 1))
    assert isinstance(small_ball_ratio(4, 2, rng), float)


def test_overlap_with_haar_frame_matches_small_ball_law():
    rng = np.random.default_rng(12)
    n, k = 6, 3
    std = np.eye(n)[:k]
    a = np.array([projected_wedge_overlap(haar_frame(n, k, rng), std) for _ in range(10_000)])
    b = small_ball_ratio(n, k, rng, size=10_000)
    assert stats.ks_two_sample(a, b) <= KS_001 * math.sqrt(2 / 10_000)


def test_small_ball_statistic_is_per_dimension_root():
    np.testing.assert_allclose(wedge.small_ball_statistic([0.25, 1.0], 2), [0.5, 1.0])


def test_det_moment_chi_square_mean():
    rng = np.random.default_rng(13)
    est = det_moment_estimate(8, 1, 2.0, 100_000, rng)
    assert est == pytest.approx(math.sqrt(8), rel=0.05)


def test_det_moment_square_factorial():
    # E det(G G^T) = n! for square Gaussian G; with p = 2k the moment is (n!)^{1/p}.
    assert exact_det_moment(3, 3, 6) == pytest.approx(6 ** (1 / 6), rel=1e-12)
    rng = np.random.default_rng(14)
    est = det_moment_estimate(3, 3, 6.0, 100_000, rng)
    assert est == pytest.approx(6 ** (1 / 6), rel=0.03)


@pytest.mark.parametrize("n, k, p", [(4, 2, 2.0), (10, 5, 5.0), (16, 8, 1.0)])
def test_det_moment_matches_bartlett(n, k, p):
    rng = np.random.default_rng(n)
    est = det_moment_estimate(n, k, p, 50_000, rng)
    assert est == pytest.approx(exact_det_moment(n, k, p), rel=0.02)


def test_det_moment_domain():
    rng = np.random.default_rng(15)
    with pytest.raises(DomainError):
        det_moment_estimate(4, 2, 9.0, 1000, rng)
    with pytest.raises(DomainError):
        det_moment_estimate(4, 2, 0.0, 1000, rng)
    with pytest.raises(DomainError):
        det_moment_estimate(4, 2, 1.0, 999, rng)
