import math

import numpy as np
import pytest

from mplab import linalg, wedge
from mplab.analytic import mean_log_chi
from mplab.errors import ConvergenceError, DegenerateInputError, DomainError, GuardError
from mplab.linalg import (
    Method,
    ProductState,
    dense_product_log_svd_oracle,
    ginibre,
    jacobi_svd,
    lyapunov_from_state,
    product_push,
    push_all,
    qr_positive,
    simulate_product,
)


def test_ginibre_moments():
    rng = np.random.default_rng(1)
    x = ginibre(1, rng, size=100_000)[:, 0, 0]
    assert abs(x.mean()) <= 4 / math.sqrt(100_000)
    f = np.sum(ginibre(4, rng, size=10_000) ** 2, axis=(1, 2))
    # ||A||_F^2 = chi^2_16 / 4: mean 4, variance 2.
    assert abs(f.mean() - 4) <= 3 * math.sqrt(2 / 10_000)


def test_ginibre_deterministic():
    a = ginibre(5, np.random.default_rng(7))
    b = ginibre(5, np.random.default_rng(7))
    assert a.tobytes() == b.tobytes()
    with pytest.raises(DomainError):
        ginibre(0, np.random.default_rng(0))


def test_qr_positive_examples():
    q, r = qr_positive(np.eye(3))
    np.testing.assert_allclose(q, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(r, np.eye(3), atol=1e-15)
    q, r = qr_positive(np.diag([-2.0, 3.0]))
    np.testing.assert_allclose(q, np.diag([-1.0, 1.0]), atol=1e-15)
    np.testing.assert_allclose(r, np.diag([2.0, 3.0]), atol=1e-15)


def test_qr_positive_random_and_stacked():
    rng = np.random.default_rng(2)
    m = rng.normal(size=(5, 5))
    q, r = qr_positive(m)
    assert np.max(np.abs(q @ r - m)) <= 1e-10 * np.linalg.norm(m)
    assert linalg.orthogonality_drift(q) <= 1e-10
    assert np.allclose(np.tril(r, -1), 0) and np.all(np.diagonal(r) >= 0)
    stack = rng.normal(size=(4, 3, 3))
    qs, rs = qr_positive(stack)
    np.testing.assert_allclose(qs @ rs, stack, atol=1e-12)
    assert np.all(np.diagonal(rs, axis1=1, axis2=2) >= 0)


def test_qr_positive_rejects_bad_input():
    with pytest.raises(DomainError):
        qr_positive(np.array([[1.0, np.nan], [0.0, 1.0]]))
    with pytest.raises(DomainError):
        qr_positive(np.ones((2, 3)))


def test_jacobi_examples():
    np.testing.assert_allclose(jacobi_svd(np.diag([3.0, 1.0, 2.0])), [3, 2, 1])
    np.testing.assert_allclose(jacobi_svd(np.array([[0.0, 1.0], [0.0, 0.0]])), [1, 0])
    q, _ = qr_positive(np.random.default_rng(3).normal(size=(6, 6)))
    np.testing.assert_allclose(jacobi_svd(q), np.ones(6), atol=1e-10)


def test_jacobi_matches_lapack_and_gram_eigenvalues():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        m = rng.normal(size=(8, 8))
        ours = jacobi_svd(m)
        ref = np.linalg.svd(m, compute_uv=False)
        worst = max(worst, float(np.max(np.abs(ours - ref) / ref)))
    assert worst <= 1e-9
    m = rng.normal(size=(4, 4))
    gram = np.sqrt(np.sort(np.linalg.eigvalsh(m.T @ m))[::-1])
    np.testing.assert_allclose(jacobi_svd(m), gram, rtol=1e-9)


def test_jacobi_convergence_error_has_diagnostics():
    m = np.random.default_rng(5).normal(size=(6, 6))
    with pytest.raises(ConvergenceError) as info:
        jacobi_svd(m, max_sweeps=1)
    assert info.value.sweeps == 1 and info.value.off_norm > 0


def test_push_scalar_matrix():
    state = product_push(ProductState.fresh(3), 2 * np.eye(3))
    np.testing.assert_allclose(state.log_scales, [math.log(2)] * 3, atol=1e-15)
    np.testing.assert_allclose(state.q_factor, np.eye(3), atol=1e-15)
    assert state.steps_done == 1


def test_single_push_matches_column_wedges():
    rng = np.random.default_rng(6)
    a = ginibre(6, rng)
    prefix = product_push(ProductState.fresh(6), a).log_wedge_prefix()
    for k in range(1, 7):
        assert prefix[k - 1] == pytest.approx(wedge.log_gram_wedge_norm(a[:, :k].T), abs=1e-8)


def test_determinant_multiplicativity():
    rng = np.random.default_rng(7)
    factors = [ginibre(4, rng) for _ in range(3)]
    state = push_all(ProductState.fresh(4), factors)
    det = sum(np.linalg.slogdet(a)[1] for a in factors)
    assert np.sum(state.log_scales) == pytest.approx(det, abs=1e-8)


def test_push_rejects_wrong_shape_and_singular():
    with pytest.raises(DomainError):
        product_push(ProductState.fresh(3), np.eye(2))
    singular = np.diag([1.0, 0.0])
    with pytest.raises(DegenerateInputError):
        product_push(ProductState.fresh(2), singular)


def test_fast_kernel_matches_explicit_path():
    fast = simulate_product(7, 150, np.random.default_rng(8))
    slow = simulate_product(7, 150, np.random.default_rng(8), qr=qr_positive)
    np.testing.assert_allclose(fast.log_scales, slow.log_scales, atol=1e-10)
    np.testing.assert_allclose(fast.q_factor, slow.q_factor, atol=1e-9)
    assert fast.steps_done == slow.steps_done == 150


def test_orthogonality_over_long_run():
    rng = np.random.default_rng(9)
    state = ProductState.fresh(32)
    worst = 0.0
    for step in range(10_000):
        state = product_push(state, ginibre(32, rng))
        if step % 500 == 0:
            worst = max(worst, linalg.orthogonality_drift(state.q_factor))
    worst = max(worst, linalg.orthogonality_drift(state.q_factor))
    assert worst <= 1e-10


def test_no_overflow_for_a_million_factors():
    state = simulate_product(8, 1_000_000, np.random.default_rng(10))
    assert np.all(np.isfinite(state.log_scales))
    assert np.all(np.isfinite(state.q_factor))
    lam = lyapunov_from_state(state).log_singular_values_over_N
    # Law of large numbers: within 0.01 of mu_{8,i} at N = 1e6.
    np.testing.assert_allclose(lam, [mean_log_chi(8, i) for i in range(1, 9)], atol=0.01)


def test_lyapunov_from_state():
    with pytest.raises(DomainError):
        lyapunov_from_state(ProductState.fresh(3))
    rng = np.random.default_rng(11)
    factors = [ginibre(5, rng) for _ in range(4)]
    est = lyapunov_from_state(push_all(ProductState.fresh(5), factors))
    assert est.method is Method.QR_ACCUMULATED
    det = sum(np.linalg.slogdet(a)[1] for a in factors)
    assert est.log_abs_det == pytest.approx(det, rel=1e-8)


def test_spectral_gap_at_long_products():
    rng = np.random.default_rng(12)
    gaps = []
    for _ in range(200):
        lam = lyapunov_from_state(simulate_product(5, 2000, rng)).log_singular_values_over_N
        gaps.append(lam[0] - lam[1] > 0)
    assert np.mean(gaps) >= 0.99


def test_dense_oracle_examples():
    rng = np.random.default_rng(13)
    a = ginibre(6, rng)
    oracle = dense_product_log_svd_oracle([a])
    qr_sum = float(np.sum(product_push(ProductState.fresh(6), a).log_scales))
    assert oracle.method is Method.DENSE_ORACLE
    assert np.sum(oracle.log_singular_values_over_N) == pytest.approx(qr_sum, rel=1e-8)
    assert np.all(np.diff(oracle.log_singular_values_over_N) <= 0)
    ident = dense_product_log_svd_oracle([np.eye(4)] * 3)
    np.testing.assert_allclose(ident.log_singular_values_over_N, 0, atol=1e-15)


def test_dense_oracle_dominates_every_coordinate_prefix():
    rng = np.random.default_rng(14)
    for _ in range(50):
        factors = [ginibre(4, rng) for _ in range(4)]
        oracle = dense_product_log_svd_oracle(factors)
        sv = np.cumsum(oracle.log_singular_values_over_N) * 4
        qr_prefix = push_all(ProductState.fresh(4), factors).log_wedge_prefix()
        assert np.all(qr_prefix[:-1] <= sv[:-1] + 1e-9)
        assert qr_prefix[-1] == pytest.approx(sv[-1], abs=1e-8)


def test_dense_oracle_guards():
    rng = np.random.default_rng(15)
    with pytest.raises(GuardError):
        dense_product_log_svd_oracle([ginibre(16, rng) for _ in range(600)])
    with pytest.raises(GuardError, match="log-condition"):
        dense_product_log_svd_oracle([ginibre(16, rng) for _ in range(60)])


def test_exact_dense_product():
    rng = np.random.default_rng(16)
    factors = [ginibre(3, rng) for _ in range(3)]
    ints, e = linalg.exact_dense_product(factors)
    x = factors[2] @ factors[1] @ factors[0]
    approx = np.array([[math.ldexp(v, -e) for v in row] for row in ints])
    np.testing.assert_allclose(approx, x, rtol=1e-12, atol=1e-15)
    ints, e = linalg.exact_dyadic([[0.5, 3.0], [-0.25, 0.0]])
    assert (ints, e) == ([[2, 12], [-1, 0]], 2)
