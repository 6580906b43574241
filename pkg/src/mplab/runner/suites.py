"""Verification suites. Each has a per-trial function and an aggregation step."""

from __future__ import annotations

import math
import time

import numpy as np

from mplab import analytic, linalg, samplers, stats, wedge
from mplab.errors import ConfigError, DomainError
from mplab.runner.config import ExperimentConfig
from mplab.runner.monte_carlo import run_monte_carlo, throughput
from mplab.runner.report import Report, above, at_least, at_most, below

# Size of the dense sub-problem used by the wedge and majorization families.
IDENTITY_DENSE_MAX = 8


def _uniform_cdf(t):
    return np.clip(t, 0.0, 1.0)


def _triangle_trial(cfg):
    n, N = cfg.n, cfg.N

    def run(rng):
        state = linalg.simulate_product(n, N, rng)
        lam = linalg.lyapunov_from_state(state).log_singular_values_over_N
        out = {"ks": stats.ks_one_sample(np.exp(2.0 * lam), _uniform_cdf)}
        if cfg.doubling:
            state = linalg.simulate_product(2 * n, 2 * N, rng)
            lam = linalg.lyapunov_from_state(state).log_singular_values_over_N
            out["ks_doubled"] = stats.ks_one_sample(np.exp(2.0 * lam), _uniform_cdf)
        return out

    return run


def _triangle_aggregate(cfg, records):
    ks = np.array([r.payload["ks"] for r in records])
    info = min(cfg.n, cfg.N) < cfg.threshold("informational_below")
    agg = {"median_ks": float(np.median(ks)), "max_ks": float(np.max(ks))}
    crit = [at_most("median_ks", "triangle-law", agg["median_ks"], cfg.threshold("median_ks"), info)]
    if cfg.doubling:
        ks2 = np.array([r.payload["ks_doubled"] for r in records])
        agg["median_ks_doubled"] = float(np.median(ks2))
        agg["paired_improvement_fraction"] = float(np.mean(ks2 < ks))
        crit.append(below("median_ks_doubled", "triangle-law-rate",
                          agg["median_ks_doubled"], agg["median_ks"], info))
        crit.append(at_least("paired_improvement_fraction", "triangle-law-rate",
                             agg["paired_improvement_fraction"],
                             cfg.threshold("doubling_paired_fraction"), info))
    notes = []
    if info:
        notes.append(f"min(n, N) below {cfg.threshold('informational_below')}: "
                     "outside the asymptotic regime, results are informational")
    return agg, crit, notes, info


def _sums_trial(cfg):
    n, N, k, m = cfg.n, cfg.N, cfg.resolved_k(), cfg.resolved_m()
    mu = np.array([analytic.mean_log_chi(n, j) for j in range(1, k + 1)])
    total_mu = float(np.sum(mu))
    window_mu = float(np.sum(mu[m - 1:]))

    def run(rng):
        s = samplers.sample_s_hat(n, k, N, rng)
        head = s[m - 2] if m > 1 else 0.0
        return {
            "dev_pointwise": (s[-1] - total_mu) / n,
            "dev_sums": (s[-1] - head - window_mu) / n,
        }

    return run


def _tail_fit(dev, grid, shape):
    freq = stats.tail_frequencies(dev, grid)
    x = np.array([shape(s) for s in grid])
    fit = stats.linear_fit(x, -np.log(freq))
    return freq, fit


def _tail_grid(abs_dev, lo, min_count, points):
    # Largest s with at least min_count samples at or beyond it.
    ordered = np.sort(abs_dev)[::-1]
    hi = float(ordered[min_count - 1]) if ordered.size >= min_count else 0.0
    if hi <= lo:
        return None, hi
    return np.linspace(lo, hi, points), hi


def _sums_aggregate(cfg, records):
    n, N, k = cfg.n, cfg.N, cfg.resolved_k()
    params = cfg.bound_constants
    lo = analytic.sums_admissible_threshold(n, N, k, params)
    min_count = int(cfg.threshold("min_tail_count"))
    points = int(cfg.threshold("grid_points"))
    agg = {"admissible_threshold": lo}
    notes = []
    crit = []
    dev_p = np.array([r.payload["dev_pointwise"] for r in records])
    grid, hi = _tail_grid(np.abs(dev_p), lo, min_count, points)
    agg["grid_upper"] = hi
    if grid is None:
        notes.append("no admissible thresholds with enough tail events; fits skipped")
        crit.append(at_least("pointwise_fit_r2", "pointwise-tail-shape", -math.inf, cfg.threshold("min_r2")))
        return agg, crit, notes, False

    freq, fit = _tail_fit(dev_p, grid, lambda s: analytic.pointwise_exponent(n, N, k, s))
    agg.update(grid=grid.tolist(), frequencies=freq.tolist(),
               pointwise_slope=fit.slope, pointwise_intercept=fit.intercept, pointwise_r2=fit.r2)
    crit.append(at_least("pointwise_fit_r2", "pointwise-tail-shape", fit.r2, cfg.threshold("min_r2")))
    crit.append(above("pointwise_fit_slope", "pointwise-tail-shape", fit.slope, 0.0))
    crit.append(at_most("max_tail_frequency", "pointwise-tail-shape", float(np.max(freq)), 1.0))

    def sums_shape(s):
        return params.c3 * n * N * s * min(1.0, n * analytic.rate_function_g(n, k, s))

    dev_s = np.array([r.payload["dev_sums"] for r in records])
    grid_s, _ = _tail_grid(np.abs(dev_s), lo, min_count, points)
    if grid_s is not None:
        freq_s, fit_s = _tail_fit(dev_s, grid_s, sums_shape)
        agg.update(sums_grid=grid_s.tolist(), sums_frequencies=freq_s.tolist(),
                   sums_slope=fit_s.slope, sums_r2=fit_s.r2)
        crit.append(at_least("sums_fit_r2", "sums-deviation-shape", fit_s.r2,
                             cfg.threshold("min_r2"), informational=True))
    notes.append("fast sampler path: pointwise sums, exact in law for a fixed frame")
    return agg, crit, notes, False


def _normality_trial(cfg):
    n, N, k = cfg.n, cfg.N, cfg.resolved_k()
    if cfg.path == "fast":
        def run(rng):
            return {"lambda": samplers.lambda_hat(samplers.sample_s_hat(n, k, N, rng))}
    else:
        def run(rng):
            state = linalg.simulate_product(n, N, rng)
            return {"lambda": state.log_scales[:k] / N}
    return run


def _normality_aggregate(cfg, records):
    n, N, k = cfg.n, cfg.N, cfg.resolved_k()
    draws = np.array([[r.payload[f"lambda_{j}"] for j in range(1, k + 1)] for r in records])
    mu = [analytic.mean_log_chi(n, j) for j in range(1, k + 1)]
    sigma = [math.sqrt(analytic.var_log_chi(n, j)) for j in range(1, k + 1)]
    rep = stats.normality_proxy(draws, mu, sigma, math.sqrt(N))
    cov = samplers.theoretical_cov_check(n, k, N)
    slow = cfg.path == "slow"
    ks_thr = cfg.threshold("marginal_ks_slow" if slow else "marginal_ks")
    maha_thr = max(ks_thr, cfg.threshold("mahalanobis_ks")) if slow else cfg.threshold("mahalanobis_ks")
    agg = {
        "path": cfg.path,
        "marginal_ks": list(rep.marginal_ks),
        "max_abs_offdiag_corr": rep.max_abs_offdiag_corr,
        "mahalanobis_ks": rep.mahalanobis_ks,
        "cov_hs_half": cov.hs_half,
        "cov_reference": cov.bound,
        "cov_ratio": cov.ratio,
    }
    crit = [at_most(f"marginal_ks_{j + 1}", "asymptotic-normality", d, ks_thr)
            for j, d in enumerate(rep.marginal_ks)]
    crit.append(at_most("max_abs_offdiag_corr", "asymptotic-normality",
                        rep.max_abs_offdiag_corr, cfg.threshold("max_offdiag_corr")))
    crit.append(at_most("mahalanobis_ks", "asymptotic-normality", rep.mahalanobis_ks, maha_thr))
    crit.append(at_most("cov_ratio", "normality-covariance", cov.ratio, cfg.threshold("cov_ratio")))
    notes = [f"{cfg.path} path" + (": coordinate-frame QR simulation" if slow else ": exact chi-squared sampler")]
    return agg, crit, notes, False


def _identity_trial(cfg, qr=linalg.qr_positive):
    n, N, k = cfg.n, cfg.N, cfg.resolved_k()
    nw, Nw = min(n, IDENTITY_DENSE_MAX), min(N, IDENTITY_DENSE_MAX)
    kw = min(k, nw)

    def run(rng):
        # Determinant conservation and orthogonality on the full (n, N) product.
        state = linalg.ProductState.fresh(n)
        det_sum = 0.0
        for _ in range(N):
            a = linalg.ginibre(n, rng)
            det_sum += np.linalg.slogdet(a)[1]
            state = linalg.product_push(state, a, qr=qr)
        with np.errstate(invalid="ignore"):
            det_rel = abs(float(np.sum(state.log_scales)) - det_sum) / max(1.0, abs(det_sum))
        qr_log_norm = float(state.log_wedge_prefix()[k - 1])
        drift = linalg.orthogonality_drift(state.q_factor)
        sampler_log_norm = samplers.pointwise_log_norm(n, k, N, rng)

        # Wedge and majorization on a small product, formed exactly.
        factors = [linalg.ginibre(nw, rng) for _ in range(Nw)]
        small = linalg.push_all(linalg.ProductState.fresh(nw), factors, qr=qr)
        prefix = small.log_wedge_prefix()
        x_int, e = linalg.exact_dense_product(factors)
        gram = wedge.exact_log_wedge_prefix(x_int, e)
        with np.errstate(invalid="ignore"):
            wedge_err = float(np.max(np.abs(prefix - gram)))
        x = np.array([[math.ldexp(v, -e) for v in row] for row in x_int])
        sv_prefix = np.cumsum(np.log(linalg.jacobi_svd(x)))
        # The full prefix is log|det X|; use the exact value there.
        sv_prefix[-1] = gram[-1]
        theta = wedge.haar_frame(nw, kw, rng)
        xt_int, et = linalg.exact_dense_product([theta.vectors.T, *factors])
        frame_log = wedge.exact_log_wedge_prefix(xt_int, et)[-1]
        scale = max(1.0, float(np.max(np.abs(sv_prefix))))
        with np.errstate(invalid="ignore"):
            major = max(
                float(np.max(prefix[:-1] - sv_prefix[:-1])) if nw > 1 else 0.0,
                frame_log - float(sv_prefix[kw - 1]),
                abs(float(prefix[-1] - sv_prefix[-1])),
            ) / scale
        return {
            "det_rel_err": det_rel,
            "wedge_err": wedge_err,
            "qr_log_norm": qr_log_norm,
            "sampler_log_norm": sampler_log_norm,
            "majorization_violation": major,
            "orthogonality_drift": drift,
        }

    return run


def _finite_max(values):
    v = np.asarray(values, dtype=float)
    return float(np.max(v)) if np.all(np.isfinite(v)) else math.inf


def _identity_aggregate(cfg, records):
    col = {key: np.array([r.payload[key] for r in records]) for key in records[0].payload}
    qr_norms, sampled = col["qr_log_norm"], col["sampler_log_norm"]
    if np.all(np.isfinite(qr_norms)):
        ks = stats.ks_two_sample(qr_norms, sampled)
    else:
        ks = 1.0
    t = len(records)
    ks_thr = stats.ks_critical_two_sample(t, t, cfg.threshold("ks_alpha"))
    agg = {
        "max_det_rel_err": _finite_max(col["det_rel_err"]),
        "max_wedge_err": _finite_max(col["wedge_err"]),
        "ks_qr_vs_sampler": ks,
        "max_majorization_violation": _finite_max(col["majorization_violation"]),
        "max_orthogonality_drift": _finite_max(col["orthogonality_drift"]),
        "dense_size": [min(cfg.n, IDENTITY_DENSE_MAX), min(cfg.N, IDENTITY_DENSE_MAX)],
    }
    crit = [
        at_most("determinant_conservation", "determinant-conservation",
                agg["max_det_rel_err"], cfg.threshold("det_rel")),
        at_most("wedge_oracle", "wedge-gram-identity", agg["max_wedge_err"], cfg.threshold("wedge")),
        at_most("chi_squared_identity_ks", "chi-squared-identity", ks, ks_thr),
        at_most("majorization", "majorization-equality", agg["max_majorization_violation"],
                cfg.threshold("majorization")),
        at_most("orthogonality", "qr-orthogonality", agg["max_orthogonality_drift"],
                cfg.threshold("orthogonality")),
    ]
    notes = [f"wedge and majorization families use an exactly formed {agg['dense_size'][0]} x "
             f"{agg['dense_size'][0]}, {agg['dense_size'][1]}-factor sub-product"]
    return agg, crit, notes, False


SMALLBALL_EPS = [2.0 ** -j for j in range(6, 0, -1)]


def _smallball_trial(cfg):
    n, k = cfg.n, cfg.resolved_k()

    def run(rng):
        return {"log_ratio": wedge.small_ball_log_ratio(n, k, rng)}

    return run


def smallball_curve(log_ratios, n, k, min_events=1):
    """Counts and probabilities of ratio^{1/k} <= eps sqrt(k/n) on the dyadic grid."""
    stat = np.exp(np.asarray(log_ratios) / k)
    eps = np.array(SMALLBALL_EPS)
    counts = np.array([int(np.count_nonzero(stat <= e * math.sqrt(k / n))) for e in eps])
    keep = counts >= min_events
    return eps, counts, counts / stat.size, keep


def _smallball_aggregate(cfg, records):
    n, k = cfg.n, cfg.resolved_k()
    logs = np.array([r.payload["log_ratio"] for r in records])
    eps, counts, probs, keep = smallball_curve(logs, n, k, int(cfg.threshold("min_events")))
    agg = {"eps": eps.tolist(), "counts": counts.tolist(), "probabilities": probs.tolist(),
           "points_used": int(np.count_nonzero(keep))}
    target = k / 2.0 - cfg.threshold("slope_slack")
    notes = []
    if agg["points_used"] < cfg.threshold("min_points"):
        notes.append("too few grid points with enough events for a slope fit")
        slope = -math.inf
    else:
        fit = stats.loglog_slope(eps[keep], probs[keep])
        slope = fit.slope
        agg.update(slope=fit.slope, r2=fit.r2)
        if not np.all(keep):
            notes.append(f"excluded {int(np.count_nonzero(~keep))} grid points with fewer than "
                         f"{int(cfg.threshold('min_events'))} events")
    crit = [at_least("small_ball_slope", "small-ball-exponent", slope, target)]
    return agg, crit, notes, False


def _moments_trial(cfg):
    n, k = cfg.n, cfg.resolved_k()

    def run(rng):
        return {"log_det": float(wedge.log_det_gram_draws(n, k, rng, 1)[0])}

    return run


def _moments_aggregate(cfg, records):
    n, k, p = cfg.n, cfg.resolved_k(), cfg.resolved_p()
    logs = np.array([r.payload["log_det"] for r in records])
    est = wedge.moment_from_log_dets(logs, k, p)
    ratio = est / math.sqrt(n)
    agg = {"estimate": est, "ratio_to_sqrt_n": ratio}
    crit = [at_most("moment_ratio", "det-moment-bound", ratio, cfg.threshold("max_ratio"))]
    return agg, crit, [], False


_SUITES = {
    "triangle": (_triangle_trial, _triangle_aggregate),
    "sums": (_sums_trial, _sums_aggregate),
    "normality": (_normality_trial, _normality_aggregate),
    "identity": (_identity_trial, _identity_aggregate),
    "smallball": (_smallball_trial, _smallball_aggregate),
    "moments": (_moments_trial, _moments_aggregate),
}


def trial_function(cfg: ExperimentConfig):
    return _SUITES[cfg.suite][0](cfg)


def run_suite(cfg: ExperimentConfig, trial_fn=None) -> Report:
    """Run the trials of ``cfg.suite`` and aggregate them into a report."""
    make_trial, aggregate = _SUITES[cfg.suite]
    start = time.perf_counter()
    records = run_monte_carlo(cfg, trial_fn or make_trial(cfg))
    agg, crit, notes, info = aggregate(cfg, records)
    wall = time.perf_counter() - start
    timing = {"wall_seconds": wall, "trials_per_second": throughput(len(records), wall)}
    return Report(cfg.echo(), records, agg, crit, info, notes, timing)


def _require(cfg, suite):
    if cfg.suite != suite:
        raise ConfigError(f"expected a {suite} config, got {cfg.suite}")


def verify_triangle(cfg: ExperimentConfig) -> Report:
    _require(cfg, "triangle")
    if cfg.n < 4 or cfg.N < 4:
        raise DomainError(f"triangle suite needs n, N >= 4, got n={cfg.n}, N={cfg.N}")
    return run_suite(cfg)


def verify_sums(cfg: ExperimentConfig) -> Report:
    _require(cfg, "sums")
    return run_suite(cfg)


def verify_normality(cfg: ExperimentConfig) -> Report:
    _require(cfg, "normality")
    return run_suite(cfg)


def verify_identity(cfg: ExperimentConfig, qr=linalg.qr_positive) -> Report:
    """Cross-path identities; ``qr`` replaces the QR kernel for fault injection."""
    _require(cfg, "identity")
    return run_suite(cfg, _identity_trial(cfg, qr=qr))


def verify_smallball(cfg: ExperimentConfig) -> Report:
    _require(cfg, "smallball")
    return run_suite(cfg)


def verify_moments(cfg: ExperimentConfig) -> Report:
    _require(cfg, "moments")
    return run_suite(cfg)


VERIFY = {
    "triangle": verify_triangle,
    "sums": verify_sums,
    "normality": verify_normality,
    "identity": verify_identity,
    "smallball": verify_smallball,
    "moments": verify_moments,
}
