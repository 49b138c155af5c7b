import math

import numpy as np
import pytest

from heartspec import (
    DEFAULT_CYCLE,
    IDENT_TOLERANCE,
    CycleParams,
    DataError,
    DtmConfig,
    FittedTheta,
    ParameterError,
    Segment,
    VibrationParams,
    add_noise,
    dtm_benchmark,
    dtm_fit,
    dtm_residual,
    synthesize_segment,
)

TRUTH = (0.4, 0.85, 10.0, 23.0)


def _canonical():
    return synthesize_segment(DEFAULT_CYCLE)


def _norm(segment):
    y = segment.samples / np.max(np.abs(segment.samples))
    return float(np.linalg.norm(y))


def _random_feasible(rng, cfg, duration):
    t1_lo, t1_hi = cfg.resolved_t1_bounds(duration)
    d_lo, d_hi = cfg.resolved_delta_bounds()
    t1 = rng.uniform(t1_lo, t1_hi)
    delta = rng.uniform(d_lo, d_hi)
    f1 = rng.uniform(*cfg.f1_bounds)
    f2 = rng.uniform(*cfg.f2_bounds)
    return (t1, t1 + delta, f1, f2)


def test_residual_zero_at_truth():
    r, grad = dtm_residual(TRUTH, _canonical())
    assert r <= 1e-9
    assert grad.shape == (4,)


def test_residual_large_far_from_truth():
    seg = _canonical()
    r, _ = dtm_residual((1.4, 1.85, 10.0, 23.0), seg)
    assert r >= 0.9 * _norm(seg)


def test_residual_bounds_enforced():
    seg = _canonical()
    for bad in [
        (0.4, 0.85, 3.0, 23.0),  # f1 below 5
        (0.4, 0.85, 10.0, 40.0),  # f2 above 30
        (3.8, 4.25, 10.0, 23.0),  # T1 above duration - tau
        (0.4, 1.0, 10.0, 23.0),  # delta above tau
        (0.4, 0.45, 10.0, 23.0),  # delta below 0.1
    ]:
        with pytest.raises(ParameterError):
            dtm_residual(bad, seg)
    with pytest.raises(ParameterError):
        dtm_residual((0.4, 0.3, 10.0, 23.0), seg)  # T2 before T1


def test_gradient_matches_finite_differences():
    # relative error is vector-normed per point: component-wise comparison at
    # near-zero components is dominated by the FD oracle's own roundoff
    seg = _canonical()
    cfg = DtmConfig()
    rng = np.random.default_rng(5)
    h = 1e-6
    worst = 0.0
    for _ in range(10):
        theta = np.array(_random_feasible(rng, cfg, seg.duration))
        _, grad = dtm_residual(theta, seg, cfg)
        fd = np.empty(4)
        for j in range(4):
            up = theta.copy()
            dn = theta.copy()
            up[j] += h
            dn[j] -= h
            fd[j] = (dtm_residual(up, seg, cfg)[0] - dtm_residual(dn, seg, cfg)[0]) / (2 * h)
        rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(grad), np.linalg.norm(fd), 1e-12)
        worst = max(worst, rel)
    assert worst <= 1e-5


def test_fit_recovers_canonical_segment():
    fit = dtm_fit(_canonical())
    assert fit.converged
    assert abs(fit.T1 - 0.4) <= IDENT_TOLERANCE
    assert abs(fit.T2 - 0.85) <= IDENT_TOLERANCE
    assert abs(fit.f1 - 10.0) <= 1.0
    assert abs(fit.f2 - 23.0) <= 1.0
    assert fit.residual_norm < 1e-3


def test_fit_respects_spacing_constraint():
    rng = np.random.default_rng(3)
    cfg = DtmConfig()
    for trial in range(5):
        theta = _random_feasible(rng, cfg, 4.0)
        cyc = CycleParams(
            VibrationParams(0.5, theta[2], theta[0], 0.05),
            VibrationParams(0.1, theta[3], theta[1], 0.03),
        )
        fit = dtm_fit(synthesize_segment(cyc), seed=trial)
        assert 0.0 < fit.T2 - fit.T1 < 0.5


def test_fit_deterministic():
    seg = add_noise(_canonical(), 5.0, seed=2)
    a = dtm_fit(seg, seed=9)
    b = dtm_fit(seg, seed=9)
    assert a == b


def test_fit_translation_sanity():
    base = (0.9, 1.27, 11.0, 21.0)
    shifted = (1.2, 1.57, 11.0, 21.0)
    fits = []
    for theta in (base, shifted):
        cyc = CycleParams(
            VibrationParams(0.5, theta[2], theta[0], 0.05),
            VibrationParams(0.1, theta[3], theta[1], 0.03),
        )
        fits.append(dtm_fit(synthesize_segment(cyc)))
    assert abs((fits[1].T1 - fits[0].T1) - 0.3) <= IDENT_TOLERANCE
    assert abs((fits[1].T2 - fits[0].T2) - 0.3) <= IDENT_TOLERANCE


def test_fit_noise_only_flagged():
    for seed in range(3):
        noise = Segment(
            samples=np.random.default_rng(seed).normal(0, 1, 800),
            sample_rate=200.0,
        )
        fit = dtm_fit(noise, seed=seed)
        assert (not fit.converged) or fit.residual_norm >= 0.95 * _norm(noise)


def test_fit_zero_power_rejected():
    with pytest.raises(DataError):
        dtm_fit(Segment(samples=np.zeros(800), sample_rate=200.0))


def test_fit_short_segment_rejected():
    seg = Segment(samples=np.ones(60), sample_rate=200.0)  # 0.3 s < tau
    with pytest.raises(DataError):
        dtm_fit(seg)


def test_config_validation():
    with pytest.raises(ParameterError):
        DtmConfig(tau=-0.5)
    with pytest.raises(ParameterError):
        DtmConfig(delta_bounds=(0.2, 0.8))  # above tau
    with pytest.raises(ParameterError):
        DtmConfig(n_starts=0)
    cfg = DtmConfig(tau=0.5)
    lo, hi = cfg.resolved_delta_bounds()
    assert 0.0 < lo < hi < 0.5
    with pytest.raises(DataError):
        cfg.resolved_t1_bounds(0.4)  # duration below tau


def test_fitted_theta_tuple_view():
    fit = FittedTheta(0.4, 0.85, 10.0, 23.0, 0.0, True, 12)
    assert fit.as_tuple() == (0.4, 0.85, 10.0, 23.0)


def test_benchmark_noiseless_rates():
    rows = dtm_benchmark([math.inf], n_trials=6, seed=0)
    assert len(rows) == 1
    row = rows[0]
    assert row.snr_db == math.inf
    assert row.n_trials == 6
    assert row.hit_rate_v1 == 1.0
    assert row.hit_rate_v2 == 1.0
    assert row.converged_rate == 1.0
    assert row.mean_abs_err_t1 <= IDENT_TOLERANCE
    assert row.mean_abs_err_t2 <= IDENT_TOLERANCE


def test_benchmark_deterministic():
    a = dtm_benchmark([10.0], n_trials=4, seed=3)
    b = dtm_benchmark([10.0], n_trials=4, seed=3)
    assert a == b


def test_benchmark_validation():
    with pytest.raises(ParameterError):
        dtm_benchmark([math.inf], n_trials=0)
    with pytest.raises(ParameterError):
        dtm_benchmark([], n_trials=4)
