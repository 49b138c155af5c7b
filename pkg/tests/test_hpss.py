import numpy as np
import pytest

from heartspec import (
    DEFAULT_CYCLE,
    DataError,
    ParameterError,
    Spectrogram,
    hpss_decompose,
    median_filter_axis,
    stft_spectrogram,
    synthesize_segment,
)


def _spec(values):
    return Spectrogram(
        values=np.asarray(values, dtype=np.float64),
        frame_rate=50.0,
        freq_resolution=0.78125,
    )


def _brute_median(row, k):
    # sort-and-pick-middle over reflect-padded windows
    pad = k // 2
    padded = np.pad(row, pad, mode="reflect")
    out = np.empty_like(row)
    for i in range(len(row)):
        window = sorted(padded[i : i + k])
        out[i] = window[k // 2]
    return out


def test_median_constant_unchanged():
    m = np.full((6, 9), 3.5)
    for axis in ("time", "frequency"):
        np.testing.assert_array_equal(median_filter_axis(m, 5, axis=axis), m)


def test_median_impulse_row():
    row = np.array([[0.0, 0.0, 5.0, 0.0, 0.0]])
    out = median_filter_axis(row, 3, axis="frequency")
    np.testing.assert_array_equal(out[0], np.zeros(5))


def test_median_spike_row_reflect():
    # reflected ends give windows [2,1,2], [1,2,100], [2,100,3], [100,3,4], [3,4,3]
    row = np.array([[1.0, 2.0, 100.0, 3.0, 4.0]])
    out = median_filter_axis(row, 3, axis="frequency")
    np.testing.assert_array_equal(out[0], np.array([2.0, 2.0, 3.0, 4.0, 3.0]))


def test_median_matches_brute_force():
    rng = np.random.default_rng(42)
    for k in (3, 5, 17):
        values = rng.uniform(0, 10, size=(40, 33))
        got = median_filter_axis(values, k, axis="frequency")
        want = np.vstack([_brute_median(r, k) for r in values])
        np.testing.assert_array_equal(got, want)
        got_t = median_filter_axis(values, k, axis="time")
        want_t = np.vstack([_brute_median(c, k) for c in values.T]).T
        np.testing.assert_array_equal(got_t, want_t)


def test_median_k_one_identity():
    rng = np.random.default_rng(0)
    m = rng.uniform(size=(5, 5))
    np.testing.assert_array_equal(median_filter_axis(m, 1, axis="time"), m)


def test_median_parameter_validation():
    m = np.ones((6, 6))
    with pytest.raises(ParameterError):
        median_filter_axis(m, 4, axis="time")
    with pytest.raises(ParameterError):
        median_filter_axis(m, -3, axis="time")
    with pytest.raises(ParameterError):
        median_filter_axis(m, 3, axis="diagonal")
    with pytest.raises(ParameterError):
        median_filter_axis(np.ones((2, 6)), 17, axis="time")  # pad exceeds length


def test_masks_partition_of_unity():
    rng = np.random.default_rng(7)
    spec = _spec(rng.uniform(0, 4, size=(60, 40)))
    res = hpss_decompose(spec)
    assert np.max(np.abs(res.mask_h + res.mask_p - 1.0)) <= 1e-12
    assert np.all(res.mask_h >= 0.0) and np.all(res.mask_h <= 1.0)
    assert np.all(res.mask_p >= 0.0) and np.all(res.mask_p <= 1.0)


def test_reconstruction_exact():
    spec = stft_spectrogram(synthesize_segment(DEFAULT_CYCLE))
    res = hpss_decompose(spec)
    recon = res.harmonic.values + res.percussive.values
    scale = np.maximum(spec.values, 1e-300)
    assert np.max(np.abs(recon - spec.values) / scale) <= 1e-9


def test_degenerate_zero_cells_half_half():
    spec = _spec(np.zeros((20, 20)))
    res = hpss_decompose(spec)
    np.testing.assert_array_equal(res.mask_h, np.full((20, 20), 0.5))
    np.testing.assert_array_equal(res.mask_p, np.full((20, 20), 0.5))


def test_horizontal_line_classified_harmonic():
    values = np.zeros((64, 64))
    values[:, 20] = 3.0  # constant-in-time tone
    res = hpss_decompose(_spec(values), kernel_time=17, kernel_freq=17)
    assert res.mask_h[:, 20].mean() >= 0.9


def test_vertical_line_classified_percussive():
    values = np.zeros((64, 64))
    values[30, :] = 3.0  # single-frame impulse
    res = hpss_decompose(_spec(values), kernel_time=17, kernel_freq=17)
    assert res.mask_p[30, :].mean() >= 0.9


def test_scale_homogeneity_of_masks():
    rng = np.random.default_rng(11)
    values = rng.uniform(0, 2, size=(48, 32))
    a = hpss_decompose(_spec(values))
    b = hpss_decompose(_spec(7.25 * values))
    np.testing.assert_allclose(a.mask_h, b.mask_h, rtol=0, atol=1e-12)
    np.testing.assert_allclose(a.mask_p, b.mask_p, rtol=0, atol=1e-12)


def test_component_shapes_and_types():
    spec = stft_spectrogram(synthesize_segment(DEFAULT_CYCLE))
    res = hpss_decompose(spec)
    for part in (res.harmonic, res.percussive):
        assert isinstance(part, Spectrogram)
        assert part.values.shape == spec.values.shape
        assert part.frame_rate == spec.frame_rate
        assert part.freq_resolution == spec.freq_resolution
    for m in (res.mask_h, res.mask_p, res.enhanced_h, res.enhanced_p):
        assert m.shape == spec.values.shape


def test_even_kernel_rejected():
    spec = _spec(np.ones((20, 20)))
    with pytest.raises(ParameterError):
        hpss_decompose(spec, kernel_time=16)
    with pytest.raises(ParameterError):
        hpss_decompose(spec, kernel_freq=2)
