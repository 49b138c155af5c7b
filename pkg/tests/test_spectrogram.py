import math

import numpy as np
import pytest

from heartspec import (
    DEFAULT_CYCLE,
    DataError,
    ParameterError,
    Segment,
    Spectrogram,
    stft_spectrogram,
    synthesize_segment,
)

FS = 200.0


def _segment(samples):
    return Segment(samples=np.asarray(samples, dtype=np.float64), sample_rate=FS)


def test_canonical_shape_and_calibration():
    spec = stft_spectrogram(synthesize_segment(DEFAULT_CYCLE))
    assert spec.values.shape == (185, 65)
    assert spec.frame_rate == 50.0
    assert spec.freq_resolution == 0.78125
    assert spec.origin_time == 0.0
    assert spec.origin_freq == 0.0


def test_zero_segment_zero_spectrogram():
    spec = stft_spectrogram(_segment(np.zeros(800)))
    assert spec.values.shape == (185, 65)
    assert np.all(spec.values == 0.0)


def test_shape_law():
    for n in (256, 300, 799, 800):
        spec = stft_spectrogram(_segment(np.ones(n)), win_len=64, hop=4, nfft=256)
        assert spec.n_frames == (n - 64) // 4 + 1


def test_tone_argmax_bin():
    t = np.arange(800) / FS
    spec = stft_spectrogram(_segment(np.cos(2 * math.pi * 10.0 * t)))
    assert np.all(np.argmax(spec.values, axis=1) == 13)
    assert spec.freq_to_bin(10.0) == 13


def test_impulse_energy_concentration():
    x = np.zeros(800)
    x[400] = 1.0
    spec = stft_spectrogram(_segment(x))
    covering = [m for m in range(spec.n_frames) if m * 4 <= 400 < m * 4 + 64]
    e_in = sum(float(np.sum(spec.values[m] ** 2)) for m in covering)
    e_tot = float(np.sum(spec.values**2))
    assert e_in >= 0.9 * e_tot


def test_non_negative_values():
    rng = np.random.default_rng(0)
    spec = stft_spectrogram(_segment(rng.normal(size=500)))
    assert np.all(spec.values >= 0.0)


def test_triangle_inequality():
    rng = np.random.default_rng(1)
    x = rng.normal(size=400)
    y = rng.normal(size=400)
    sx = stft_spectrogram(_segment(x)).values
    sy = stft_spectrogram(_segment(y)).values
    sxy = stft_spectrogram(_segment(x + y)).values
    assert np.all(sxy <= sx + sy + 1e-12)


def test_index_maps():
    spec = stft_spectrogram(synthesize_segment(DEFAULT_CYCLE))
    assert spec.time_to_frame(spec.origin_time) == 0
    assert spec.freq_to_bin(spec.origin_freq) == 0
    assert spec.time_to_frame(0.4) == 20
    assert spec.frame_to_time(20) == pytest.approx(0.4)
    assert spec.bin_to_freq(13) == pytest.approx(13 * 0.78125)


def test_index_round_trip_error_bound():
    spec = stft_spectrogram(synthesize_segment(DEFAULT_CYCLE))
    for t in np.linspace(0.0, spec.frame_to_time(spec.n_frames - 1), 37):
        back = spec.frame_to_time(spec.time_to_frame(t))
        assert abs(back - t) <= 4 / (2 * FS) + 1e-12
    for f in np.linspace(0.0, spec.bin_to_freq(spec.n_bins - 1), 37):
        back = spec.freq_to_bin(f) * spec.freq_resolution
        assert abs(back - f) <= spec.freq_resolution / 2 + 1e-12


def test_index_range_errors():
    spec = stft_spectrogram(synthesize_segment(DEFAULT_CYCLE))
    with pytest.raises(ParameterError):
        spec.time_to_frame(-0.5)
    with pytest.raises(ParameterError):
        spec.time_to_frame(1e6)
    with pytest.raises(ParameterError):
        spec.freq_to_bin(-1.0)
    with pytest.raises(ParameterError):
        spec.freq_to_bin(500.0)
    with pytest.raises(ParameterError):
        spec.frame_to_time(spec.n_frames)
    with pytest.raises(ParameterError):
        spec.bin_to_freq(-1)


def test_short_segment_rejected():
    with pytest.raises(DataError):
        stft_spectrogram(_segment(np.ones(63)), win_len=64)


def test_parameter_validation():
    seg = _segment(np.ones(800))
    with pytest.raises(ParameterError):
        stft_spectrogram(seg, hop=0)
    with pytest.raises(ParameterError):
        stft_spectrogram(seg, hop=65, win_len=64)
    with pytest.raises(ParameterError):
        stft_spectrogram(seg, win_len=300, nfft=256)


def test_spectrogram_type_validation():
    with pytest.raises(DataError):
        Spectrogram(values=np.array([[1.0, -0.5]]), frame_rate=50.0, freq_resolution=1.0)
    with pytest.raises(ParameterError):
        Spectrogram(values=np.ones((2, 2)), frame_rate=0.0, freq_resolution=1.0)
