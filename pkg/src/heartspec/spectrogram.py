"""Short-time Fourier magnitude spectrograms with explicit index calibration.

Frames are taken without padding or centering: frame m covers samples
[m*hop, m*hop + win_len), so a segment of length L yields
M = (L - win_len)//hop + 1 frames and frame m starts at t = m*hop/fs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import DataError, ParameterError
from .signal_model import Segment

DEFAULT_WIN_LEN = 64
DEFAULT_HOP = 4
DEFAULT_NFFT = 256
DEFAULT_FREQ_MAX = 50.0


@dataclass
class Spectrogram:
    """Magnitude spectrogram, shape (n_frames, n_bins), with its axis calibration.

    ``values[m, n]`` is the magnitude at frame m and frequency bin n. Frame m
    maps to time ``origin_time + m / frame_rate``; bin n maps to frequency
    ``origin_freq + n * freq_resolution``.
    """

    values: np.ndarray
    frame_rate: float
    freq_resolution: float
    origin_time: float = 0.0
    origin_freq: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError(f"values must be 2-D, got shape {self.values.shape}")
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise DataError(f"values must be non-empty, got shape {self.values.shape}")
        if np.any(self.values < 0):
            raise DataError("magnitude spectrogram must be non-negative")
        if not (self.frame_rate > 0):
            raise ParameterError(f"frame_rate must be > 0, got {self.frame_rate}")
        if not (self.freq_resolution > 0):
            raise ParameterError(f"freq_resolution must be > 0, got {self.freq_resolution}")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]

    def frame_to_time(self, m: int) -> float:
        """Start time in seconds of frame ``m``."""
        if not (0 <= m < self.n_frames):
            raise ParameterError(f"frame {m} outside [0, {self.n_frames})")
        return self.origin_time + m / self.frame_rate

    def time_to_frame(self, t: float) -> int:
        """Nearest frame index for time ``t`` seconds. Round-trip error <= half a frame period."""
        m = round((t - self.origin_time) * self.frame_rate)
        if not (0 <= m < self.n_frames):
            raise ParameterError(f"time {t} s maps to frame {m}, outside [0, {self.n_frames})")
        return int(m)

    def bin_to_freq(self, n: int) -> float:
        """Center frequency in Hz of bin ``n``."""
        if not (0 <= n < self.n_bins):
            raise ParameterError(f"bin {n} outside [0, {self.n_bins})")
        return self.origin_freq + n * self.freq_resolution

    def freq_to_bin(self, f: float) -> int:
        """Nearest bin index for frequency ``f`` Hz. Round-trip error <= half a bin width."""
        n = round((f - self.origin_freq) / self.freq_resolution)
        if not (0 <= n < self.n_bins):
            raise ParameterError(f"frequency {f} Hz maps to bin {n}, outside [0, {self.n_bins})")
        return int(n)

    def with_values(self, values: np.ndarray) -> "Spectrogram":
        """Copy of this spectrogram with the same calibration and new values."""
        return Spectrogram(
            values=values,
            frame_rate=self.frame_rate,
            freq_resolution=self.freq_resolution,
            origin_time=self.origin_time,
            origin_freq=self.origin_freq,
        )


def _hann_periodic(win_len: int) -> np.ndarray:
    # periodic Hann: 0.5 - 0.5*cos(2*pi*k/N), k = 0..N-1
    k = np.arange(win_len)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / win_len)


def stft_spectrogram(
    segment: Segment,
    win_len: int = DEFAULT_WIN_LEN,
    hop: int = DEFAULT_HOP,
    nfft: int = DEFAULT_NFFT,
    freq_max: float | None = DEFAULT_FREQ_MAX,
) -> Spectrogram:
    """Compute the magnitude STFT of a segment.

    Hann (periodic) window of ``win_len`` samples, hop ``hop``, zero-padded
    FFT of ``nfft`` points, magnitudes kept for bins up to ``freq_max`` Hz
    (all of them when ``freq_max`` is None). No padding or centering, so the
    first frame starts exactly at t = 0 and ``origin_time == 0``.
    """
    if not (isinstance(hop, int) and hop > 0):
        raise ParameterError(f"hop must be a positive int, got {hop}")
    if not (isinstance(win_len, int) and win_len >= hop):
        raise ParameterError(f"win_len must be an int >= hop, got {win_len}")
    if not (isinstance(nfft, int) and nfft >= win_len):
        raise ParameterError(f"nfft must be an int >= win_len, got {nfft}")
    x = segment.samples
    if x.size < win_len:
        raise DataError(f"segment of {x.size} samples is shorter than one window ({win_len})")
    if x.size < nfft:
        raise DataError(f"segment of {x.size} samples is shorter than nfft ({nfft})")

    window = _hann_periodic(win_len)
    frames = sliding_window_view(x, win_len)[::hop]  # (M, win_len)
    mags = np.abs(np.fft.rfft(frames * window, n=nfft, axis=1))

    fs = segment.sample_rate
    freq_resolution = fs / nfft
    if freq_max is not None:
        if not (freq_max > 0):
            raise ParameterError(f"freq_max must be > 0, got {freq_max}")
        n_bins = min(int(freq_max / freq_resolution) + 1, mags.shape[1])
        mags = mags[:, :n_bins]
    return Spectrogram(
        values=mags,
        frame_rate=fs / hop,
        freq_resolution=freq_resolution,
        origin_time=0.0,
        origin_freq=0.0,
    )
