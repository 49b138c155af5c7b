"""Two-vibration model of the radar-observed cardiac displacement signal.

Each heartbeat cycle contributes two transient vibrations: a dominant one at
the opening of the aortic valve and a weaker one at its closing, no more than
``MAX_VIBRATION_SPACING`` seconds later. A single vibration is a Gaussian
envelope riding on a cosine carrier,

    v(t) = a * cos(2*pi*f*t) * exp(-(t - T)**2 / b**2)

with the carrier phase taken on the absolute time axis (not re-anchored to
the envelope center T).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .exceptions import DataError, ParameterError

# Hard upper bound on the opening-to-closing spacing within one cycle, in
# seconds. Cycle validation and template fitting both rely on it.
MAX_VIBRATION_SPACING = 0.5


@dataclass(frozen=True)
class VibrationParams:
    """One Gaussian-windowed cosine burst.

    Attributes
    ----------
    amplitude : float
        Peak envelope amplitude ``a`` (>= 0).
    center_freq : float
        Carrier frequency ``f`` in Hz (> 0).
    time_index : float
        Envelope center ``T`` in seconds (>= 0).
    width : float
        Gaussian width ``b`` in seconds (> 0).
    """

    amplitude: float
    center_freq: float
    time_index: float
    width: float

    def __post_init__(self):
        if not (self.amplitude >= 0):
            raise ParameterError(f"amplitude must be >= 0, got {self.amplitude}")
        if not (self.center_freq > 0):
            raise ParameterError(f"center_freq must be > 0, got {self.center_freq}")
        if not (self.time_index >= 0):
            raise ParameterError(f"time_index must be >= 0, got {self.time_index}")
        if not (self.width > 0):
            raise ParameterError(f"width must be > 0, got {self.width}")


@dataclass(frozen=True)
class CycleParams:
    """Parameters of one heartbeat cycle: the two vibrations in order.

    ``v2`` must start after ``v1`` and within ``MAX_VIBRATION_SPACING``
    seconds of it.
    """

    v1: VibrationParams
    v2: VibrationParams

    def __post_init__(self):
        spacing = self.v2.time_index - self.v1.time_index
        if not (0 < spacing < MAX_VIBRATION_SPACING):
            raise ParameterError(
                "v2 must follow v1 by less than "
                f"{MAX_VIBRATION_SPACING} s, got spacing {spacing:.6g} s"
            )


# Canonical single-cycle benchmark parameters.
DEFAULT_V1 = VibrationParams(amplitude=0.5, center_freq=10.0, time_index=0.4, width=0.05)
DEFAULT_V2 = VibrationParams(amplitude=0.1, center_freq=23.0, time_index=0.85, width=0.03)
DEFAULT_CYCLE = CycleParams(DEFAULT_V1, DEFAULT_V2)

DEFAULT_SAMPLE_RATE = 200.0
DEFAULT_DURATION = 4.0


@dataclass
class Segment:
    """A fixed-rate 1-D displacement recording.

    Attributes
    ----------
    samples : numpy.ndarray
        1-D float array of displacement samples.
    sample_rate : float
        Sampling rate in Hz.
    beat_times : list of float, optional
        Ground-truth beat instants (v1 centers) in seconds, ascending.
    """

    samples: np.ndarray
    sample_rate: float
    beat_times: list[float] | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise DataError(f"samples must be 1-D, got shape {self.samples.shape}")
        if self.samples.size == 0:
            raise DataError("samples must be non-empty")
        if not (self.sample_rate > 0):
            raise ParameterError(f"sample_rate must be > 0, got {self.sample_rate}")
        if self.beat_times is not None:
            bt = [float(t) for t in self.beat_times]
            if any(b < a for a, b in zip(bt, bt[1:])):
                raise DataError("beat_times must be ascending")
            self.beat_times = bt

    @property
    def duration(self) -> float:
        """Segment length in seconds."""
        return self.samples.size / self.sample_rate

    def time_grid(self) -> np.ndarray:
        """Sample instants in seconds, starting at 0."""
        return np.arange(self.samples.size) / self.sample_rate


def synthesize_vibration(params: VibrationParams, time_grid: np.ndarray) -> np.ndarray:
    """Evaluate one vibration on a time grid.

    Parameters
    ----------
    params : VibrationParams
    time_grid : numpy.ndarray
        1-D strictly increasing sample instants in seconds.

    Returns
    -------
    numpy.ndarray
        ``a * cos(2*pi*f*t) * exp(-(t - T)**2 / b**2)`` evaluated at ``t``.
    """
    t = np.asarray(time_grid, dtype=np.float64)
    if t.ndim != 1 or t.size == 0:
        raise ParameterError(f"time_grid must be a non-empty 1-D array, got shape {t.shape}")
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise ParameterError("time_grid must be strictly increasing")
    carrier = np.cos(2.0 * math.pi * params.center_freq * t)
    envelope = np.exp(-((t - params.time_index) ** 2) / params.width**2)
    return params.amplitude * carrier * envelope


def synthesize_segment(
    cycles: list[CycleParams] | CycleParams,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    duration: float = DEFAULT_DURATION,
) -> Segment:
    """Render the sum of zero or more cycles into a noise-free segment.

    Every vibration center must lie inside ``[0, duration)``. Beat times are
    the v1 centers in ascending order; no cycles gives an all-zero segment
    with an empty beat list.
    """
    if isinstance(cycles, CycleParams):
        cycles = [cycles]
    if not (sample_rate > 0):
        raise ParameterError(f"sample_rate must be > 0, got {sample_rate}")
    if not (duration > 0):
        raise ParameterError(f"duration must be > 0, got {duration}")
    n = round(sample_rate * duration)
    if abs(n - sample_rate * duration) > 1e-9:
        raise ParameterError(
            f"sample_rate * duration must be integral, got {sample_rate * duration}"
        )
    for c in cycles:
        for v in (c.v1, c.v2):
            if not (0 <= v.time_index < duration):
                raise ParameterError(
                    f"vibration center {v.time_index} s outside segment [0, {duration}) s"
                )
    t = np.arange(n) / sample_rate
    samples = np.zeros(n, dtype=np.float64)
    for c in cycles:
        samples += synthesize_vibration(c.v1, t)
        samples += synthesize_vibration(c.v2, t)
    beats = sorted(c.v1.time_index for c in cycles)
    return Segment(samples=samples, sample_rate=sample_rate, beat_times=beats)


def add_noise(
    segment: Segment,
    snr_db: float,
    seed: int,
    tone: tuple[float, float] | None = None,
) -> Segment:
    """Corrupt a segment with white Gaussian noise at a target SNR.

    Noise power is set against the mean power of ``segment.samples``; an SNR
    of ``+inf`` adds no noise. ``tone``, if given, is a ``(freq_hz,
    amplitude)`` pair adding a constant interferer ``A*cos(2*pi*f*t)`` on
    top, excluded from the SNR accounting. Deterministic for a given seed.
    """
    samples = segment.samples.astype(np.float64, copy=True)
    if np.isfinite(snr_db):
        power = float(np.mean(samples**2))
        if power <= 0:
            raise DataError("segment has zero power; SNR is undefined")
        sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
        rng = np.random.default_rng(seed)
        samples += rng.normal(0.0, sigma, samples.size)
    if tone is not None:
        freq, amp = float(tone[0]), float(tone[1])
        if not (freq > 0):
            raise ParameterError(f"tone frequency must be > 0, got {freq}")
        samples += amp * np.cos(2.0 * math.pi * freq * segment.time_grid())
    return Segment(
        samples=samples,
        sample_rate=segment.sample_rate,
        beat_times=list(segment.beat_times) if segment.beat_times is not None else None,
    )
