"""Harmonic/percussive decomposition of magnitude spectrograms.

Median filtering along the time axis enhances structures that persist across
frames (harmonic); filtering along the frequency axis enhances structures
that are broadband within a frame (percussive). Soft Wiener masks built from
the two enhanced spectrograms split the original energy between the parts:

    Y_h[m, n] = median over time  of Y around frame m
    Y_p[m, n] = median over freq  of Y around bin n
    M_h = Y_h / (Y_h + Y_p),  M_p = Y_p / (Y_h + Y_p)   (0/0 cells -> 0.5 each)
    harmonic = M_h * Y,  percussive = M_p * Y
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import ParameterError
from .spectrogram import Spectrogram

DEFAULT_KERNEL_TIME = 17
DEFAULT_KERNEL_FREQ = 17

_AXES = {"time": 0, "frequency": 1}


def median_filter_axis(values: np.ndarray, k: int, axis: str = "time") -> np.ndarray:
    """Running median of a spectrogram matrix along one axis.

    Parameters
    ----------
    values : numpy.ndarray
        2-D array indexed ``[frame, bin]``.
    k : int
        Window length; odd and >= 1.
    axis : str
        ``"time"`` filters each bin's trajectory across frames (axis 0);
        ``"frequency"`` filters each frame across bins (axis 1).

    Returns
    -------
    numpy.ndarray
        Same shape as ``values``. Ends are mirror-padded without repeating
        the edge sample, so a row ``[1, 2, 100, 3, 4]`` with k=3 is treated
        as ``[2, 1, 2, 100, 3, 4, 3]``. ``k=1`` returns the input unchanged.
    """
    if axis not in _AXES:
        raise ParameterError(f"axis must be 'time' or 'frequency', got {axis!r}")
    if not (isinstance(k, int) and k >= 1 and k % 2 == 1):
        raise ParameterError(f"kernel length must be an odd int >= 1, got {k}")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ParameterError(f"values must be 2-D, got shape {values.shape}")
    if k == 1:
        return values.copy()
    ax = _AXES[axis]
    pad = k // 2
    if pad > values.shape[ax] - 1:
        raise ParameterError(
            f"kernel {k} too long to mirror-pad axis of length {values.shape[ax]}"
        )
    pad_width = [(0, 0), (0, 0)]
    pad_width[ax] = (pad, pad)
    padded = np.pad(values, pad_width, mode="reflect")
    windows = sliding_window_view(padded, k, axis=ax)  # (M, N, k)
    return np.median(windows, axis=-1)


@dataclass
class HpssResult:
    """Outputs of one harmonic/percussive decomposition.

    Attributes
    ----------
    harmonic, percussive : Spectrogram
        Masked components ``M_h * Y`` and ``M_p * Y``; they sum back to Y.
    mask_h, mask_p : numpy.ndarray
        Soft Wiener masks in [0, 1]; ``mask_h + mask_p == 1`` cellwise.
    enhanced_h, enhanced_p : numpy.ndarray
        The median-filtered intermediates the masks were built from.
    """

    harmonic: Spectrogram
    percussive: Spectrogram
    mask_h: np.ndarray
    mask_p: np.ndarray
    enhanced_h: np.ndarray
    enhanced_p: np.ndarray


def hpss_decompose(
    spec: Spectrogram,
    kernel_time: int = DEFAULT_KERNEL_TIME,
    kernel_freq: int = DEFAULT_KERNEL_FREQ,
) -> HpssResult:
    """Split a magnitude spectrogram into harmonic and percussive parts.

    Parameters
    ----------
    spec : Spectrogram
        Non-negative magnitudes (enforced by the type).
    kernel_time, kernel_freq : int
        Odd median-filter lengths along time and frequency.

    Returns
    -------
    HpssResult
        Masks sum to exactly 1 everywhere (cells where both enhanced values
        are 0 get 0.5/0.5), so harmonic + percussive reconstructs the input
        to rounding error.
    """
    y = spec.values
    enhanced_h = median_filter_axis(y, kernel_time, axis="time")
    enhanced_p = median_filter_axis(y, kernel_freq, axis="frequency")
    denom = enhanced_h + enhanced_p
    live = denom > 0
    mask_h = np.full(y.shape, 0.5, dtype=np.float64)
    mask_p = np.full(y.shape, 0.5, dtype=np.float64)
    np.divide(enhanced_h, denom, out=mask_h, where=live)
    np.divide(enhanced_p, denom, out=mask_p, where=live)
    return HpssResult(
        harmonic=spec.with_values(mask_h * y),
        percussive=spec.with_values(mask_p * y),
        mask_h=mask_h,
        mask_p=mask_p,
        enhanced_h=enhanced_h,
        enhanced_p=enhanced_p,
    )
