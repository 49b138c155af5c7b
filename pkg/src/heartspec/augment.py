"""Zero-mask augmentation of harmonic/percussive spectrograms.

One augmented sample zeroes a band of the harmonic component around a chosen
vibration (in time, frequency, or both) and adds the untouched percussive
component back, so transient structure survives while the model is denied
part of the harmonic evidence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, asdict

import numpy as np

from .exceptions import DataError, ParameterError
from .spectrogram import Spectrogram, stft_spectrogram
from .hpss import HpssResult, hpss_decompose
from .dtm import DtmConfig, FittedTheta, dtm_fit
from .signal_model import Segment

logger = logging.getLogger(__name__)

DOMAINS = ("time", "frequency", "both")
PLACEMENTS = ("dtm", "random")

DEFAULT_W_T = 24
DEFAULT_W_F = 12


@dataclass(frozen=True)
class AugPolicy:
    """Dataset-level augmentation policy.

    proportion: fraction of segments to augment (floor(p * N) selected).
    domain: which band(s) each mask zeroes ("time" | "frequency" | "both").
    placement: "dtm" centers masks on a fitted vibration, "random" anywhere.
    seed: base seed; per-segment streams derive from seed XOR segment index.
    w_t, w_f: band widths in frames / bins.
    """

    proportion: float = 0.2
    domain: str = "both"
    placement: str = "dtm"
    seed: int = 0
    w_t: int = DEFAULT_W_T
    w_f: int = DEFAULT_W_F

    def __post_init__(self):
        if not (0.0 <= self.proportion <= 1.0):
            raise ParameterError(f"proportion must be in [0, 1], got {self.proportion}")
        if self.domain not in DOMAINS:
            raise ParameterError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        if self.placement not in PLACEMENTS:
            raise ParameterError(f"placement must be one of {PLACEMENTS}, got {self.placement!r}")
        if not (isinstance(self.w_t, int) and self.w_t >= 1):
            raise ParameterError(f"w_t must be an int >= 1, got {self.w_t}")
        if not (isinstance(self.w_f, int) and self.w_f >= 1):
            raise ParameterError(f"w_f must be an int >= 1, got {self.w_f}")


@dataclass(frozen=True)
class MaskSpec:
    """One concrete zero mask. Only the fields implied by ``domain`` are set:
    time -> (center_frame, w_t); frequency -> (center_bin, w_f); both -> all."""

    domain: str
    placement: str
    target_vibration: str
    center_frame: int | None = None
    center_bin: int | None = None
    w_t: int | None = None
    w_f: int | None = None

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ParameterError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        if self.placement not in PLACEMENTS:
            raise ParameterError(f"placement must be one of {PLACEMENTS}, got {self.placement!r}")
        if self.target_vibration not in ("v1", "v2"):
            raise ParameterError(f"target_vibration must be 'v1' or 'v2', got {self.target_vibration!r}")
        need_time = self.domain in ("time", "both")
        need_freq = self.domain in ("frequency", "both")
        if need_time != (self.center_frame is not None) or need_time != (self.w_t is not None):
            raise ParameterError(f"domain {self.domain!r}: center_frame/w_t population mismatch")
        if need_freq != (self.center_bin is not None) or need_freq != (self.w_f is not None):
            raise ParameterError(f"domain {self.domain!r}: center_bin/w_f population mismatch")
        if self.w_t is not None and self.w_t < 1:
            raise ParameterError(f"w_t must be >= 1, got {self.w_t}")
        if self.w_f is not None and self.w_f < 1:
            raise ParameterError(f"w_f must be >= 1, got {self.w_f}")

    def to_dict(self) -> dict:
        return asdict(self)


def mask_band(center: int, width: int, size: int) -> tuple[int, int]:
    """Inclusive [lo, hi] band of ``width`` cells around ``center``, clipped
    to [0, size). A width-w band spans center - w//2 .. center + (w - w//2) - 1."""
    if not (0 <= center < size):
        raise ParameterError(f"band center {center} outside [0, {size})")
    if width < 1:
        raise ParameterError(f"band width must be >= 1, got {width}")
    lo = max(0, center - width // 2)
    hi = min(size - 1, center + (width - width // 2) - 1)
    return lo, hi


def mask_bands(mask: MaskSpec, shape: tuple[int, int]):
    """The concrete (time_band, freq_band) a mask zeroes on a (M, N) grid;
    either entry is None when the domain leaves that axis untouched."""
    m, n = shape
    time_band = freq_band = None
    if mask.domain in ("time", "both"):
        time_band = mask_band(mask.center_frame, mask.w_t, m)
    if mask.domain in ("frequency", "both"):
        freq_band = mask_band(mask.center_bin, mask.w_f, n)
    return time_band, freq_band


def build_mask(
    theta: FittedTheta | None,
    spec: Spectrogram,
    policy: AugPolicy,
    rng: np.random.Generator,
) -> MaskSpec:
    """Draw one MaskSpec for a spectrogram.

    Picks the target vibration uniformly; "dtm" placement centers the bands
    on the fitted vibration (falling back to random placement when no
    converged fit is available), "random" draws centers uniformly.
    Deterministic for a given generator state.
    """
    placement = policy.placement
    if placement == "dtm" and (theta is None or not theta.converged):
        logger.info("no converged template fit; falling back to random mask placement")
        placement = "random"
    target = "v1" if int(rng.integers(2)) == 0 else "v2"
    need_time = policy.domain in ("time", "both")
    need_freq = policy.domain in ("frequency", "both")
    center_frame = center_bin = None
    if placement == "dtm":
        t_c = theta.T1 if target == "v1" else theta.T2
        f_c = theta.f1 if target == "v1" else theta.f2
        if need_time:
            m = round((t_c - spec.origin_time) * spec.frame_rate)
            center_frame = int(min(max(m, 0), spec.n_frames - 1))
        if need_freq:
            n = round((f_c - spec.origin_freq) / spec.freq_resolution)
            center_bin = int(min(max(n, 0), spec.n_bins - 1))
    else:
        if need_time:
            center_frame = int(rng.integers(0, spec.n_frames))
        if need_freq:
            center_bin = int(rng.integers(0, spec.n_bins))
    return MaskSpec(
        domain=policy.domain,
        placement=placement,
        target_vibration=target,
        center_frame=center_frame,
        center_bin=center_bin,
        w_t=policy.w_t if need_time else None,
        w_f=policy.w_f if need_freq else None,
    )


def augment_spectrogram(
    spec: Spectrogram,
    hpss: HpssResult,
    mask: MaskSpec | None,
) -> Spectrogram:
    """Zero the mask bands of the harmonic part and add the percussive part.

    ``hpss`` must be the decomposition of ``spec``. A mask of None is the
    degenerate empty mask: the output is the plain harmonic + percussive
    recombination, equal to ``spec`` up to rounding.
    """
    if hpss.harmonic.values.shape != spec.values.shape:
        raise DataError(
            f"hpss shape {hpss.harmonic.values.shape} does not match spectrogram {spec.values.shape}"
        )
    harm = hpss.harmonic.values.copy()
    if mask is not None:
        time_band, freq_band = mask_bands(mask, harm.shape)
        if time_band is not None:
            harm[time_band[0] : time_band[1] + 1, :] = 0.0
        if freq_band is not None:
            harm[:, freq_band[0] : freq_band[1] + 1] = 0.0
    return spec.with_values(harm + hpss.percussive.values)


@dataclass
class AugmentRecord:
    """Provenance of one dataset entry."""

    segment_index: int
    augmented: bool
    mask: MaskSpec | None
    theta: FittedTheta | None


@dataclass
class DatasetAugmentation:
    """Augmented spectrograms plus one provenance record per input segment."""

    spectrograms: list[Spectrogram]
    records: list[AugmentRecord]


def select_augmented(n_segments: int, proportion: float, seed: int) -> list[int]:
    """The sorted floor(p * N)-element subset augmentation applies to."""
    if n_segments < 1:
        raise DataError("need at least one segment")
    n_aug = int(proportion * n_segments)
    rng = np.random.default_rng(seed)
    picked = rng.choice(n_segments, size=n_aug, replace=False)
    return sorted(int(i) for i in picked)


def augment_dataset(
    segments: list[Segment],
    policy: AugPolicy,
    stft_params: dict | None = None,
    kernel_time: int = 17,
    kernel_freq: int = 17,
    dtm_config: DtmConfig | None = None,
) -> DatasetAugmentation:
    """Apply the policy across a dataset of segments.

    Every segment is transformed to a spectrogram and HPSS-recombined;
    selected segments additionally get one zero mask (fitting the template
    first when placement is "dtm"). Per-segment seeds are policy.seed XOR
    the segment index, so results are independent of processing order.
    """
    if not segments:
        raise DataError("segments must be non-empty")
    stft_params = dict(stft_params or {})
    selected = set(select_augmented(len(segments), policy.proportion, policy.seed))
    spectrograms: list[Spectrogram] = []
    records: list[AugmentRecord] = []
    for i, seg in enumerate(segments):
        spec = stft_spectrogram(seg, **stft_params)
        hpss = hpss_decompose(spec, kernel_time, kernel_freq)
        if i in selected:
            seg_seed = policy.seed ^ i
            theta = None
            if policy.placement == "dtm":
                theta = dtm_fit(seg, dtm_config, seed=seg_seed)
            mask = build_mask(theta, spec, policy, np.random.default_rng(seg_seed))
            spectrograms.append(augment_spectrogram(spec, hpss, mask))
            records.append(AugmentRecord(i, True, mask, theta))
        else:
            spectrograms.append(augment_spectrogram(spec, hpss, None))
            records.append(AugmentRecord(i, False, None, None))
    return DatasetAugmentation(spectrograms=spectrograms, records=records)
