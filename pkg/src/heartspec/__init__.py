"""Spectrogram-domain augmentation for radar cardiac monitoring.

The pipeline: synthesize (or ingest) displacement segments, transform them to
magnitude spectrograms, split each into harmonic and percussive parts, locate
the two per-cycle vibrations by constrained template matching, and zero
targeted bands of the harmonic part before recombining.
"""

from .exceptions import DataError, HeartspecError, ParameterError, PipelineError
from .signal_model import (
    DEFAULT_CYCLE,
    DEFAULT_V1,
    DEFAULT_V2,
    MAX_VIBRATION_SPACING,
    CycleParams,
    Segment,
    VibrationParams,
    add_noise,
    synthesize_segment,
    synthesize_vibration,
)
from .spectrogram import Spectrogram, stft_spectrogram
from .hpss import HpssResult, hpss_decompose, median_filter_axis
from .dtm import (
    IDENT_TOLERANCE,
    BenchmarkRow,
    DtmConfig,
    FittedTheta,
    dtm_benchmark,
    dtm_fit,
    dtm_residual,
)
from .augment import (
    AugPolicy,
    AugmentRecord,
    DatasetAugmentation,
    MaskSpec,
    augment_dataset,
    augment_spectrogram,
    build_mask,
    mask_band,
    mask_bands,
    select_augmented,
)
from .metrics import (
    DEFAULT_BEAT_TOLERANCE,
    DEFAULT_DIRECTIONS,
    BeatMatchResult,
    MetricDirections,
    MetricReport,
    delta_m,
    evaluate_method,
    match_beats,
    pcc,
    rmse,
)
from .config import RunConfig, parse_config_text
from .pipeline import RunResult, run_pipeline, run_split, run_synth_dataset

__version__ = "0.1.0"

__all__ = [
    "AugPolicy",
    "AugmentRecord",
    "BeatMatchResult",
    "BenchmarkRow",
    "CycleParams",
    "DEFAULT_BEAT_TOLERANCE",
    "DEFAULT_CYCLE",
    "DEFAULT_DIRECTIONS",
    "DEFAULT_V1",
    "DEFAULT_V2",
    "DataError",
    "DatasetAugmentation",
    "DtmConfig",
    "FittedTheta",
    "HeartspecError",
    "HpssResult",
    "IDENT_TOLERANCE",
    "MAX_VIBRATION_SPACING",
    "MaskSpec",
    "MetricDirections",
    "MetricReport",
    "ParameterError",
    "PipelineError",
    "RunConfig",
    "RunResult",
    "Segment",
    "Spectrogram",
    "VibrationParams",
    "add_noise",
    "augment_dataset",
    "augment_spectrogram",
    "build_mask",
    "delta_m",
    "dtm_benchmark",
    "dtm_fit",
    "dtm_residual",
    "evaluate_method",
    "hpss_decompose",
    "mask_band",
    "mask_bands",
    "match_beats",
    "median_filter_axis",
    "parse_config_text",
    "pcc",
    "rmse",
    "run_pipeline",
    "run_split",
    "run_synth_dataset",
    "select_augmented",
    "stft_spectrogram",
    "synthesize_segment",
    "synthesize_vibration",
]
