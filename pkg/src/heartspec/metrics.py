"""Evaluation metrics: RMSE, PCC, heartbeat timing error, missed-detection
rate, and the mean relative improvement summary.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
import math

import numpy as np

from .exceptions import DataError, ParameterError

DEFAULT_BEAT_TOLERANCE = 0.15  # seconds

METRIC_NAMES = ("rmse", "pcc", "heartbeat_error", "mdr")


@dataclass(frozen=True)
class MetricReport:
    """One method's scores on one evaluation set.

    heartbeat_error is in milliseconds and NaN when no beat was matched
    (undefined); mdr is the missed-detection fraction in [0, 1].
    """

    rmse: float
    pcc: float
    heartbeat_error: float
    mdr: float

    def __post_init__(self):
        if not (self.rmse >= 0):
            raise ParameterError(f"rmse must be >= 0, got {self.rmse}")
        if not (-1.0 - 1e-12 <= self.pcc <= 1.0 + 1e-12):
            raise ParameterError(f"pcc must be in [-1, 1], got {self.pcc}")
        if not math.isnan(self.heartbeat_error) and not (self.heartbeat_error >= 0):
            raise ParameterError(f"heartbeat_error must be >= 0 or NaN, got {self.heartbeat_error}")
        if not (0.0 <= self.mdr <= 1.0):
            raise ParameterError(f"mdr must be in [0, 1], got {self.mdr}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MetricDirections:
    """Improvement direction per metric: "lower" or "higher" is better."""

    rmse: str = "lower"
    pcc: str = "higher"
    heartbeat_error: str = "lower"
    mdr: str = "lower"

    def __post_init__(self):
        for name in METRIC_NAMES:
            d = getattr(self, name)
            if d not in ("lower", "higher"):
                raise ParameterError(f"direction for {name} must be 'lower' or 'higher', got {d!r}")


DEFAULT_DIRECTIONS = MetricDirections()


def rmse(estimate, truth) -> float:
    """Root-mean-square error between two equal-length signals.

    >>> rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    0.0
    """
    x = np.asarray(estimate, dtype=np.float64).ravel()
    y = np.asarray(truth, dtype=np.float64).ravel()
    if x.size != y.size:
        raise DataError(f"length mismatch: {x.size} vs {y.size}")
    if x.size == 0:
        raise DataError("rmse of empty signals is undefined")
    return float(np.sqrt(np.mean((x - y) ** 2)))


def pcc(estimate, truth) -> float:
    """Pearson correlation coefficient of two equal-length signals.

    Requires at least two samples and nonzero variance on both sides.
    """
    x = np.asarray(estimate, dtype=np.float64).ravel()
    y = np.asarray(truth, dtype=np.float64).ravel()
    if x.size != y.size:
        raise DataError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise DataError("pcc needs at least two samples")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise DataError("pcc undefined for a zero-variance signal")
    return float(np.clip((xc @ yc) / denom, -1.0, 1.0))


@dataclass
class BeatMatchResult:
    """Outcome of matching detected beats against ground truth.

    matches holds (truth_time, detected_time) pairs; heartbeat_error is the
    mean absolute timing error over matches in milliseconds (NaN when there
    are none); mdr = misses / len(truth).
    """

    matches: list[tuple[float, float]]
    misses: int
    heartbeat_error: float
    mdr: float


def match_beats(detected, truth, tol: float = DEFAULT_BEAT_TOLERANCE) -> BeatMatchResult:
    """One-to-one matching of detected beat times to ground-truth times.

    Walks truths in ascending order, pairing each with the earliest not-yet
    -matched detection within ``tol`` seconds. On this interval-compatibility
    structure the earliest-available rule is maximum-cardinality, so the
    missed-detection rate equals that of an optimal assignment; the mean
    timing error may differ from the assignment that also minimizes cost,
    but every matched pair is within ``tol``.

    Both lists must be ascending. ``truth`` must be non-empty (MDR is
    undefined otherwise); ``detected`` may be empty.
    """
    if not (tol >= 0):
        raise ParameterError(f"tol must be >= 0, got {tol}")
    det = [float(v) for v in detected]
    tru = [float(v) for v in truth]
    if any(b < a for a, b in zip(det, det[1:])):
        raise ParameterError("detected times must be ascending")
    if any(b < a for a, b in zip(tru, tru[1:])):
        raise ParameterError("truth times must be ascending")
    if not tru:
        raise DataError("truth beat list is empty; MDR undefined")
    matches: list[tuple[float, float]] = []
    j = 0
    for t in tru:
        # detections before t - tol can never match a later (larger) truth
        while j < len(det) and det[j] < t - tol:
            j += 1
        if j < len(det) and det[j] <= t + tol:
            matches.append((t, det[j]))
            j += 1
    misses = len(tru) - len(matches)
    if matches:
        he = 1000.0 * float(np.mean([abs(d - t) for t, d in matches]))
    else:
        he = float("nan")
    return BeatMatchResult(
        matches=matches,
        misses=misses,
        heartbeat_error=he,
        mdr=misses / len(tru),
    )


def delta_m(
    method: MetricReport,
    baseline: MetricReport,
    directions: MetricDirections = DEFAULT_DIRECTIONS,
) -> float:
    """Mean relative improvement of a method over a baseline, in percent.

    Each metric contributes its signed relative improvement: for
    lower-is-better metrics (baseline - method) / baseline, for
    higher-is-better (method - baseline) / baseline. The mean over the four
    metrics is scaled by 100. Baselines of zero (or NaN on either side)
    leave the ratio undefined and raise.
    """
    total = 0.0
    for name in METRIC_NAMES:
        m = getattr(method, name)
        b = getattr(baseline, name)
        if math.isnan(m) or math.isnan(b):
            raise DataError(f"{name} is NaN; improvement undefined")
        if b == 0.0:
            raise DataError(f"baseline {name} is zero; relative improvement undefined")
        if getattr(directions, name) == "lower":
            total += (b - m) / b
        else:
            total += (m - b) / b
    return 100.0 * total / len(METRIC_NAMES)


def evaluate_method(
    signal_estimate,
    signal_truth,
    beats_detected,
    beats_truth,
    tol: float = DEFAULT_BEAT_TOLERANCE,
) -> MetricReport:
    """Bundle the four metrics for one method into a MetricReport."""
    match = match_beats(beats_detected, beats_truth, tol)
    return MetricReport(
        rmse=rmse(signal_estimate, signal_truth),
        pcc=pcc(signal_estimate, signal_truth),
        heartbeat_error=match.heartbeat_error,
        mdr=match.mdr,
    )
