"""On-disk formats: little-endian float32 NPY arrays with JSON sidecars.

A segment ``seg.npy`` is accompanied by ``seg.json`` holding ``fs``,
``duration``, ``beat_times``, and optionally ``cycle_params``; a spectrogram
sidecar holds ``frame_rate``, ``freq_resolution``, ``origin_time``,
``origin_freq``. Sidecar JSON is written with sorted keys so byte content is
deterministic. Arrays are stored float32; computation stays float64.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import DataError
from .signal_model import CycleParams, Segment, VibrationParams
from .spectrogram import Spectrogram


def _npy_and_sidecar(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix != ".npy":
        p = p.with_suffix(".npy")
    return p, p.with_suffix(".json")


def write_json(path, payload: dict) -> None:
    """Write a JSON file with sorted keys and a trailing newline."""
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def read_json(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise DataError(f"missing JSON file: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON in {p}: {exc}") from exc


def _save_f32(path: Path, values: np.ndarray) -> None:
    np.save(path, np.ascontiguousarray(values, dtype="<f4"))


def cycles_to_jsonable(cycles: list[CycleParams]) -> list[dict]:
    return [{"v1": asdict(c.v1), "v2": asdict(c.v2)} for c in cycles]


def cycles_from_jsonable(raw: list[dict]) -> list[CycleParams]:
    return [
        CycleParams(VibrationParams(**entry["v1"]), VibrationParams(**entry["v2"]))
        for entry in raw
    ]


def save_segment(path, segment: Segment, cycle_params: list[CycleParams] | None = None) -> Path:
    """Write ``<path>.npy`` (float32) plus its ``.json`` sidecar; returns the NPY path."""
    npy, sidecar = _npy_and_sidecar(path)
    _save_f32(npy, segment.samples)
    meta = {
        "fs": segment.sample_rate,
        "duration": segment.duration,
        "beat_times": segment.beat_times if segment.beat_times is not None else [],
    }
    if cycle_params is not None:
        meta["cycle_params"] = cycles_to_jsonable(cycle_params)
    write_json(sidecar, meta)
    return npy


def load_segment(path, default_fs: float | None = None) -> Segment:
    """Read a segment NPY and its sidecar.

    Without a sidecar the sampling rate is unknown; ``default_fs`` fills in,
    otherwise this raises.
    """
    npy, sidecar = _npy_and_sidecar(path)
    if not npy.exists():
        raise DataError(f"missing segment file: {npy}")
    samples = np.load(npy).astype(np.float64)
    if sidecar.exists():
        meta = read_json(sidecar)
        fs = float(meta.get("fs", default_fs or 0))
        beat_times = meta.get("beat_times") or None
    else:
        if default_fs is None:
            raise DataError(f"no sidecar for {npy} and no default sampling rate given")
        fs, beat_times = default_fs, None
    return Segment(samples=samples, sample_rate=fs, beat_times=beat_times)


def load_segment_meta(path) -> dict:
    """The raw sidecar mapping for a segment path ({} when absent)."""
    _, sidecar = _npy_and_sidecar(path)
    return read_json(sidecar) if sidecar.exists() else {}


def save_spectrogram(path, spec: Spectrogram) -> Path:
    """Write ``<path>.npy`` (float32, shape M x N) plus calibration sidecar."""
    npy, sidecar = _npy_and_sidecar(path)
    _save_f32(npy, spec.values)
    write_json(
        sidecar,
        {
            "frame_rate": spec.frame_rate,
            "freq_resolution": spec.freq_resolution,
            "origin_time": spec.origin_time,
            "origin_freq": spec.origin_freq,
        },
    )
    return npy


def load_spectrogram(path, require_sidecar: bool = True) -> Spectrogram:
    """Read a spectrogram NPY and its calibration sidecar.

    With ``require_sidecar=False`` a missing sidecar falls back to unit
    calibration (frame_rate 1, resolution 1), which leaves masks and
    decompositions unaffected.
    """
    npy, sidecar = _npy_and_sidecar(path)
    if not npy.exists():
        raise DataError(f"missing spectrogram file: {npy}")
    values = np.load(npy).astype(np.float64)
    if sidecar.exists():
        meta = read_json(sidecar)
        return Spectrogram(
            values=values,
            frame_rate=float(meta["frame_rate"]),
            freq_resolution=float(meta["freq_resolution"]),
            origin_time=float(meta.get("origin_time", 0.0)),
            origin_freq=float(meta.get("origin_freq", 0.0)),
        )
    if require_sidecar:
        raise DataError(f"no calibration sidecar for {npy}")
    return Spectrogram(values=values, frame_rate=1.0, freq_resolution=1.0)


def spectrogram_to_png(spec: Spectrogram, path) -> Path:
    """Render a grayscale PNG (time left-to-right, low frequencies at the bottom)."""
    vals = spec.values
    peak = float(vals.max())
    scaled = vals / peak if peak > 0 else vals
    img = (255.0 * scaled.T[::-1, :]).astype(np.uint8)
    p = Path(path)
    Image.fromarray(img, mode="L").save(p)
    return p


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
