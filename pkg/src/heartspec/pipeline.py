"""Batch pipeline: synth (or ingest) -> split -> spectrogram -> hpss -> dtm
-> augment, with per-stage artifacts, a JSONL run log, and a deterministic
manifest (no timestamps, sorted keys, content hashes) so identical configs
produce byte-identical manifests.

Seed layout: dataset synthesis uses ``seed``; the split uses ``seed + 1``;
augmentation selection uses ``seed + 2``; per-segment fit/mask streams use
``(seed + 3) XOR segment_index`` so results do not depend on processing
order (or on the number of workers).
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import io as hio
from .augment import build_mask, augment_spectrogram, select_augmented, MaskSpec
from .config import RunConfig
from .dtm import dtm_fit, FittedTheta, IDENT_TOLERANCE
from .exceptions import DataError, ParameterError, PipelineError
from .hpss import hpss_decompose
from .signal_model import CycleParams, VibrationParams, Segment, add_noise, synthesize_segment
from .spectrogram import stft_spectrogram


def run_split(ids: list[str], fractions: tuple[float, float, float], seed: int) -> dict:
    """Deterministic disjoint train/val/test split covering all ids.

    Sizes follow largest-remainder rounding of the fractions, so a 100-item
    set at (0.8, 0.1, 0.1) gives exactly 80/10/10.
    """
    if len(set(ids)) != len(ids):
        raise DataError("ids must be unique")
    if not ids:
        raise DataError("ids must be non-empty")
    fracs = [float(f) for f in fractions]
    if len(fracs) != 3 or any(f < 0 for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
        raise ParameterError(f"fractions must be 3 non-negative values summing to 1, got {fractions}")
    n = len(ids)
    counts = [int(f * n) for f in fracs]
    remainders = [f * n - c for f, c in zip(fracs, counts)]
    for _ in range(n - sum(counts)):
        best = max(range(3), key=lambda i: (remainders[i], i))
        counts[best] += 1
        remainders[best] = -1.0
    perm = np.random.default_rng(seed).permutation(n)
    ordered = [ids[i] for i in perm]
    train = sorted(ordered[: counts[0]])
    val = sorted(ordered[counts[0] : counts[0] + counts[1]])
    test = sorted(ordered[counts[0] + counts[1] :])
    return {"train": train, "val": val, "test": test}


def run_synth_dataset(config: RunConfig, out_dir=None) -> dict:
    """Synthesize the benchmark dataset and write it under ``out_dir``.

    One cycle per segment with theta drawn uniformly inside the template
    bounds; noise is added when ``config.snr_db`` is finite. Returns the
    dataset manifest (also written as ``dataset_manifest.json``).
    """
    out = Path(out_dir if out_dir is not None else Path(config.out_dir) / "segments")
    out.mkdir(parents=True, exist_ok=True)
    cfg_dtm = config.dtm_config()
    t1_lo, t1_hi = cfg_dtm.resolved_t1_bounds(config.duration)
    d_lo, d_hi = cfg_dtm.resolved_delta_bounds()
    root = np.random.SeedSequence(config.seed)
    entries = []
    for i, seq in enumerate(root.spawn(config.n_segments)):
        rng = np.random.default_rng(seq)
        t1 = rng.uniform(t1_lo, t1_hi)
        delta = rng.uniform(d_lo, d_hi)
        f1 = rng.uniform(*cfg_dtm.f1_bounds)
        f2 = rng.uniform(*cfg_dtm.f2_bounds)
        cycle = CycleParams(
            VibrationParams(cfg_dtm.a1, f1, t1, cfg_dtm.b1),
            VibrationParams(cfg_dtm.a2, f2, t1 + delta, cfg_dtm.b2),
        )
        seg = synthesize_segment(cycle, config.fs, config.duration)
        if math.isfinite(config.snr_db):
            seg = add_noise(seg, config.snr_db, seed=int(seq.generate_state(1)[0]))
        seg_id = f"seg_{i:05d}"
        npy = hio.save_segment(out / seg_id, seg, cycle_params=[cycle])
        entries.append(
            {
                "id": seg_id,
                "file": npy.name,
                "sha256": hio.sha256_file(npy),
                "beat_times": seg.beat_times,
            }
        )
    manifest = {
        "n_segments": config.n_segments,
        "fs": config.fs,
        "duration": config.duration,
        "snr_db": config.snr_db,
        "seed": config.seed,
        "segments": entries,
    }
    hio.write_json(out / "dataset_manifest.json", manifest)
    return manifest


def _discover_segments(input_dir) -> list[Path]:
    root = Path(input_dir)
    if not root.is_dir():
        raise DataError(f"input directory not found: {root}")
    paths = sorted(root.glob("*.npy"))
    if not paths:
        raise DataError(f"no segment NPY files in {root}")
    return paths


def _theta_dict(theta: FittedTheta | None):
    return asdict(theta) if theta is not None else None


def _process_one(task: dict) -> dict:
    """Per-segment stage work: spectrogram, hpss, dtm, augment. Top-level so
    it can run in a worker process; everything it needs rides in ``task``."""
    config = RunConfig.from_mapping(task["config"])
    index = task["index"]
    seg_id = task["seg_id"]
    out_root = Path(task["out_root"])
    seg = hio.load_segment(task["path"], default_fs=config.fs)
    seg_seed = (config.seed + 3) ^ index

    spec = stft_spectrogram(
        seg, win_len=config.win_len, hop=config.hop, nfft=config.nfft, freq_max=config.freq_max
    )
    spec_npy = hio.save_spectrogram(out_root / "spectrograms" / seg_id, spec)

    hpss = hpss_decompose(spec, config.kernel_time, config.kernel_freq)
    hpss_dir = out_root / "hpss"
    written = {
        "spectrogram": str(spec_npy),
        "harmonic": str(hio.save_spectrogram(hpss_dir / f"{seg_id}_harmonic", hpss.harmonic)),
        "percussive": str(hio.save_spectrogram(hpss_dir / f"{seg_id}_percussive", hpss.percussive)),
    }
    for name, arr in (("mask_h", hpss.mask_h), ("mask_p", hpss.mask_p)):
        npy = hpss_dir / f"{seg_id}_{name}.npy"
        np.save(npy, np.ascontiguousarray(arr, dtype="<f4"))
        written[name] = str(npy)

    theta = dtm_fit(seg, config.dtm_config(), seed=seg_seed)
    hio.write_json(out_root / "dtm" / f"{seg_id}.json", _theta_dict(theta))
    written["dtm"] = str(out_root / "dtm" / f"{seg_id}.json")

    mask = None
    if task["selected"]:
        policy = config.aug_policy(seed=config.seed + 3)
        mask = build_mask(theta, spec, policy, np.random.default_rng(seg_seed))
    augmented = augment_spectrogram(spec, hpss, mask)
    written["augmented"] = str(hio.save_spectrogram(out_root / "augmented" / seg_id, augmented))

    # score against synthetic ground truth when the sidecar carries it
    truth = None
    meta = hio.load_segment_meta(task["path"])
    if meta.get("cycle_params"):
        c = meta["cycle_params"][0]
        truth = {
            "T1": c["v1"]["time_index"],
            "T2": c["v2"]["time_index"],
            "f1": c["v1"]["center_freq"],
            "f2": c["v2"]["center_freq"],
        }
    record = {
        "index": index,
        "seg_id": seg_id,
        "augmented": bool(task["selected"]),
        "mask": mask.to_dict() if mask is not None else None,
        "theta": _theta_dict(theta),
        "truth": truth,
        "files": written,
    }
    return record


@dataclass
class RunResult:
    """Where a pipeline run put its outputs."""

    out_dir: Path
    manifest_path: Path
    manifest: dict


class _RunLog:
    def __init__(self, path: Path):
        self.path = path
        self.path.write_text("")

    def event(self, name: str, **payload) -> None:
        entry = {"event": name, **payload}
        with open(self.path, "a") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def run_pipeline(config: RunConfig) -> RunResult:
    """Execute the full pipeline for one config. See module docstring for the
    stage and seed layout. Raises PipelineError with stage context on failure
    (after writing a status=failed manifest stub)."""
    out_root = Path(config.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    for sub in ("spectrograms", "hpss", "dtm", "augmented"):
        (out_root / sub).mkdir(exist_ok=True)
    log = _RunLog(out_root / "run_log.jsonl")
    manifest: dict = {"config": config.to_mapping(), "status": "running"}
    manifest_path = out_root / "manifest.json"

    def fail(stage: str, exc: Exception) -> PipelineError:
        manifest["status"] = "failed"
        manifest["failed_stage"] = stage
        manifest["error"] = str(exc)
        hio.write_json(manifest_path, manifest)
        log.event("stage_failed", stage=stage, error=str(exc))
        return PipelineError(stage, str(exc))

    # --- stage: synth / ingest ---------------------------------------------
    stage = "synth" if config.input_dir is None else "ingest"
    started = time.perf_counter()
    log.event("stage_start", stage=stage, seed=config.seed, n_segments=config.n_segments)
    try:
        if config.input_dir is None:
            seg_dir = out_root / "segments"
            dataset = run_synth_dataset(config, seg_dir)
            seg_paths = [seg_dir / e["file"] for e in dataset["segments"]]
        else:
            seg_paths = _discover_segments(config.input_dir)
            dataset = {
                "n_segments": len(seg_paths),
                "source": str(config.input_dir),
                "segments": [
                    {"id": p.stem, "file": p.name, "sha256": hio.sha256_file(p)}
                    for p in seg_paths
                ],
            }
    except PipelineError:
        raise
    except Exception as exc:
        raise fail(stage, exc) from exc
    ids = [p.stem for p in seg_paths]
    by_id = {p.stem: p for p in seg_paths}
    log.event("stage_end", stage=stage, n_segments=len(ids),
              elapsed_ms=round(1000 * (time.perf_counter() - started), 3))

    # --- stage: split -------------------------------------------------------
    started = time.perf_counter()
    log.event("stage_start", stage="split", seed=config.seed + 1)
    try:
        split = run_split(ids, (config.train_frac, config.val_frac, config.test_frac),
                          seed=config.seed + 1)
    except Exception as exc:
        raise fail("split", exc) from exc
    log.event("stage_end", stage="split", sizes={k: len(v) for k, v in split.items()},
              elapsed_ms=round(1000 * (time.perf_counter() - started), 3))

    # --- stage: process train segments ---------------------------------------
    started = time.perf_counter()
    train_ids = split["train"]
    index_of = {sid: i for i, sid in enumerate(ids)}
    selected_local = set(select_augmented(len(train_ids), config.proportion, config.seed + 2))
    log.event("stage_start", stage="process", n_train=len(train_ids),
              n_selected=len(selected_local), seed=config.seed + 2, workers=config.workers)
    tasks = [
        {
            "index": index_of[sid],
            "seg_id": sid,
            "path": str(by_id[sid]),
            "selected": local_i in selected_local,
            "out_root": str(out_root),
            "config": config.to_mapping(),
        }
        for local_i, sid in enumerate(train_ids)
    ]
    try:
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                records = list(pool.map(_process_one, tasks, chunksize=4))
        else:
            records = [_process_one(t) for t in tasks]
    except PipelineError:
        raise
    except Exception as exc:
        raise fail("process", exc) from exc
    log.event("stage_end", stage="process",
              elapsed_ms=round(1000 * (time.perf_counter() - started), 3))

    # --- stage: report --------------------------------------------------------
    try:
        csv_path = out_root / "dtm_results.csv"
        summary = _write_dtm_csv(csv_path, records)
        manifest.update(
            {
                "status": "ok",
                "dataset": dataset,
                "split": split,
                "augmentation": {
                    "selected": sorted(r["seg_id"] for r in records if r["augmented"]),
                    "records": [
                        {k: r[k] for k in ("seg_id", "augmented", "mask", "theta")}
                        for r in records
                    ],
                },
                "dtm_summary": summary,
                "outputs": {"dtm_results": csv_path.name},
            }
        )
        hashes = {}
        for rec in records:
            for _, path in sorted(rec["files"].items()):
                rel = str(Path(path).relative_to(out_root))
                hashes[rel] = hio.sha256_file(path)
        hashes[csv_path.name] = hio.sha256_file(csv_path)
        manifest["files_sha256"] = dict(sorted(hashes.items()))
        hio.write_json(manifest_path, manifest)
    except Exception as exc:
        raise fail("report", exc) from exc
    log.event("run_complete", manifest=str(manifest_path))
    return RunResult(out_dir=out_root, manifest_path=manifest_path, manifest=manifest)


def _write_dtm_csv(path: Path, records: list[dict]) -> dict:
    """Per-segment fit CSV plus aggregate rates for the manifest."""
    cols = [
        "seg_id", "T1", "T2", "f1", "f2", "residual_norm", "converged", "n_evals",
        "true_T1", "true_T2", "abs_err_T1", "abs_err_T2", "hit_v1", "hit_v2",
    ]
    n_conv = 0
    hits1 = hits2 = n_truth = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for r in sorted(records, key=lambda r: r["seg_id"]):
            th = r["theta"]
            n_conv += bool(th["converged"])
            row = [
                r["seg_id"],
                f"{th['T1']:.6f}", f"{th['T2']:.6f}", f"{th['f1']:.4f}", f"{th['f2']:.4f}",
                f"{th['residual_norm']:.6e}", int(th["converged"]), th["n_evals"],
            ]
            if r["truth"] is not None:
                e1 = abs(th["T1"] - r["truth"]["T1"])
                e2 = abs(th["T2"] - r["truth"]["T2"])
                h1, h2 = e1 <= IDENT_TOLERANCE, e2 <= IDENT_TOLERANCE
                n_truth += 1
                hits1 += h1
                hits2 += h2
                row += [
                    f"{r['truth']['T1']:.6f}", f"{r['truth']['T2']:.6f}",
                    f"{e1:.6f}", f"{e2:.6f}", int(h1), int(h2),
                ]
            else:
                row += ["", "", "", "", "", ""]
            writer.writerow(row)
    summary = {
        "n_segments": len(records),
        "converged_rate": (n_conv / len(records)) if records else 0.0,
    }
    if n_truth:
        summary["hit_rate_v1"] = hits1 / n_truth
        summary["hit_rate_v2"] = hits2 / n_truth
    return summary
