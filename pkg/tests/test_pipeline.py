import json

import numpy as np
import pytest

from heartspec import (
    DataError,
    ParameterError,
    PipelineError,
    RunConfig,
    run_pipeline,
    run_split,
    run_synth_dataset,
)
from heartspec.io import load_segment, load_spectrogram, read_json, sha256_file


def _config(tmp_path, **kw):
    base = dict(
        out_dir=str(tmp_path / "run"),
        n_segments=6,
        train_frac=0.5,
        val_frac=0.25,
        test_frac=0.25,
        proportion=0.5,
        seed=7,
    )
    base.update(kw)
    return RunConfig(**base)


def test_split_counts_largest_remainder():
    ids = [f"s{i:03d}" for i in range(100)]
    split = run_split(ids, (0.8, 0.1, 0.1), seed=0)
    assert len(split["train"]) == 80
    assert len(split["val"]) == 10
    assert len(split["test"]) == 10


def test_split_all_train():
    ids = ["a", "b", "c"]
    split = run_split(ids, (1.0, 0.0, 0.0), seed=0)
    assert sorted(split["train"]) == ids
    assert split["val"] == [] and split["test"] == []


def test_split_partition_property():
    ids = [f"s{i}" for i in range(37)]
    split = run_split(ids, (0.6, 0.2, 0.2), seed=5)
    combined = split["train"] + split["val"] + split["test"]
    assert sorted(combined) == sorted(ids)
    assert len(set(combined)) == len(ids)


def test_split_deterministic_and_seed_sensitive():
    ids = [f"s{i}" for i in range(20)]
    assert run_split(ids, (0.8, 0.1, 0.1), seed=3) == run_split(ids, (0.8, 0.1, 0.1), seed=3)
    assert run_split(ids, (0.8, 0.1, 0.1), seed=3) != run_split(ids, (0.8, 0.1, 0.1), seed=4)


def test_split_validation():
    with pytest.raises(DataError):
        run_split([], (0.8, 0.1, 0.1), seed=0)
    with pytest.raises(DataError):
        run_split(["a", "a"], (0.8, 0.1, 0.1), seed=0)
    with pytest.raises(ParameterError):
        run_split(["a", "b"], (0.8, 0.3, 0.1), seed=0)


def test_synth_dataset_files(tmp_path):
    cfg = RunConfig(out_dir=str(tmp_path), n_segments=10, seed=1)
    manifest = run_synth_dataset(cfg, tmp_path / "ds")
    npys = sorted((tmp_path / "ds").glob("seg_*.npy"))
    sidecars = sorted((tmp_path / "ds").glob("seg_*.json"))
    assert len(npys) == 10 and len(sidecars) == 10
    assert len(manifest["segments"]) == 10
    seg = load_segment(npys[0])
    assert seg.samples.shape == (800,)  # 4 s at 200 Hz
    assert seg.sample_rate == 200.0
    meta = read_json(sidecars[0])
    assert meta["cycle_params"]


def test_synth_dataset_manifest_byte_identical(tmp_path):
    cfg = RunConfig(out_dir=str(tmp_path), n_segments=5, seed=9)
    run_synth_dataset(cfg, tmp_path / "a")
    run_synth_dataset(cfg, tmp_path / "b")
    a = (tmp_path / "a" / "dataset_manifest.json").read_bytes()
    b = (tmp_path / "b" / "dataset_manifest.json").read_bytes()
    assert a == b


def test_synth_dataset_truth_within_bounds(tmp_path):
    cfg = RunConfig(out_dir=str(tmp_path), n_segments=8, seed=4)
    run_synth_dataset(cfg, tmp_path / "ds")
    dtm_cfg = cfg.dtm_config()
    t1_lo, t1_hi = dtm_cfg.resolved_t1_bounds(cfg.duration)
    d_lo, d_hi = dtm_cfg.resolved_delta_bounds()
    for sidecar in (tmp_path / "ds").glob("seg_*.json"):
        meta = read_json(sidecar)
        cyc = meta["cycle_params"][0]
        t1 = cyc["v1"]["time_index"]
        t2 = cyc["v2"]["time_index"]
        assert t1_lo <= t1 <= t1_hi
        assert d_lo <= t2 - t1 <= d_hi
        assert dtm_cfg.f1_bounds[0] <= cyc["v1"]["center_freq"] <= dtm_cfg.f1_bounds[1]
        assert dtm_cfg.f2_bounds[0] <= cyc["v2"]["center_freq"] <= dtm_cfg.f2_bounds[1]


def test_pipeline_end_to_end(tmp_path):
    cfg = _config(tmp_path)
    result = run_pipeline(cfg)
    manifest = result.manifest
    assert manifest["status"] == "ok"
    assert len(manifest["split"]["train"]) == 3
    assert len(manifest["augmentation"]["records"]) == 3
    assert len(manifest["augmentation"]["selected"]) == 1  # floor(0.5 * 3)
    assert manifest["files_sha256"]
    out = result.out_dir
    assert (out / "manifest.json").exists()
    assert (out / "dtm_results.csv").exists()
    assert (out / "run_log.jsonl").exists()
    # every hashed file exists and hashes to its manifest entry
    for rel, digest in manifest["files_sha256"].items():
        assert (out / rel).exists()
        assert sha256_file(out / rel) == digest
    # run log is line-oriented JSON
    for line in (out / "run_log.jsonl").read_text().splitlines():
        json.loads(line)


def test_pipeline_augmented_consistency(tmp_path):
    cfg = _config(tmp_path)
    result = run_pipeline(cfg)
    out = result.out_dir
    for rec in result.manifest["augmentation"]["records"]:
        seg_id = rec["seg_id"]
        aug = load_spectrogram(out / "augmented" / f"{seg_id}.npy")
        harm = load_spectrogram(out / "hpss" / f"{seg_id}_harmonic.npy")
        perc = load_spectrogram(out / "hpss" / f"{seg_id}_percussive.npy")
        if not rec["augmented"]:
            # unselected segments carry the plain recombination
            np.testing.assert_allclose(
                aug.values, harm.values + perc.values, rtol=1e-6, atol=1e-7
            )
        else:
            assert rec["mask"] is not None
            assert rec["theta"] is not None


def test_pipeline_rerun_same_config_identical_manifest(tmp_path):
    cfg = _config(tmp_path, n_segments=4, proportion=0.5)
    first = run_pipeline(cfg).manifest_path.read_bytes()
    second = run_pipeline(cfg).manifest_path.read_bytes()
    assert first == second


def test_pipeline_parallel_matches_serial(tmp_path):
    serial = run_pipeline(_config(tmp_path / "s", workers=1))
    parallel = run_pipeline(_config(tmp_path / "p", workers=2))
    assert serial.manifest["files_sha256"] == parallel.manifest["files_sha256"]
    assert serial.manifest["dtm_summary"] == parallel.manifest["dtm_summary"]


def test_pipeline_ingest_mode(tmp_path):
    src_cfg = RunConfig(out_dir=str(tmp_path), n_segments=4, seed=2)
    run_synth_dataset(src_cfg, tmp_path / "ds")
    cfg = _config(
        tmp_path,
        input_dir=str(tmp_path / "ds"),
        n_segments=4,
        train_frac=1.0,
        val_frac=0.0,
        test_frac=0.0,
    )
    result = run_pipeline(cfg)
    assert result.manifest["status"] == "ok"
    assert result.manifest["dataset"]["source"] == str(tmp_path / "ds")
    assert len(result.manifest["augmentation"]["records"]) == 4


def test_pipeline_missing_input_dir_fails(tmp_path):
    cfg = _config(tmp_path, input_dir=str(tmp_path / "missing"))
    with pytest.raises(PipelineError):
        run_pipeline(cfg)
    manifest = read_json(tmp_path / "run" / "manifest.json")
    assert manifest["status"] == "failed"
    assert manifest["failed_stage"] == "ingest"


def test_pipeline_dtm_csv_schema(tmp_path):
    result = run_pipeline(_config(tmp_path))
    lines = (result.out_dir / "dtm_results.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[:8] == [
        "seg_id",
        "T1",
        "T2",
        "f1",
        "f2",
        "residual_norm",
        "converged",
        "n_evals",
    ]
    assert len(lines) == 1 + len(result.manifest["split"]["train"])
    summary = result.manifest["dtm_summary"]
    assert 0.0 <= summary["hit_rate_v1"] <= 1.0
    assert 0.0 <= summary["hit_rate_v2"] <= 1.0
