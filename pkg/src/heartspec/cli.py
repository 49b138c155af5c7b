"""Command-line interface.

Exit codes: 0 success, 1 usage or parameter error, 2 data or I/O error,
3 benchmark ran but no trial converged.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io as hio
from .augment import AugPolicy, augment_dataset
from .config import RunConfig, parse_config_text
from .dtm import DtmConfig, dtm_benchmark, dtm_fit, IDENT_TOLERANCE
from .exceptions import DataError, ParameterError, PipelineError
from .hpss import hpss_decompose
from .metrics import (
    DEFAULT_BEAT_TOLERANCE,
    MetricDirections,
    MetricReport,
    delta_m,
    evaluate_method,
)
from .pipeline import run_pipeline, run_split, run_synth_dataset
from .spectrogram import stft_spectrogram

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NO_CONVERGENCE = 3


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config_from_args(args) -> RunConfig:
    mapping = {}
    if getattr(args, "config", None):
        p = Path(args.config)
        if not p.exists():
            raise ParameterError(f"config file not found: {p}")
        mapping = parse_config_text(p.read_text())
    overrides = {
        "out_dir": getattr(args, "out", None),
        "n_segments": getattr(args, "n", None),
        "fs": getattr(args, "fs", None),
        "duration": getattr(args, "duration", None),
        "snr_db": getattr(args, "snr_db", None),
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "input_dir": getattr(args, "input_dir", None),
    }
    mapping.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_mapping(mapping)


def _cmd_synth(args) -> int:
    config = _config_from_args(args)
    manifest = run_synth_dataset(config, args.out)
    print(f"wrote {manifest['n_segments']} segments to {args.out}")
    return EXIT_OK


def _cmd_split(args) -> int:
    paths = sorted(Path(args.data).glob("*.npy"))
    if not Path(args.data).is_dir():
        raise DataError(f"data directory not found: {args.data}")
    if not paths:
        raise DataError(f"no segment NPY files in {args.data}")
    try:
        fracs = tuple(float(v) for v in args.fractions.split(","))
    except ValueError as exc:
        raise ParameterError(f"bad --fractions value {args.fractions!r}") from exc
    split = run_split([p.stem for p in paths], fracs, seed=args.seed)
    hio.write_json(args.out, split)
    print(
        f"split {len(paths)} segments -> "
        f"train {len(split['train'])}, val {len(split['val'])}, test {len(split['test'])}"
    )
    return EXIT_OK


def _cmd_spectrogram(args) -> int:
    seg = hio.load_segment(args.input, default_fs=args.fs)
    spec = stft_spectrogram(
        seg, win_len=args.win_len, hop=args.hop, nfft=args.nfft, freq_max=args.freq_max
    )
    out = hio.save_spectrogram(args.out, spec)
    if args.png:
        hio.spectrogram_to_png(spec, args.png)
    print(
        f"{out}: {spec.n_frames} frames x {spec.n_bins} bins, "
        f"{spec.frame_rate:g} fps, {spec.freq_resolution:g} Hz/bin"
    )
    return EXIT_OK


def _cmd_hpss(args) -> int:
    spec = hio.load_spectrogram(args.input, require_sidecar=False)
    result = hpss_decompose(spec, args.kernel_time, args.kernel_freq)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    hio.save_spectrogram(out_dir / f"{stem}_harmonic", result.harmonic)
    hio.save_spectrogram(out_dir / f"{stem}_percussive", result.percussive)
    for name, arr in (("mask_h", result.mask_h), ("mask_p", result.mask_p)):
        np.save(out_dir / f"{stem}_{name}.npy", np.ascontiguousarray(arr, dtype="<f4"))
    print(f"wrote harmonic/percussive/mask_h/mask_p for {stem} to {out_dir}")
    return EXIT_OK


def _cmd_dtm(args) -> int:
    seg = hio.load_segment(args.input, default_fs=args.fs)
    cfg = DtmConfig(tau=args.tau, n_starts=args.n_starts, max_iters=args.max_iters)
    fit = dtm_fit(seg, cfg, seed=args.seed)
    payload = asdict(fit)
    text = json.dumps(payload, sort_keys=True, indent=2)
    if args.out:
        hio.write_json(args.out, payload)
    print(text)
    return EXIT_OK


def _cmd_dtm_bench(args) -> int:
    try:
        grid = [float(v) for v in args.snr_grid.split(",") if v.strip()]
    except ValueError as exc:
        raise ParameterError(f"bad --snr-grid value {args.snr_grid!r}") from exc
    rows = dtm_benchmark(
        grid,
        n_trials=args.n_trials,
        seed=args.seed,
        sample_rate=args.fs,
        duration=args.duration,
        tol=args.tol,
    )
    cols = [
        "snr_db", "rate_v1", "rate_v2", "n_trials",
        "mean_abs_err_t1", "mean_abs_err_t2", "converged_rate",
    ]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow(
                [
                    row.snr_db,
                    f"{row.hit_rate_v1:.4f}", f"{row.hit_rate_v2:.4f}",
                    row.n_trials,
                    f"{row.mean_abs_err_t1:.6f}", f"{row.mean_abs_err_t2:.6f}",
                    f"{row.converged_rate:.4f}",
                ]
            )
    for row in rows:
        print(
            f"snr {row.snr_db:>6}: v1 {100 * row.hit_rate_v1:5.1f}%  "
            f"v2 {100 * row.hit_rate_v2:5.1f}%  ({row.n_trials} trials)"
        )
    if all(row.converged_rate == 0.0 for row in rows):
        print("no trial converged", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _cmd_augment(args) -> int:
    in_dir = Path(args.input_dir)
    paths = sorted(in_dir.glob("*.npy")) if in_dir.is_dir() else []
    if not in_dir.is_dir():
        raise DataError(f"input directory not found: {in_dir}")
    if not paths:
        raise DataError(f"no segment NPY files in {in_dir}")
    mapping = {}
    if args.config:
        p = Path(args.config)
        if not p.exists():
            raise ParameterError(f"config file not found: {p}")
        mapping = parse_config_text(p.read_text())
    config = RunConfig.from_mapping(mapping)
    seed = args.seed if args.seed is not None else config.seed
    policy = config.aug_policy(seed=seed)
    segments = [hio.load_segment(p, default_fs=config.fs) for p in paths]
    result = augment_dataset(
        segments,
        policy,
        stft_params={
            "win_len": config.win_len,
            "hop": config.hop,
            "nfft": config.nfft,
            "freq_max": config.freq_max,
        },
        kernel_time=config.kernel_time,
        kernel_freq=config.kernel_freq,
        dtm_config=config.dtm_config(),
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for path, spec, rec in zip(paths, result.spectrograms, result.records):
        hio.save_spectrogram(out_dir / path.stem, spec)
        records.append(
            {
                "segment_id": path.stem,
                "augmented": rec.augmented,
                "mask_spec": rec.mask.to_dict() if rec.mask else None,
                "theta": asdict(rec.theta) if rec.theta else None,
            }
        )
    hio.write_json(out_dir / "augment_manifest.json", {"seed": seed, "records": records})
    n_aug = sum(r["augmented"] for r in records)
    print(f"augmented {n_aug} of {len(records)} segments -> {out_dir}")
    return EXIT_OK


def _load_beats(path) -> list[float]:
    payload = hio.read_json(path)
    if isinstance(payload, dict):
        payload = payload.get("beat_times")
    if not isinstance(payload, list):
        raise DataError(f"{path}: expected a JSON list of beat times (or a 'beat_times' key)")
    return [float(v) for v in payload]


def _cmd_eval(args) -> int:
    if args.summarize:
        if not args.baseline or not args.method:
            raise ParameterError("--summarize needs --baseline and at least one --method")
        directions = MetricDirections()
        baseline = MetricReport(**hio.read_json(args.baseline))
        rows = []
        for m_path in args.method:
            report = MetricReport(**hio.read_json(m_path))
            rows.append((Path(m_path).stem, delta_m(report, baseline, directions)))
        if args.out:
            with open(args.out, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["method", "delta_m_pct"])
                for name, val in rows:
                    writer.writerow([name, f"{val:.4f}"])
        for name, val in rows:
            print(f"{name}: delta_m = {val:+.2f}%")
        return EXIT_OK
    needed = (args.estimate, args.truth, args.beats_detected, args.beats_truth)
    if any(v is None for v in needed):
        raise ParameterError(
            "eval needs --estimate, --truth, --beats-detected and --beats-truth "
            "(or --summarize with report files)"
        )
    est = np.load(args.estimate).astype(np.float64)
    tru = np.load(args.truth).astype(np.float64)
    report = evaluate_method(
        est, tru, _load_beats(args.beats_detected), _load_beats(args.beats_truth), tol=args.tol
    )
    payload = report.to_dict()
    if args.out:
        hio.write_json(args.out, payload)
    print(json.dumps(payload, sort_keys=True, indent=2))
    return EXIT_OK


def _cmd_run(args) -> int:
    config = RunConfig.from_file(args.config)
    overrides = {}
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        mapping = config.to_mapping()
        mapping.update(overrides)
        config = RunConfig.from_mapping(mapping)
    result = run_pipeline(config)
    summary = result.manifest.get("dtm_summary", {})
    print(f"run complete: {result.manifest_path}")
    if "hit_rate_v1" in summary:
        print(
            f"dtm hit rates: v1 {100 * summary['hit_rate_v1']:.1f}%, "
            f"v2 {100 * summary['hit_rate_v2']:.1f}%"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heartspec", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("synth", help="synthesize a benchmark segment dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--n", type=int, help="number of segments")
    p.add_argument("--fs", type=float, help="sampling rate in Hz")
    p.add_argument("--duration", type=float, help="segment length in seconds")
    p.add_argument("--snr-db", dest="snr_db", type=float, help="noise level (inf = clean)")
    p.add_argument("--seed", type=int, help="base seed")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("split", help="deterministic train/val/test split")
    p.add_argument("--data", required=True, help="directory of segment NPYs")
    p.add_argument("--out", required=True, help="output JSON path")
    p.add_argument("--fractions", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("spectrogram", help="STFT magnitude spectrogram of a segment")
    p.add_argument("input", help="segment NPY (sidecar supplies fs)")
    p.add_argument("--out", required=True, help="output NPY path")
    p.add_argument("--fs", type=float, default=None, help="sampling rate when no sidecar")
    p.add_argument("--win-len", dest="win_len", type=int, default=64)
    p.add_argument("--hop", type=int, default=4)
    p.add_argument("--nfft", type=int, default=256)
    p.add_argument("--freq-max", dest="freq_max", type=float, default=50.0)
    p.add_argument("--png", help="also render a grayscale PNG here")
    p.set_defaults(func=_cmd_spectrogram)

    p = sub.add_parser("hpss", help="harmonic/percussive decomposition of a spectrogram")
    p.add_argument("input", help="spectrogram NPY")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--kh", dest="kernel_time", type=int, default=17, help="time kernel length")
    p.add_argument("--kp", dest="kernel_freq", type=int, default=17, help="frequency kernel length")
    p.set_defaults(func=_cmd_hpss)

    p = sub.add_parser("dtm", help="fit the two-vibration template to a segment")
    p.add_argument("input", help="segment NPY")
    p.add_argument("--out", help="write the fitted parameters JSON here too")
    p.add_argument("--fs", type=float, default=None, help="sampling rate when no sidecar")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--n-starts", dest="n_starts", type=int, default=24)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=200)
    p.set_defaults(func=_cmd_dtm)

    p = sub.add_parser("dtm-bench", help="Monte-Carlo identification benchmark over SNR")
    p.add_argument("--snr-grid", dest="snr_grid", default="inf,10,0", help="comma-separated dB values")
    p.add_argument("--n-trials", dest="n_trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fs", type=float, default=200.0)
    p.add_argument("--duration", type=float, default=4.0)
    p.add_argument("--tol", type=float, default=IDENT_TOLERANCE)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_dtm_bench)

    p = sub.add_parser("augment", help="apply the augmentation policy to a segment directory")
    p.add_argument("--in", dest="input_dir", required=True, help="directory of segment NPYs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, default=None, help="override the policy seed")
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("eval", help="metric report for one method, or delta-m summary")
    p.add_argument("--estimate", help="estimated signal NPY")
    p.add_argument("--truth", help="ground-truth signal NPY")
    p.add_argument("--beats-detected", dest="beats_detected", help="detected beat times JSON")
    p.add_argument("--beats-truth", dest="beats_truth", help="true beat times JSON")
    p.add_argument("--tol", type=float, default=DEFAULT_BEAT_TOLERANCE)
    p.add_argument("--summarize", action="store_true", help="aggregate reports into delta-m")
    p.add_argument("--baseline", help="baseline MetricReport JSON (with --summarize)")
    p.add_argument("--method", action="append", help="method MetricReport JSON (repeatable)")
    p.add_argument("--out", help="output JSON (report) or CSV (summary)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("run", help="execute the full batch pipeline from a config file")
    p.add_argument("--config", required=True, help="key=value config file")
    p.add_argument("--out", help="override out_dir")
    p.add_argument("--seed", type=int, help="override seed")
    p.add_argument("--workers", type=int, help="override workers")
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help and usage errors
        code = exc.code
        return int(code) if code is not None else EXIT_OK
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main_entry() -> None:
    """Console-script entry point."""
    sys.exit(main())
