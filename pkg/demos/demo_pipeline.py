"""Run the batch pipeline end to end on a small synthetic dataset."""

import json
from pathlib import Path

from heartspec import RunConfig, run_pipeline

out = Path(__file__).parent / "output" / "pipeline_run"

config = RunConfig(
    out_dir=str(out),
    n_segments=12,
    train_frac=0.5,
    val_frac=0.25,
    test_frac=0.25,
    proportion=0.4,
    seed=7,
)
result = run_pipeline(config)
manifest = result.manifest

print(f"status: {manifest['status']}")
sizes = {k: len(v) for k, v in manifest["split"].items()}
print(f"split sizes: {sizes}")
print(f"augmented: {manifest['augmentation']['selected']}")
print(f"dtm summary: {json.dumps(manifest['dtm_summary'], sort_keys=True)}")
print(f"{len(manifest['files_sha256'])} hashed artifacts under {result.out_dir}")
print(f"manifest: {result.manifest_path}")
