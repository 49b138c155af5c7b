"""Apply the zero-mask augmentation policy to a small synthetic dataset."""

from pathlib import Path

import numpy as np

from heartspec import (
    AugPolicy,
    DEFAULT_CYCLE,
    CycleParams,
    VibrationParams,
    augment_dataset,
    mask_bands,
    synthesize_segment,
)
from heartspec.io import spectrogram_to_png

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

rng = np.random.default_rng(0)
segments = []
for _ in range(10):
    t1 = rng.uniform(0.3, 3.0)
    cyc = CycleParams(
        VibrationParams(0.5, rng.uniform(8, 14), t1, 0.05),
        VibrationParams(0.1, rng.uniform(18, 28), t1 + rng.uniform(0.3, 0.45), 0.03),
    )
    segments.append(synthesize_segment(cyc))

policy = AugPolicy(proportion=0.3, domain="both", placement="dtm", seed=42)
result = augment_dataset(segments, policy)

for i, rec in enumerate(result.records):
    if not rec.augmented:
        continue
    bands = mask_bands(rec.mask, result.spectrograms[i].values.shape)
    print(f"segment {i}: masked {rec.mask.target_vibration} "
          f"(T fitted at {rec.theta.T1 if rec.mask.target_vibration == 'v1' else rec.theta.T2:.3f} s), "
          f"time band {bands[0]}, freq band {bands[1]}")

n_aug = sum(r.augmented for r in result.records)
print(f"{n_aug} of {len(segments)} segments augmented (proportion 0.3)")

first_aug = next(i for i, r in enumerate(result.records) if r.augmented)
path = spectrogram_to_png(result.spectrograms[first_aug], out / "augmented_example.png")
print(f"wrote {path}")
