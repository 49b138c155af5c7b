"""Decompose a segment's spectrogram and render the pieces as PNGs."""

from pathlib import Path

import numpy as np

from heartspec import DEFAULT_CYCLE, hpss_decompose, stft_spectrogram, synthesize_segment
from heartspec.io import spectrogram_to_png

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

seg = synthesize_segment(DEFAULT_CYCLE)
spec = stft_spectrogram(seg)
print(f"spectrogram: {spec.n_frames} frames x {spec.n_bins} bins "
      f"({spec.frame_rate:g} fps, {spec.freq_resolution:g} Hz/bin)")

res = hpss_decompose(spec)
recon = res.harmonic.values + res.percussive.values
print(f"mask partition max deviation: {np.max(np.abs(res.mask_h + res.mask_p - 1)):.2e}")
print(f"reconstruction max abs error: {np.max(np.abs(recon - spec.values)):.2e}")

harm_share = res.harmonic.values.sum() / spec.values.sum()
print(f"energy split: harmonic {100 * harm_share:.1f}%, percussive {100 * (1 - harm_share):.1f}%")

for name, s in (("input", spec), ("harmonic", res.harmonic), ("percussive", res.percussive)):
    path = spectrogram_to_png(s, out / f"hpss_{name}.png")
    print(f"wrote {path}")
