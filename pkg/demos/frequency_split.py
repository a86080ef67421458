"""Split a synthetic scene into low and high DCT bands and report band energy."""

import numpy as np

from tramba.dataset_tools import synth_scene
from tramba.freq import freq_split

rng = np.random.default_rng(0)
img, mask = synth_scene(rng, (64, 64), large=True)
x = img.transpose(2, 0, 1) / 255.0

total = float((x ** 2).sum())
for cutoff in (0.1, 0.25, 0.5, 0.75):
    lo, hi = freq_split(x, cutoff)
    print(f"cutoff {cutoff:4.2f}: low {float((lo ** 2).sum()) / total:6.1%} "
          f"high {float((hi ** 2).sum()) / total:6.1%} "
          f"reconstruction error {np.abs(lo + hi - x).max():.1e}")
