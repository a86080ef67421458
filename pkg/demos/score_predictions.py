"""Score a few degraded copies of one mask with the full metric suite."""

import numpy as np
from scipy.ndimage import gaussian_filter, shift

from tramba.dataset_tools import synth_scene
from tramba.metrics import SCORE_COLUMNS, evaluate

rng = np.random.default_rng(1)
_, gt = synth_scene(rng, (96, 96), large=True)
truth = gt.astype(float)

preds = {
    "perfect": truth,
    "blurred": gaussian_filter(truth, 3.0),
    "shifted": shift(truth, (4, -6), order=0),
    "noisy": np.clip(truth + rng.normal(0, 0.3, truth.shape), 0, 1),
    "inverted": 1 - truth,
}
print("pred      " + " ".join(f"{c:>10s}" for c in SCORE_COLUMNS))
for name, p in preds.items():
    s = evaluate(p, gt)
    print(f"{name:9s} " + " ".join(f"{getattr(s, c):10.4f}" for c in SCORE_COLUMNS))
