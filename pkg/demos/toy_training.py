"""Overfit the small network on synthetic scenes and print the loss curve.

    python3 demos/toy_training.py [steps]

200 steps at 64x64 take about two minutes on one core.
"""

import sys

from tramba.network import TrambaConfig, synthetic_batch, train_toy

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 60
cfg = TrambaConfig(seed=0)
imgs, masks = synthetic_batch(4, cfg.input_size, seed=0)


def progress(step, value):
    if step % 10 == 0:
        print(f"step {step:4d}  loss {value:.4f}", flush=True)


trace = train_toy(cfg, imgs, masks, steps=steps, callback=progress)
print(f"final/initial = {trace[-1] / trace[0]:.3f}")
