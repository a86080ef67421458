"""Deep-supervised BCE + IoU loss, finite-difference gradient checking, and a
small full-batch trainer for overfitting synthetic scenes."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .config import TrambaConfig
from .model import Tramba

log = logging.getLogger(__name__)

__all__ = [
    "downsample_mask",
    "loss",
    "stage_losses",
    "GradcheckReport",
    "gradcheck_fn",
    "gradcheck",
    "TrainingDiverged",
    "train_toy",
    "synthetic_batch",
]

IOU_SMOOTH = 1.0


def downsample_mask(gt: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbour resample of (B, H, W) masks to an integer-factor size."""
    _, h, w = gt.shape
    fh, fw = h // size[0], w // size[1]
    if fh * size[0] != h or fw * size[1] != w:
        raise ValueError(f"cannot resample {(h, w)} to {size} by an integer factor")
    return gt[:, ::fh, ::fw]


def _check_gt(gt) -> np.ndarray:
    gt = np.asarray(gt, dtype=np.float64)
    if gt.ndim == 4 and gt.shape[1] == 1:
        gt = gt[:, 0]
    if gt.ndim != 3:
        raise ValueError(f"ground truth must be (B, H, W), got {gt.shape}")
    if not np.isin(gt, (0.0, 1.0)).all():
        raise ValueError("ground truth must be binary (0/1)")
    return gt


def stage_losses(logits: list[Tensor], gt) -> list[Tensor]:
    """BCE + (1 - soft IoU) for each (B, h, w, 1) logit map against resampled gt."""
    gt = _check_gt(gt)
    out = []
    for z in logits:
        g = downsample_mask(gt, z.shape[1:3])[..., None]
        p = ag.sigmoid(z)
        inter = (p * g).sum(axis=(1, 2, 3))
        union = (p + g - p * g).sum(axis=(1, 2, 3))
        iou = (inter + IOU_SMOOTH) / (union + IOU_SMOOTH)
        out.append(ag.bce_with_logits(z, g) + (1.0 - iou).mean())
    return out


def loss(logits: list[Tensor], gt) -> Tensor:
    """Equal-weight sum of the per-stage BCE + IoU losses."""
    terms = stage_losses(logits, gt)
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


# ----------------------------------------------------------------------------
# gradient checking


@dataclass
class GradcheckReport:
    errors: dict[str, float] = field(default_factory=dict)
    analytic: dict[str, float] = field(default_factory=dict)
    numeric: dict[str, float] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    def worst(self) -> tuple[str, float]:
        name = max(self.errors, key=self.errors.get)
        return name, self.errors[name]

    def lines(self) -> list[str]:
        return [f"{k}\t{self.analytic[k]:.6e}\t{self.numeric[k]:.6e}\t{v:.3e}" for k, v in self.errors.items()]


def gradcheck_fn(loss_fn: Callable[[], Tensor], params: dict[str, Tensor], rng=None,
                 eps: float = 1e-5, floor: float = 1e-12) -> GradcheckReport:
    """Compare analytic directional derivatives with central differences.

    Each parameter group gets one random direction ``v`` with standard-normal
    entries, so every coordinate moves by about ``eps``. The error is
    ``|fd - g.v| / max(|fd|, |g.v|, floor)``.
    """
    rng = np.random.default_rng(rng)
    for p in params.values():
        p.zero_grad()
    loss_fn().backward()
    report = GradcheckReport()
    for name, p in params.items():
        v = rng.normal(size=p.shape)
        g = p.grad if p.grad is not None else np.zeros(p.shape)
        an = float((g * v).sum())
        base = p.data.copy()
        p.data = base + eps * v
        lp = float(loss_fn().data)
        p.data = base - eps * v
        lm = float(loss_fn().data)
        p.data = base
        fd = (lp - lm) / (2 * eps)
        report.analytic[name] = an
        report.numeric[name] = fd
        report.errors[name] = abs(fd - an) / max(abs(fd), abs(an), floor)
    return report


def synthetic_batch(n: int, size: tuple[int, int], seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """(N, 3, H, W) images in [0, 1] and (N, H, W) binary masks."""
    from ..dataset_tools import synth_scene

    rng = np.random.default_rng(seed)
    imgs, masks = [], []
    for _ in range(n):
        img, mask = synth_scene(rng, size)
        imgs.append(img.transpose(2, 0, 1) / 255.0)
        masks.append(mask.astype(np.float64))
    return np.stack(imgs), np.stack(masks)


def gradcheck(config: TrambaConfig | None = None, seed: int = 0, batch: int = 1,
              eps: float = 1e-5) -> GradcheckReport:
    """Finite-difference check of every parameter group of a freshly built model."""
    config = config or TrambaConfig(input_size=(32, 32), base_channels=8)
    model = Tramba(config.replace(seed=seed))
    imgs, masks = synthetic_batch(batch, config.input_size, seed)
    return gradcheck_fn(lambda: loss(model.logits(imgs), masks), model.parameters(), rng=seed, eps=eps)


# ----------------------------------------------------------------------------
# training


class TrainingDiverged(RuntimeError):
    pass


def train_toy(config: TrambaConfig, images, masks, steps: int = 200, lr: float = 0.1,
              model: Tramba | None = None, optimizer: str = "gd", clip: float | None = 1.0,
              betas: tuple[float, float] = (0.9, 0.999),
              callback: Callable[[int, float], None] | None = None) -> list[float]:
    """Full-batch descent on a small batch; returns the loss before each step.

    ``optimizer`` is ``"gd"`` (fixed step) or ``"adam"``. ``clip`` rescales the
    global gradient norm down to at most that value before the update.
    """
    if optimizer not in ("gd", "adam"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    model = model or Tramba(config)
    params = list(model.parameters().items())
    m1 = {name: np.zeros(p.shape) for name, p in params}
    m2 = {name: np.zeros(p.shape) for name, p in params}
    images = np.asarray(images, dtype=np.float64)
    trace: list[float] = []
    for step in range(steps):
        for _, p in params:
            p.zero_grad()
        total = loss(model.logits(images), masks)
        value = float(total.data)
        if not math.isfinite(value):
            raise TrainingDiverged(f"loss became {value} at step {step} (lr={lr})")
        trace.append(value)
        if callback:
            callback(step, value)
        if lr == 0.0:
            continue
        total.backward()
        grads = {name: (p.grad if p.grad is not None else np.zeros(p.shape)) for name, p in params}
        if clip is not None:
            norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
            if norm > clip:
                grads = {k: g * (clip / norm) for k, g in grads.items()}
        for name, p in params:
            g = grads[name]
            if optimizer == "adam":
                b1, b2 = betas
                m1[name] = b1 * m1[name] + (1 - b1) * g
                m2[name] = b2 * m2[name] + (1 - b2) * g * g
                mhat = m1[name] / (1 - b1 ** (step + 1))
                vhat = m2[name] / (1 - b2 ** (step + 1))
                p.data = p.data - lr * mhat / (np.sqrt(vhat) + 1e-8)
            else:
                p.data = p.data - lr * g
        log.debug("step %d loss %.6f", step, value)
    return trace
