"""The Tramba encoder-decoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .config import TrambaConfig
from .layers import DFVSS, Linear, Module, PatchEmbed, PatchMerge, VSSBlock, upsample

__all__ = ["Tramba", "StageOutputs", "forward"]


@dataclass
class StageOutputs:
    """Intermediate maps of one forward pass, (B, C, H, W) numpy arrays.

    Lists are ordered by stage number: ``y_e[0]`` is stage 1 (1/4 scale);
    ``y_m``, ``y_f``, ``y_d``, ``y_seg`` hold stages 1..3, so ``y_seg[2]`` is
    the deepest (1/16) supervision map. ``y_seg0`` is the full-resolution head.
    """

    y_e: list[np.ndarray]
    y_m: list[np.ndarray]
    y_f: list[np.ndarray]
    y_d: list[np.ndarray]
    y_seg: list[np.ndarray]
    y_seg0: np.ndarray


def _to_nchw(t: Tensor) -> np.ndarray:
    return np.ascontiguousarray(t.data.transpose(0, 3, 1, 2))


class _Stage(Module):
    def __init__(self, blocks):
        self.blocks = list(blocks)

    def forward(self, x):
        for blk in self.blocks:
            x = blk(x)
        return x


class Tramba(Module):
    """U-shaped selective-scan segmenter.

    Encoder: 4x4 patch embedding, then four stages at 1/4, 1/8, 1/16, 1/32
    (stages 2-4 open with 2x2 patch merging) of cross-scan VSS blocks.
    Skips: a DFVSS module on each of the first three encoder outputs.
    Decoder (stages 3, 2, 1): the deeper map is bilinearly upsampled 2x,
    concatenated with the skip, projected to the stage width, and refined by
    HVSS blocks (helix + cross scans with a multi-scale FFN). Every decoder
    stage has a 1x1 segmentation head; a final head upsamples stage 1 by 4x.
    """

    def __init__(self, cfg: TrambaConfig = TrambaConfig(), rng=None):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed if rng is None else rng)
        ch = cfg.stage_channels
        self.embed = PatchEmbed(3, ch[0], rng)
        self.merges = [PatchMerge(ch[i - 1], ch[i], rng) for i in (1, 2, 3)]
        self.encoder = [
            _Stage(VSSBlock(ch[i], ("cross",), rng, cfg) for _ in range(cfg.encoder_depths[i]))
            for i in range(4)
        ]
        self.skips = [DFVSS(ch[i], rng, cfg) for i in range(3)]
        # decoder lists are indexed by stage - 1
        dec_depths = dict(zip((3, 2, 1), cfg.decoder_depths))
        self.fuse = [Linear(ch[i] + ch[i + 1], ch[i], rng) for i in range(3)]
        self.decoder = [
            _Stage(VSSBlock(ch[i], cfg.decoder_scans, rng, cfg, multiscale=True)
                   for _ in range(dec_depths[i + 1]))
            for i in range(3)
        ]
        self.seg_heads = [Linear(ch[i], 1, rng) for i in range(3)]
        self.final_head = Linear(ch[0], 1, rng)

    def run(self, img) -> dict[str, list[Tensor] | Tensor]:
        """Forward on a (B, 3, H, W) image; returns channels-last Tensors."""
        img = ag.tensor(img)
        if img.ndim != 4 or img.shape[1] != 3:
            raise ValueError(f"expected a (B, 3, H, W) image batch, got {img.shape}")
        if tuple(img.shape[2:]) != tuple(self.cfg.input_size):
            raise ValueError(f"image size {img.shape[2:]} does not match config {self.cfg.input_size}")
        x = self.embed(img.transpose(0, 2, 3, 1))
        y_e = []
        for i in range(4):
            if i > 0:
                x = self.merges[i - 1](x)
            x = self.encoder[i](x)
            y_e.append(x)
        y_m = [self.skips[i](y_e[i]) for i in range(3)]
        y_f: list = [None] * 3
        y_d: list = [None] * 3
        deeper = y_e[3]
        for i in (2, 1, 0):
            y_f[i] = self.fuse[i](ag.concat_last([upsample(deeper, 2), y_m[i]]))
            y_d[i] = self.decoder[i](y_f[i])
            deeper = y_d[i]
        y_seg = [self.seg_heads[i](y_d[i]) for i in range(3)]
        y_seg0 = self.final_head(upsample(y_d[0], 4))
        return {"y_e": y_e, "y_m": y_m, "y_f": y_f, "y_d": y_d, "y_seg": y_seg, "y_seg0": y_seg0}

    def logits(self, img) -> list[Tensor]:
        """Supervised outputs, deepest first: [seg3, seg2, seg1, seg0] as (B, H, W, 1)."""
        out = self.run(img)
        return [out["y_seg"][2], out["y_seg"][1], out["y_seg"][0], out["y_seg0"]]

    def forward(self, img) -> StageOutputs:
        out = self.run(img)
        conv = lambda ts: [_to_nchw(t) for t in ts]  # noqa: E731
        return StageOutputs(conv(out["y_e"]), conv(out["y_m"]), conv(out["y_f"]),
                            conv(out["y_d"]), conv(out["y_seg"]), _to_nchw(out["y_seg0"]))


def forward(img, config: TrambaConfig | Tramba = TrambaConfig()) -> StageOutputs:
    """One forward pass; a config builds a fresh model seeded by ``config.seed``."""
    model = config if isinstance(config, Tramba) else Tramba(config)
    return model.forward(np.asarray(img, dtype=np.float64))
