"""Building blocks of the Tramba network, channels-last (B, H, W, C)."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .. import freq, scan2d
from ..ssm_kernel import inverse_softplus
from . import autograd as ag
from .autograd import Tensor

__all__ = [
    "Module",
    "Linear",
    "LayerNorm",
    "DepthwiseConv",
    "SS2D",
    "FFN",
    "MSFFN",
    "VSSBlock",
    "DFVSS",
    "PatchEmbed",
    "PatchMerge",
    "bilinear_matrix",
    "upsample",
]


def param(data, name=None) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


class Module:
    """Parameter container; attributes that are Tensors, Modules or lists of
    Modules are collected by :meth:`parameters` in attribute order."""

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for key, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                out[prefix + key] = val
            elif isinstance(val, Module):
                out.update(val.parameters(f"{prefix}{key}."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.parameters(f"{prefix}{key}.{i}."))
        return out

    def __call__(self, *args, **kw):
        return self.forward(*args, **kw)


class Linear(Module):
    def __init__(self, cin: int, cout: int, rng, bias: bool = True, gain: float = 1.0):
        self.weight = param(rng.normal(0.0, gain * cin ** -0.5, size=(cin, cout)))
        self.bias = param(np.zeros(cout)) if bias else None

    def forward(self, x):
        return ag.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, c: int):
        self.gamma = param(np.ones(c))
        self.beta = param(np.zeros(c))

    def forward(self, x):
        return ag.layer_norm(x, self.gamma, self.beta)


class DepthwiseConv(Module):
    def __init__(self, c: int, k: int, rng, bias: bool = True):
        self.weight = param(rng.normal(0.0, 1.0 / k, size=(k, k, c)))
        self.bias = param(np.zeros(c)) if bias else None

    def forward(self, x):
        return ag.depthwise_conv2d(x, self.weight, self.bias)


@lru_cache(maxsize=128)
def _orders(kinds: tuple[str, ...], h: int, w: int, window: int, rate: int) -> np.ndarray:
    sets = [scan2d.make_scan(k, (h, w), window=window, rate=rate) for k in kinds]
    out = scan2d.stack_orders(*sets)
    out.flags.writeable = False
    return out


class SS2D(Module):
    """Selective-scan branch: in-projection with gate, 3x3 depthwise conv,
    one selective SSM per scan direction, merge, norm, gate, out-projection.

    ``kinds`` lists scan families; each contributes four directions.
    """

    def __init__(self, c: int, kinds: tuple[str, ...], rng, d_state: int = 8, expand: int = 1,
                 sharing: str = "per_direction", window: int = 4, rate: int = 2, exact: bool = True):
        e = expand * c
        r = max(1, -(-c // 16))
        self.kinds = tuple(kinds)
        self.window, self.rate, self.exact = window, rate, exact
        self.d_state, self.dt_rank = d_state, r
        self.shared = sharing == "shared"
        k = 1 if self.shared else 4 * len(self.kinds)
        self.in_proj = Linear(c, 2 * e, rng)
        self.conv = DepthwiseConv(e, 3, rng)
        self.x_proj = param(rng.normal(0.0, e ** -0.5, size=(k, e, r + 2 * d_state)))
        self.dt_proj = param(rng.uniform(-(r ** -0.5), r ** -0.5, size=(k, r, e)))
        dt = np.exp(rng.uniform(np.log(1e-3), np.log(1e-1), size=(k, e)))
        self.dt_bias = param(inverse_softplus(dt))
        self.a_log = param(np.log(np.tile(np.arange(1, d_state + 1, dtype=np.float64), (k, e, 1))))
        self.d_skip = param(np.ones((k, e)))
        self.out_norm = LayerNorm(e)
        self.out_proj = Linear(e, c, rng)
        if self.shared:
            for t in (self.x_proj, self.dt_proj, self.dt_bias, self.a_log, self.d_skip):
                t.data = t.data[0]

    def orders(self, h: int, w: int) -> np.ndarray:
        return _orders(self.kinds, h, w, self.window, self.rate)

    def scan_core(self, u: Tensor) -> Tensor:
        """Directional SSMs over a (B, H, W, E) map, merged back to (B, H, W, E)."""
        b, h, w, e = u.shape
        orders = self.orders(h, w)
        seq = ag.scan_gather(u.reshape(b, h * w, e), orders)  # (B, K, L, E)
        kdim = "" if self.shared else "k"
        proj = ag.einsum(f"bkle,{kdim}ep->bklp", seq, self.x_proj)
        dt_low, bm, cm = ag.split_last(proj, [self.dt_rank, self.d_state, self.d_state])
        bias = self.dt_bias if self.shared else self.dt_bias.reshape(self.dt_bias.shape[0], 1, e)
        delta = ag.softplus(ag.einsum(f"bklr,{kdim}re->bkle", dt_low, self.dt_proj) + bias)
        a = -ag.exp(self.a_log)
        y = ag.selective_scan(seq, delta, a, bm, cm, self.d_skip, exact=self.exact)
        return ag.scan_merge(y, orders).reshape(b, h, w, e)

    def forward(self, x: Tensor) -> Tensor:
        xz = self.in_proj(x)
        e = xz.shape[-1] // 2
        u, z = ag.split_last(xz, [e, e])
        u = ag.silu(self.conv(u))
        y = self.out_norm(self.scan_core(u))
        return self.out_proj(y * ag.silu(z))


class FFN(Module):
    def __init__(self, c: int, ratio: int, rng):
        self.fc1 = Linear(c, ratio * c, rng)
        self.fc2 = Linear(ratio * c, c, rng)

    def forward(self, x):
        return self.fc2(ag.gelu(self.fc1(x)))


class MSFFN(Module):
    """Pointwise expand, sum of 3x3/5x5/7x7 depthwise convs, GELU, pointwise contract."""

    def __init__(self, c: int, ratio: int, rng, kernels=(3, 5, 7)):
        hidden = ratio * c
        self.fc1 = Linear(c, hidden, rng)
        self.dw = [DepthwiseConv(hidden, k, rng) for k in kernels]
        self.fc2 = Linear(hidden, c, rng)

    def forward(self, x):
        h = self.fc1(x)
        m = self.dw[0](h)
        for conv in self.dw[1:]:
            m = m + conv(h)
        return self.fc2(ag.gelu(m))


class VSSBlock(Module):
    """Pre-norm residual: x + SS2D(norm x), then x + FFN(norm x)."""

    def __init__(self, c: int, kinds, rng, cfg, multiscale: bool = False):
        self.norm1 = LayerNorm(c)
        self.ss2d = SS2D(c, tuple(kinds), rng, d_state=cfg.d_state, expand=cfg.ssm_expand,
                         sharing=cfg.direction_sharing, window=cfg.window_size,
                         rate=cfg.dilation_rate, exact=cfg.exact_zoh)
        self.norm2 = LayerNorm(c)
        self.ffn = MSFFN(c, cfg.ffn_ratio, rng) if multiscale else FFN(c, cfg.ffn_ratio, rng)

    def forward(self, x):
        x = x + self.ss2d(self.norm1(x))
        return x + self.ffn(self.norm2(x))


class DFVSS(Module):
    """Frequency-split skip enhancer.

    The map is split into DCT low/high bands; the high band passes a
    window-scan VSS block, the low band a dilation-scan VSS block. Their
    outputs are concatenated, fused by a 1x1 projection and added to the input.
    """

    def __init__(self, c: int, rng, cfg):
        self.cutoff = cfg.dct_cutoff
        self.branches = cfg.dfvss_branches
        self.high_block = VSSBlock(c, ("window",), rng, cfg)
        self.low_block = VSSBlock(c, ("dilation",), rng, cfg)
        self.fuse = Linear(2 * c, c, rng)
        # set by callers that want to inspect the band split
        self.probe = None

    def split(self, x: Tensor) -> tuple[Tensor, Tensor]:
        _, h, w, _ = x.shape
        low = ag.spatial_linear(x, freq.lowpass_operator(h, self.cutoff), freq.lowpass_operator(w, self.cutoff))
        return low, x - low

    def forward(self, x):
        low, high = self.split(x)
        if self.probe is not None:
            self.probe(x.data, low.data, high.data)
        zero = Tensor(np.zeros(x.shape))
        hi = self.high_block(high) if self.branches in ("both", "high") else zero
        lo = self.low_block(low) if self.branches in ("both", "low") else zero
        return x + self.fuse(ag.concat_last([hi, lo]))


class PatchEmbed(Module):
    """Non-overlapping p x p patches linearly projected; no positional term."""

    def __init__(self, cin: int, c: int, rng, patch: int = 4):
        self.patch = patch
        self.proj = Linear(cin * patch * patch, c, rng)

    def forward(self, img: Tensor) -> Tensor:
        b, h, w, cin = img.shape
        p = self.patch
        if h % p or w % p:
            raise ValueError(f"image size {(h, w)} not divisible by patch size {p}")
        x = img.reshape(b, h // p, p, w // p, p, cin).transpose(0, 1, 3, 2, 4, 5)
        return self.proj(x.reshape(b, h // p, w // p, p * p * cin))


class PatchMerge(PatchEmbed):
    """2x2 strided patch merging: (B, H, W, C) -> (B, H/2, W/2, C_out)."""

    def __init__(self, cin: int, cout: int, rng):
        super().__init__(cin, cout, rng, patch=2)


@lru_cache(maxsize=64)
def bilinear_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Half-pixel-centred linear interpolation matrix (n_out, n_in)."""
    scale = n_in / n_out
    src = np.clip((np.arange(n_out) + 0.5) * scale - 0.5, 0.0, None)
    i0 = np.minimum(np.floor(src).astype(int), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    lam = src - i0
    m = np.zeros((n_out, n_in))
    np.add.at(m, (np.arange(n_out), i0), 1.0 - lam)
    np.add.at(m, (np.arange(n_out), i1), lam)
    m.flags.writeable = False
    return m


def upsample(x: Tensor, factor: int) -> Tensor:
    _, h, w, _ = x.shape
    return ag.spatial_linear(x, bilinear_matrix(h, h * factor), bilinear_matrix(w, w * factor))
