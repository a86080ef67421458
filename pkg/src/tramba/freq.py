"""Orthonormal 2D DCT and low/high frequency splitting of feature maps.

Transforms are explicit basis-matrix products; the bases are built once per
length and cached read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .scan2d import GridShape, _as_shape

__all__ = ["dct_basis", "dct2", "idct2", "SpectrumMask", "freq_split", "lowpass_operator"]

DEFAULT_CUTOFF = 0.5


@lru_cache(maxsize=64)
def dct_basis(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix M with ``X = M @ x``; rows are frequencies."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    m[0] *= np.sqrt(0.5)
    m.flags.writeable = False
    return m


def _spatial(x: np.ndarray) -> tuple[int, int]:
    if x.ndim < 2:
        raise ValueError(f"need at least 2 spatial axes, got shape {x.shape}")
    return x.shape[-2], x.shape[-1]


def dct2(x) -> np.ndarray:
    """Type-II orthonormal DCT over the last two axes (per channel)."""
    x = np.asarray(x, dtype=np.float64)
    h, w = _spatial(x)
    return dct_basis(h) @ x @ dct_basis(w).T


def idct2(x) -> np.ndarray:
    """Inverse of :func:`dct2` (orthonormal type-III)."""
    x = np.asarray(x, dtype=np.float64)
    h, w = _spatial(x)
    return dct_basis(h).T @ x @ dct_basis(w)


def _axis_low(n: int, cutoff: float) -> np.ndarray:
    return np.arange(n) / n < cutoff


@dataclass(frozen=True)
class SpectrumMask:
    """Square low-pass region: coefficient (i, j) is low iff max(i/H, j/W) < cutoff."""

    shape: GridShape
    cutoff: float = DEFAULT_CUTOFF

    def __post_init__(self):
        object.__setattr__(self, "shape", _as_shape(self.shape))
        if not 0.0 < self.cutoff <= 1.0:
            raise ValueError(f"cutoff must lie in (0, 1], got {self.cutoff}")

    @property
    def row_low(self) -> np.ndarray:
        return _axis_low(self.shape.height, self.cutoff)

    @property
    def col_low(self) -> np.ndarray:
        return _axis_low(self.shape.width, self.cutoff)

    @property
    def low_mask(self) -> np.ndarray:
        return self.row_low[:, None] & self.col_low[None, :]

    @property
    def high_mask(self) -> np.ndarray:
        return ~self.low_mask


def freq_split(x, mask: SpectrumMask | float = DEFAULT_CUTOFF) -> tuple[np.ndarray, np.ndarray]:
    """Split ``x`` into (low, high) band maps with ``low + high == x``."""
    x = np.asarray(x, dtype=np.float64)
    h, w = _spatial(x)
    if not isinstance(mask, SpectrumMask):
        mask = SpectrumMask(GridShape(h, w), float(mask))
    if (mask.shape.height, mask.shape.width) != (h, w):
        raise ValueError(f"mask grid {mask.shape} does not match map size {(h, w)}")
    spec = dct2(x)
    lm = mask.low_mask
    return idct2(spec * lm), idct2(spec * ~lm)


@lru_cache(maxsize=64)
def lowpass_operator(n: int, cutoff: float = DEFAULT_CUTOFF) -> np.ndarray:
    """One-axis projector ``M.T @ diag(low) @ M``.

    The square mask is separable, so the 2D low band of ``x`` is
    ``P_h @ x @ P_w.T``.
    """
    m = dct_basis(n)
    p = m.T @ (_axis_low(n, cutoff)[:, None] * m)
    p.flags.writeable = False
    return p
