"""Grid traversal orders for 2D selective scanning.

Every scan is an explicit permutation of the row-major flat indices of an
H x W patch grid. A :class:`ScanSet` bundles the four directional sequences
that feed parallel SSM blocks: two forward orders and their exact reversals.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "GridShape",
    "ScanOrder",
    "ScanSet",
    "HelixCoverage",
    "bresenham",
    "cross_scan",
    "window_scan",
    "dilation_scan",
    "helix_scan",
    "helix_coverage",
    "baseline_scan",
    "make_scan",
    "SCAN_KINDS",
    "gather",
    "scatter_merge",
    "stack_orders",
]


@dataclass(frozen=True)
class GridShape:
    height: int
    width: int

    def __post_init__(self):
        if int(self.height) != self.height or int(self.width) != self.width:
            raise ValueError(f"grid dimensions must be integers, got {self}")
        if self.height < 1 or self.width < 1:
            raise ValueError(f"grid dimensions must be positive, got {self}")

    @property
    def size(self) -> int:
        return self.height * self.width

    def transposed(self) -> "GridShape":
        return GridShape(self.width, self.height)


def _as_shape(shape) -> GridShape:
    if isinstance(shape, GridShape):
        return shape
    h, w = shape
    return GridShape(int(h), int(w))


class ScanOrder:
    """A bijective visiting order over a grid, with its inverse.

    ``order[k]`` is the flat index visited at step ``k``; ``inverse[i]`` is
    the step at which flat index ``i`` is visited.
    """

    __slots__ = ("shape", "order", "inverse")

    def __init__(self, shape, order: Sequence[int]):
        shape = _as_shape(shape)
        order = np.asarray(order, dtype=np.int64).copy()
        n = shape.size
        if order.shape != (n,):
            raise ValueError(f"order has length {order.size}, expected {n}")
        inverse = np.full(n, -1, dtype=np.int64)
        if order.min(initial=0) < 0 or order.max(initial=0) >= n:
            raise ValueError("order contains out-of-range indices")
        inverse[order] = np.arange(n)
        if (inverse < 0).any():
            raise ValueError("order is not a permutation")
        order.flags.writeable = False
        inverse.flags.writeable = False
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "inverse", inverse)

    def __setattr__(self, name, value):
        raise AttributeError("ScanOrder is immutable")

    def __len__(self) -> int:
        return self.order.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScanOrder):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.order, other.order)

    def __hash__(self):
        return hash((self.shape, self.order.tobytes()))

    def __repr__(self) -> str:
        return f"ScanOrder({self.shape.height}x{self.shape.width}, {self.order.tolist()})"

    def reversed(self) -> "ScanOrder":
        return ScanOrder(self.shape, self.order[::-1])

    def rank_grid(self) -> np.ndarray:
        """Visit step of every cell, laid out as an H x W matrix."""
        return self.inverse.reshape(self.shape.height, self.shape.width).copy()

    def compose(self, perm: Sequence[int]) -> "ScanOrder":
        """Order that visits ``perm[order[k]]`` at step k."""
        perm = np.asarray(perm, dtype=np.int64)
        return ScanOrder(self.shape, perm[self.order])


@dataclass(frozen=True)
class ScanSet:
    forward_a: ScanOrder
    forward_b: ScanOrder
    backward_a: ScanOrder
    backward_b: ScanOrder

    @classmethod
    def from_forwards(cls, a: ScanOrder, b: ScanOrder) -> "ScanSet":
        return cls(a, b, a.reversed(), b.reversed())

    @property
    def shape(self) -> GridShape:
        return self.forward_a.shape

    @property
    def orders(self) -> tuple[ScanOrder, ScanOrder, ScanOrder, ScanOrder]:
        return (self.forward_a, self.forward_b, self.backward_a, self.backward_b)

    def __iter__(self) -> Iterator[ScanOrder]:
        return iter(self.orders)


# ----------------------------------------------------------------------------
# order generators (lists of (row, col) or flat indices)


def _transpose_flat(order_t: np.ndarray, shape: GridShape) -> np.ndarray:
    """Map flat indices on the transposed (W x H) grid back to row-major H x W."""
    order_t = np.asarray(order_t, dtype=np.int64)
    rows = order_t % shape.height
    cols = order_t // shape.height
    return rows * shape.width + cols


def _raster(shape: GridShape) -> np.ndarray:
    return np.arange(shape.size, dtype=np.int64)


def cross_scan(shape) -> ScanSet:
    shape = _as_shape(shape)
    fa = _raster(shape)
    fb = _transpose_flat(_raster(shape.transposed()), shape)
    return ScanSet.from_forwards(ScanOrder(shape, fa), ScanOrder(shape, fb))


def _window_flat(shape: GridShape, s: int) -> np.ndarray:
    out = []
    h, w = shape.height, shape.width
    for wi in range(0, h, s):
        for wj in range(0, w, s):
            for r in range(wi, min(wi + s, h)):
                for c in range(wj, min(wj + s, w)):
                    out.append(r * w + c)
    return np.array(out, dtype=np.int64)


def window_scan(shape, window: int) -> ScanSet:
    """Window-local raster scan; edge windows are clipped, not padded."""
    shape = _as_shape(shape)
    if window < 1:
        raise ValueError(f"window size must be >= 1, got {window}")
    fa = _window_flat(shape, window)
    # column-major windows with column-major interiors == window scan of the transpose
    fb = _transpose_flat(_window_flat(shape.transposed(), window), shape)
    return ScanSet.from_forwards(ScanOrder(shape, fa), ScanOrder(shape, fb))


def _dilated_flat(n: int, rate: int) -> np.ndarray:
    return np.concatenate([np.arange(i, n, rate, dtype=np.int64) for i in range(min(rate, n))])


def dilation_scan(shape, rate: int) -> ScanSet:
    """Strided scan: offsets 0..R-1 each take every R-th cell of the flattened grid.

    The second direction applies the same sampling to the flattened transpose.
    """
    shape = _as_shape(shape)
    if rate < 1:
        raise ValueError(f"dilation rate must be >= 1, got {rate}")
    fa = _dilated_flat(shape.size, rate)
    fb = _transpose_flat(_dilated_flat(shape.size, rate), shape)
    return ScanSet.from_forwards(ScanOrder(shape, fa), ScanOrder(shape, fb))


def bresenham(r0: int, c0: int, r1: int, c1: int) -> list[tuple[int, int]]:
    """Integer Bresenham line from (r0, c0) to (r1, c1), both endpoints included."""
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r0 < r1 else -1
    sc = 1 if c0 < c1 else -1
    err = dc - dr
    r, c = r0, c0
    points = []
    while True:
        points.append((r, c))
        if r == r1 and c == c1:
            break
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr
    return points


def _helix_slices(shape: GridShape, half_offset: bool) -> list[list[tuple[int, int]]]:
    h, w = shape.height, shape.width
    o = 1 if half_offset else 0
    slices = []
    for k in range(h // 2):
        slices.append(bresenham(2 * k + o, 0, h - 1 - 2 * k - o, w - 1))
        slices.append(bresenham(h - 1, 2 * k + o, 0, w - 1 - 2 * k - o))
    return slices


def _helix_visit(shape: GridShape, half_offset: bool) -> tuple[list[int], int]:
    """Flat indices covered by the slices, in visit order, and the count of
    cells that had to be appended in raster order."""
    h, w = shape.height, shape.width
    seen = np.zeros(shape.size, dtype=bool)
    out: list[int] = []
    for line in _helix_slices(shape, half_offset):
        for r, c in line:
            # slices whose endpoints leave the grid are clipped cell-wise
            if 0 <= r < h and 0 <= c < w:
                idx = r * w + c
                if not seen[idx]:
                    seen[idx] = True
                    out.append(idx)
    covered = len(out)
    out.extend(np.flatnonzero(~seen).tolist())
    return out, shape.size - covered


@dataclass(frozen=True)
class HelixCoverage:
    """How much of the grid the helix slices reach before raster completion."""

    shape: GridShape
    covered_a: int
    covered_b: int
    covered_union: int
    completed_a: int
    completed_b: int

    @property
    def slices_cover_grid(self) -> bool:
        return self.covered_union == self.shape.size


def helix_coverage(shape) -> HelixCoverage:
    shape = _as_shape(shape)
    a, miss_a = _helix_visit(shape, False)
    b, miss_b = _helix_visit(shape, True)
    n = shape.size
    union = set(a[: n - miss_a]) | set(b[: n - miss_b])
    return HelixCoverage(shape, n - miss_a, n - miss_b, len(union), miss_a, miss_b)


@lru_cache(maxsize=256)
def _helix_cached(shape: GridShape) -> ScanSet:
    a, _ = _helix_visit(shape, False)
    b, _ = _helix_visit(shape, True)
    return ScanSet.from_forwards(ScanOrder(shape, a), ScanOrder(shape, b))


def helix_scan(shape) -> ScanSet:
    """Helix scan: Bresenham slices through the grid centre, the axis moving
    two cells per slice pair.

    ``forward_a`` walks, for k = 0 .. H//2 - 1, the line (2k, 0) -> (H-1-2k, W-1)
    and then (H-1, 2k) -> (0, W-1-2k). ``forward_b`` uses the interleaved
    slices shifted by one cell. Cells already visited are skipped, and any cell
    the slices never reach is appended in raster order so each sequence is a
    permutation.
    """
    return _helix_cached(_as_shape(shape))


# ----------------------------------------------------------------------------
# ablation baselines


def _diagonal_flat(shape: GridShape) -> np.ndarray:
    h, w = shape.height, shape.width
    out = []
    for s in range(h + w - 1):
        for r in range(max(0, s - w + 1), min(h, s + 1)):
            out.append(r * w + (s - r))
    return np.array(out, dtype=np.int64)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _hilbert_d2xy(n: int, d: int) -> tuple[int, int]:
    x = y = 0
    t = d
    s = 1
    while s < n:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        if ry == 0:
            if rx == 1:
                x = s - 1 - x
                y = s - 1 - y
            x, y = y, x
        x += s * rx
        y += s * ry
        t //= 4
        s *= 2
    return x, y


def _hilbert_flat(shape: GridShape) -> np.ndarray:
    h, w = shape.height, shape.width
    if not (_is_pow2(h) and _is_pow2(w)):
        raise ValueError(f"hilbert scan needs power-of-two height and width, got {h}x{w}")
    n = max(h, w)
    out = []
    # non-square grids: walk the enclosing square curve and keep in-grid cells
    for d in range(n * n):
        x, y = _hilbert_d2xy(n, d)
        r, c = y, x
        if r < h and c < w:
            out.append(r * w + c)
    return np.array(out, dtype=np.int64)


def _spiral_flat(shape: GridShape) -> np.ndarray:
    h, w = shape.height, shape.width
    r, c = (h - 1) // 2, (w - 1) // 2
    out = [r * w + c]
    moves = ((0, 1), (1, 0), (0, -1), (-1, 0))
    step, d = 1, 0
    while len(out) < h * w:
        for _ in range(2):
            dr, dc = moves[d % 4]
            for _ in range(step):
                r += dr
                c += dc
                if 0 <= r < h and 0 <= c < w:
                    out.append(r * w + c)
            d += 1
        step += 1
    return np.array(out, dtype=np.int64)


_BASELINES = {
    "diagonal": _diagonal_flat,
    "hilbert": _hilbert_flat,
    "central_spiral": _spiral_flat,
    "spiral": _spiral_flat,
}


def baseline_scan(shape, kind: str) -> ScanSet:
    """Comparison traversals: anti-diagonal, Hilbert, centre-out spiral.

    The second direction is the same traversal run on the transposed grid.
    """
    shape = _as_shape(shape)
    try:
        gen = _BASELINES[kind]
    except KeyError:
        raise ValueError(f"unknown baseline scan {kind!r}; choose from {sorted(_BASELINES)}") from None
    fa = gen(shape)
    fb = _transpose_flat(gen(shape.transposed()), shape)
    return ScanSet.from_forwards(ScanOrder(shape, fa), ScanOrder(shape, fb))


SCAN_KINDS = ("cross", "window", "dilation", "helix", "diagonal", "hilbert", "spiral")


def make_scan(kind: str, shape, window: int = 4, rate: int = 2) -> ScanSet:
    """Dispatch by name; ``window``/``rate`` only apply to their scan kinds."""
    if kind == "cross":
        return cross_scan(shape)
    if kind == "window":
        return window_scan(shape, window)
    if kind == "dilation":
        return dilation_scan(shape, rate)
    if kind == "helix":
        return helix_scan(shape)
    if kind in _BASELINES:
        return baseline_scan(shape, kind)
    raise ValueError(f"unknown scan kind {kind!r}")


# ----------------------------------------------------------------------------
# applying orders to feature maps


def _check_map(x: np.ndarray, shape: GridShape):
    if x.ndim != 4:
        raise ValueError(f"expected a (batch, channel, height, width) map, got shape {x.shape}")
    if x.shape[2:] != (shape.height, shape.width):
        raise ValueError(f"map spatial size {x.shape[2:]} does not match scan grid {shape}")


def gather(x: np.ndarray, s: ScanOrder) -> np.ndarray:
    """Flatten ``x`` (B, C, H, W) into a (B, L, C) sequence following ``s``."""
    _check_map(x, s.shape)
    b, c = x.shape[:2]
    flat = x.reshape(b, c, -1)
    return np.ascontiguousarray(flat[:, :, s.order].transpose(0, 2, 1))


def scatter_merge(ys: Sequence[np.ndarray], scans) -> np.ndarray:
    """Undo each order and sum the results back onto the grid.

    ``scans`` is a ScanSet or any sequence of ScanOrders matching ``ys``.
    """
    orders = list(scans)
    if len(orders) != len(ys):
        raise ValueError(f"got {len(ys)} sequences for {len(orders)} scan orders")
    shape = orders[0].shape
    out = None
    for y, s in zip(ys, orders):
        if s.shape != shape:
            raise ValueError("scan orders cover different grids")
        y = np.asarray(y)
        if y.ndim != 3 or y.shape[1] != shape.size:
            raise ValueError(f"sequence shape {y.shape} does not match grid of {shape.size} cells")
        grid = y[:, s.inverse, :]
        out = grid if out is None else out + grid
    b, _, c = out.shape
    return out.transpose(0, 2, 1).reshape(b, c, shape.height, shape.width)


def stack_orders(*scans) -> np.ndarray:
    """(K, N) int array of every order from the given ScanSets / ScanOrders."""
    rows = []
    for s in scans:
        if isinstance(s, ScanOrder):
            rows.append(s.order)
        else:
            rows.extend(o.order for o in s)
    return np.stack(rows)
