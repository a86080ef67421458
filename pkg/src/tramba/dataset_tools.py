"""TSOD10K naming codec, attribute statistics, per-category splitting and a
synthetic scene generator used as a test fixture.

File names follow ``<emergency>_<category>_<weather>_<size>_<id>.<ext>``,
e.g. ``C_H_L_S_00042.jpg``.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "ALPHABETS",
    "SampleMeta",
    "NameParseError",
    "parse_name",
    "format_name",
    "SizeInfo",
    "classify_size",
    "size_class_of",
    "stratified_split",
    "DatasetStats",
    "compute_stats",
    "synth_scene",
    "SyntheticSample",
    "synth_dataset",
]

SIZE_THRESHOLD = 0.1

ALPHABETS: dict[str, dict[str, str]] = {
    "emergency": {"C": "crisis", "E": "emergency", "N": "normalcy"},
    "category": {"H": "human", "V": "vehicle", "S": "signage", "O": "obstacle"},
    "weather": {"F": "fine", "I": "inclement", "L": "low-light"},
    "size_class": {"L": "large", "S": "small"},
}
FIELDS = ("emergency", "category", "weather", "size_class")


class NameParseError(ValueError):
    def __init__(self, name: str, field_name: str, detail: str):
        self.name = name
        self.field = field_name
        super().__init__(f"{name!r}: bad {field_name} field: {detail}")


@dataclass(frozen=True)
class SampleMeta:
    emergency: str
    category: str
    weather: str
    size_class: str
    id: str
    ext: str = ".jpg"

    def __post_init__(self):
        for f in FIELDS:
            v = getattr(self, f)
            if v not in ALPHABETS[f]:
                raise NameParseError(str(self), f, f"{v!r} not in {sorted(ALPHABETS[f])}")
        if not re.fullmatch(r"\d{5}", self.id):
            raise NameParseError(str(self), "id", f"{self.id!r} is not five digits")

    def describe(self) -> dict[str, str]:
        return {f: ALPHABETS[f][getattr(self, f)] for f in FIELDS}


def parse_name(filename: str) -> SampleMeta:
    """Decode a TSOD10K file name (a leading directory is ignored)."""
    base = Path(filename).name
    stem, dot, ext = base.rpartition(".")
    if not dot:
        stem, ext = base, ""
    parts = stem.split("_")
    labels = FIELDS + ("id",)
    if len(parts) != len(labels):
        raise NameParseError(base, "structure", f"expected 5 '_'-separated fields, got {len(parts)}")
    for label, value in zip(FIELDS, parts):
        if value not in ALPHABETS[label]:
            raise NameParseError(base, label, f"{value!r} not in {sorted(ALPHABETS[label])}")
    if not re.fullmatch(r"\d{5}", parts[4]):
        raise NameParseError(base, "id", f"{parts[4]!r} is not five digits")
    return SampleMeta(*parts, ext=f".{ext}" if dot else "")


def format_name(meta: SampleMeta) -> str:
    return f"{meta.emergency}_{meta.category}_{meta.weather}_{meta.size_class}_{meta.id}{meta.ext}"


class SizeInfo(NamedTuple):
    size_class: str
    ratio: float
    empty: bool


def classify_size(mask) -> SizeInfo:
    """Foreground share of the image; ratios >= 0.1 are 'L'."""
    m = np.asarray(mask) > 0
    if m.size == 0:
        raise ValueError("mask is empty")
    ratio = float(m.sum()) / m.size
    return SizeInfo("L" if ratio >= SIZE_THRESHOLD else "S", ratio, ratio == 0.0)


def size_class_of(mask) -> str:
    return classify_size(mask).size_class


def stratified_split(names: Iterable[str], ratio: float = 0.8, seed: int = 0) -> tuple[list[str], list[str]]:
    """Split names per object category, ceil(ratio * n) of each to the train side.

    Deterministic for a given seed regardless of input order. Both returned
    lists are sorted.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must lie in [0, 1], got {ratio}")
    names = sorted(set(names))
    groups: dict[str, list[str]] = {}
    bad = []
    for n in names:
        try:
            groups.setdefault(parse_name(n).category, []).append(n)
        except NameParseError as exc:
            bad.append(str(exc))
    if bad:
        raise ValueError(f"{len(bad)} unparseable name(s): " + "; ".join(bad[:10]))
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cat in sorted(groups):
        members = groups[cat]
        perm = rng.permutation(len(members))
        k = math.ceil(ratio * len(members) - 1e-9)
        train.extend(members[i] for i in perm[:k])
        test.extend(members[i] for i in perm[k:])
    return sorted(train), sorted(test)


@dataclass
class DatasetStats:
    counts: dict[str, dict[str, int]] = field(default_factory=dict)
    proportions: dict[str, dict[str, float]] = field(default_factory=dict)
    size_hist: np.ndarray = field(default_factory=lambda: np.zeros(10, dtype=int))
    hist_edges: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 1.0, 11))
    centroids: list[tuple[str, float, float]] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    total: int = 0

    def to_tsv(self) -> str:
        rows = ["section\tkey\tvalue\tcount"]
        for f in FIELDS:
            for letter in ALPHABETS[f]:
                rows.append(f"{f}\t{letter}\t{self.proportions[f][letter]:.6f}\t{self.counts[f][letter]}")
        for lo, hi, cnt in zip(self.hist_edges[:-1], self.hist_edges[1:], self.size_hist):
            rows.append(f"size_ratio\t{lo:.2f}-{hi:.2f}\t{cnt / max(self.total, 1):.6f}\t{cnt}")
        for name, cx, cy in self.centroids:
            rows.append(f"centroid\t{name}\t{cx:.6f},{cy:.6f}\t1")
        return "\n".join(rows) + "\n"


def mask_centroid(mask) -> tuple[float, float] | None:
    """Foreground centre (x, y) in normalised [0, 1] image coordinates."""
    m = np.asarray(mask) > 0
    if not m.any():
        return None
    rows, cols = np.nonzero(m)
    h, w = m.shape
    return float((cols.mean() + 0.5) / w), float((rows.mean() + 0.5) / h)


def compute_stats(pairs: Iterable[tuple[str, object]], bins: int = 10) -> DatasetStats:
    """Attribute shares, size-ratio histogram and object centres.

    ``pairs`` yields (file name, mask) where the mask is an array or a path.
    Masks that fail to load are skipped with a warning.
    """
    from ._io import read_mask

    counts = {f: Counter() for f in FIELDS}
    hist = np.zeros(bins, dtype=int)
    edges = np.linspace(0.0, 1.0, bins + 1)
    stats = DatasetStats(hist_edges=edges)
    for name, mask in pairs:
        meta = parse_name(name)
        if not isinstance(mask, np.ndarray):
            try:
                mask = read_mask(mask)
            except (OSError, ValueError) as exc:
                log.warning("skipping %s: %s", name, exc)
                stats.skipped.append(name)
                continue
        for f in FIELDS:
            counts[f][getattr(meta, f)] += 1
        ratio = classify_size(mask).ratio
        hist[min(int(ratio * bins), bins - 1)] += 1
        c = mask_centroid(mask)
        if c is not None:
            stats.centroids.append((name, *c))
        stats.total += 1
    stats.counts = {f: {k: counts[f][k] for k in ALPHABETS[f]} for f in FIELDS}
    stats.proportions = {
        f: {k: (counts[f][k] / stats.total if stats.total else 0.0) for k in ALPHABETS[f]} for f in FIELDS
    }
    stats.size_hist = hist
    return stats


# ----------------------------------------------------------------------------
# synthetic fixtures


def _object_mask(rng, h: int, w: int, area: float) -> np.ndarray:
    """Rectangle or ellipse covering roughly ``area`` of the frame."""
    aspect = rng.uniform(0.6, 1.6)
    if rng.random() < 0.5:
        bh = int(np.clip(round(np.sqrt(area * h * w / aspect)), 1, h))
        bw = int(np.clip(round(area * h * w / bh), 1, w))
        r0 = rng.integers(0, h - bh + 1)
        c0 = rng.integers(0, w - bw + 1)
        m = np.zeros((h, w), dtype=bool)
        m[r0:r0 + bh, c0:c0 + bw] = True
        return m
    ry = max(np.sqrt(area * h * w / (np.pi * aspect)), 0.6)
    rx = max(area * h * w / (np.pi * ry), 0.6)
    cy = rng.uniform(min(ry, h / 2), max(h - ry, h / 2))
    cx = rng.uniform(min(rx, w / 2), max(w - rx, w / 2))
    yy, xx = np.mgrid[0:h, 0:w]
    m = ((yy + 0.5 - cy) / ry) ** 2 + ((xx + 0.5 - cx) / rx) ** 2 <= 1.0
    if not m.any():
        m[int(np.clip(cy, 0, h - 1)), int(np.clip(cx, 0, w - 1))] = True
    return m


def synth_scene(rng, size: tuple[int, int] = (64, 64), large: bool | None = None) -> tuple[np.ndarray, np.ndarray]:
    """One RGB uint8 scene (H, W, 3) with a single salient object and its mask."""
    h, w = size
    if large is None:
        large = bool(rng.random() < 0.5)
    area = rng.uniform(0.15, 0.35) if large else rng.uniform(0.02, 0.07)
    mask = _object_mask(rng, h, w, area)
    yy, xx = np.mgrid[0:h, 0:w] / np.array([max(h - 1, 1), max(w - 1, 1)])[:, None, None]
    base = rng.uniform(40, 140, size=3)
    slope = rng.uniform(-40, 40, size=(2, 3))
    img = base + yy[..., None] * slope[0] + xx[..., None] * slope[1]
    img = img + rng.normal(0.0, 6.0, size=img.shape)
    color = rng.uniform(150, 255, size=3)
    img[mask] = color + rng.normal(0.0, 6.0, size=(int(mask.sum()), 3))
    return np.clip(np.round(img), 0, 255).astype(np.uint8), mask


@dataclass(frozen=True)
class SyntheticSample:
    name: str
    image: np.ndarray
    mask: np.ndarray

    @property
    def meta(self) -> SampleMeta:
        return parse_name(self.name)


def synth_dataset(n: int, seed: int = 0, size: tuple[int, int] = (64, 64)) -> list[SyntheticSample]:
    """Deterministic scenes with valid names; the size letter matches the mask."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        img, mask = synth_scene(rng, size)
        e = rng.choice(list(ALPHABETS["emergency"]))
        c = rng.choice(list(ALPHABETS["category"]))
        wth = rng.choice(list(ALPHABETS["weather"]))
        meta = SampleMeta(str(e), str(c), str(wth), size_class_of(mask), f"{i + 1:05d}")
        out.append(SyntheticSample(format_name(meta), img, mask))
    return out
