"""Salient object detection metrics.

Covers MAE, F-measure (adaptive / mean / max plus PR and F curves),
E-measure, S-measure and weighted F-measure. Predictions are [0, 1] maps;
ground truth is binary. Threshold curves binarise with ``pred >= k/255`` for
k = 0..255.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

log = logging.getLogger(__name__)

__all__ = [
    "BETA2",
    "THRESHOLDS",
    "check_pair",
    "mae",
    "FMeasure",
    "f_measure",
    "e_measure",
    "s_measure",
    "weighted_f",
    "SaliencyScores",
    "evaluate",
    "DirectoryReport",
    "evaluate_directory",
    "SCORE_COLUMNS",
]

BETA2 = 0.3
THRESHOLDS = np.arange(256) / 255.0
EPS = np.finfo(np.float64).eps
S_ALPHA = 0.5


def check_pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    """Validate and normalise a prediction / ground-truth pair.

    The prediction is clipped to [0, 1]; the ground truth must hold only 0/1.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt_arr = np.asarray(gt)
    if pred.shape != gt_arr.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt_arr.shape} differ in shape")
    if gt_arr.dtype != bool:
        if not np.isin(gt_arr, (0, 1)).all():
            raise ValueError("ground truth must be binary")
        gt_arr = gt_arr.astype(bool)
    return np.clip(pred, 0.0, 1.0), gt_arr


def mae(pred, gt) -> float:
    pred, gt = check_pair(pred, gt)
    return float(np.abs(pred - gt).mean())


def adaptive_threshold(pred: np.ndarray) -> float:
    return min(2.0 * float(pred.mean()), 1.0)


def _counts_at(pred: np.ndarray, gt: np.ndarray, thresholds) -> tuple[np.ndarray, np.ndarray]:
    """True / false positive counts of ``pred >= t`` for each threshold."""
    fg = np.sort(pred[gt])
    bg = np.sort(pred[~gt])
    t = np.asarray(thresholds, dtype=np.float64)
    tp = fg.size - np.searchsorted(fg, t, side="left")
    fp = bg.size - np.searchsorted(bg, t, side="left")
    return tp.astype(np.float64), fp.astype(np.float64)


def _fbeta(precision, recall, beta2=BETA2):
    num = (1 + beta2) * precision * recall
    den = beta2 * precision + recall
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def _pr(tp, fp, n_fg):
    pos = tp + fp
    precision = np.divide(tp, pos, out=np.zeros_like(tp), where=pos > 0)
    recall = tp / n_fg if n_fg else np.zeros_like(tp)
    return precision, recall


@dataclass
class FMeasure:
    adaptive: float
    mean: float
    max: float
    curve: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    empty_gt: bool = False


def f_measure(pred, gt, beta2: float = BETA2) -> FMeasure:
    """F-beta over the 256-threshold grid plus the adaptive-threshold score.

    Ground truth without positives yields all-zero scores with ``empty_gt`` set.
    """
    pred, gt = check_pair(pred, gt)
    n_fg = int(gt.sum())
    if n_fg == 0:
        z = np.zeros(THRESHOLDS.size)
        return FMeasure(0.0, 0.0, 0.0, z, z.copy(), z.copy(), empty_gt=True)
    tp, fp = _counts_at(pred, gt, THRESHOLDS)
    precision, recall = _pr(tp, fp, n_fg)
    curve = _fbeta(precision, recall, beta2)
    tpa, fpa = _counts_at(pred, gt, [adaptive_threshold(pred)])
    pa, ra = _pr(tpa, fpa, n_fg)
    adp = float(_fbeta(pa, ra, beta2)[0])
    return FMeasure(adp, float(curve.mean()), float(curve.max()), curve, precision, recall)


def _enhanced_scores(pred: np.ndarray, gt: np.ndarray, thresholds) -> np.ndarray:
    """Enhanced-alignment score of ``pred >= t`` against ``gt`` per threshold.

    For binary maps every pixel is one of four (prediction, truth) cases, so
    the per-pixel alignment only needs the four case counts.
    """
    n = gt.size
    n_fg = float(gt.sum())
    tp, fp = _counts_at(pred, gt, thresholds)
    if n_fg == 0:
        return 1.0 - (tp + fp) / n
    if n_fg == n:
        return (tp + fp) / n
    fn = n_fg - tp
    tn = (n - n_fg) - fp
    mu_p = (tp + fp) / n
    mu_g = n_fg / n
    out = np.zeros_like(tp)
    for cnt, p, g in ((tp, 1.0, 1.0), (fp, 1.0, 0.0), (fn, 0.0, 1.0), (tn, 0.0, 0.0)):
        dp = p - mu_p
        dg = g - mu_g
        align = 2.0 * dp * dg / (dp * dp + dg * dg)
        out += cnt * (align + 1.0) ** 2 / 4.0
    return out / n


def e_measure(pred, gt) -> tuple[float, float, float]:
    """(adaptive, mean, max) enhanced-alignment measure."""
    pred, gt = check_pair(pred, gt)
    curve = _enhanced_scores(pred, gt, THRESHOLDS)
    adp = float(_enhanced_scores(pred, gt, [adaptive_threshold(pred)])[0])
    return adp, float(curve.mean()), float(curve.max())


def e_measure_curve(pred, gt) -> np.ndarray:
    pred, gt = check_pair(pred, gt)
    return _enhanced_scores(pred, gt, THRESHOLDS)


# ----------------------------------------------------------------------------
# S-measure


def _object_score(x: np.ndarray) -> float:
    mu = float(x.mean())
    sigma = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return 2.0 * mu / (mu * mu + 1.0 + sigma + EPS)


def _s_object(pred: np.ndarray, gt: np.ndarray) -> float:
    u = float(gt.mean())
    o_fg = _object_score(pred[gt])
    o_bg = _object_score(1.0 - pred[~gt])
    return u * o_fg + (1.0 - u) * o_bg


def _ssim(pred: np.ndarray, gt: np.ndarray) -> float:
    n = pred.size
    x = float(pred.mean())
    y = float(gt.mean())
    dx = pred - x
    dy = gt - y
    sx = float((dx * dx).sum()) / (n - 1 + EPS)
    sy = float((dy * dy).sum()) / (n - 1 + EPS)
    sxy = float((dx * dy).sum()) / (n - 1 + EPS)
    alpha = 4.0 * x * y * sxy
    beta = (x * x + y * y) * (sx + sy)
    if alpha != 0:
        return alpha / (beta + EPS)
    return 1.0 if beta == 0 else 0.0


def _centroid_split(gt: np.ndarray) -> tuple[int, int]:
    """Column / row split position: the foreground centroid rounded half-up, 1-based."""
    rows, cols = np.nonzero(gt)
    x = int(np.floor(cols.mean() + 1.0 + 0.5))
    y = int(np.floor(rows.mean() + 1.0 + 0.5))
    return x, y


def _s_region(pred: np.ndarray, gt: np.ndarray) -> float:
    h, w = gt.shape
    x, y = _centroid_split(gt)
    area = h * w
    weights = (x * y / area, (w - x) * y / area, x * (h - y) / area)
    weights = weights + (1.0 - sum(weights),)
    quads = ((slice(0, y), slice(0, x)), (slice(0, y), slice(x, w)),
             (slice(y, h), slice(0, x)), (slice(y, h), slice(x, w)))
    gtf = gt.astype(np.float64)
    total = 0.0
    for wgt, (rs, cs) in zip(weights, quads):
        p = pred[rs, cs]
        if p.size == 0:
            continue
        total += wgt * _ssim(p, gtf[rs, cs])
    return total


def s_measure(pred, gt, alpha: float = S_ALPHA) -> float:
    """Structure measure: object-aware and region-aware similarity, mixed by ``alpha``."""
    pred, gt = check_pair(pred, gt)
    y = float(gt.mean())
    if y == 0.0:
        return 1.0 - float(pred.mean())
    if y == 1.0:
        return float(pred.mean())
    q = alpha * _s_object(pred, gt) + (1.0 - alpha) * _s_region(pred, gt)
    return max(q, 0.0)


# ----------------------------------------------------------------------------
# weighted F-measure


def _gaussian_kernel(size: int = 7, sigma: float = 5.0) -> np.ndarray:
    r = (size - 1) / 2.0
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    k = np.exp(-(xx * xx + yy * yy) / (2.0 * sigma * sigma))
    k[k < EPS * k.max()] = 0.0
    return k / k.sum()


def weighted_f(pred, gt, beta2: float = 1.0) -> tuple[float, bool]:
    """Weighted F-measure; returns (score, empty_gt flag).

    Errors on background pixels borrow the error of their nearest foreground
    pixel before a 7x7, sigma 5 Gaussian smoothing (zero padded). Foreground
    errors take the smaller of raw and smoothed error, and background errors
    are amplified by ``2 - 0.5**(d/5)`` with d the distance to the foreground.
    """
    pred, gt = check_pair(pred, gt)
    if not gt.any():
        return 0.0, True
    err = np.abs(pred - gt)
    dist, idx = ndimage.distance_transform_edt(~gt, return_indices=True)
    et = err[idx[0], idx[1]]
    ea = ndimage.correlate(et, _gaussian_kernel(), mode="constant", cval=0.0)
    min_e = np.where(gt & (ea < err), ea, err)
    b = np.where(gt, 1.0, 2.0 - np.exp(np.log(0.5) / 5.0 * dist))
    ew = min_e * b
    tpw = float(gt.sum()) - float(ew[gt].sum())
    fpw = float(ew[~gt].sum())
    recall = 1.0 - float(ew[gt].mean())
    precision = tpw / (EPS + tpw + fpw)
    q = (1.0 + beta2) * recall * precision / (EPS + recall + beta2 * precision)
    return float(q), False


# ----------------------------------------------------------------------------
# aggregate records

SCORE_COLUMNS = ("mae", "f_adp", "f_mean", "f_max", "e_adp", "e_mean", "e_max", "s_measure", "f_weighted")


@dataclass
class SaliencyScores:
    mae: float
    f_adp: float
    f_mean: float
    f_max: float
    e_adp: float
    e_mean: float
    e_max: float
    s_measure: float
    f_weighted: float
    pr_curve: np.ndarray = field(repr=False)
    f_curve: np.ndarray = field(repr=False)
    empty_gt: bool = False

    def values(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in SCORE_COLUMNS}


def evaluate(pred, gt) -> SaliencyScores:
    pred, gt = check_pair(pred, gt)
    fm = f_measure(pred, gt)
    e_adp, e_mean, e_max = e_measure(pred, gt)
    wf, _ = weighted_f(pred, gt)
    return SaliencyScores(
        mae=mae(pred, gt), f_adp=fm.adaptive, f_mean=fm.mean, f_max=fm.max,
        e_adp=e_adp, e_mean=e_mean, e_max=e_max, s_measure=s_measure(pred, gt), f_weighted=wf,
        pr_curve=np.stack([fm.precision, fm.recall], axis=1), f_curve=fm.curve, empty_gt=fm.empty_gt,
    )


# scores left undefined by an empty ground truth
_NEEDS_POSITIVES = {"f_adp", "f_mean", "f_max", "f_weighted"}


def _mean_scores(items: list[SaliencyScores]) -> dict[str, float]:
    out = {}
    for k in SCORE_COLUMNS:
        vals = [getattr(s, k) for s in items if not (s.empty_gt and k in _NEEDS_POSITIVES)]
        out[k] = float(np.sum(vals) / len(vals)) if vals else float("nan")
    return out


@dataclass
class DirectoryReport:
    per_image: list[tuple[str, SaliencyScores]]
    mean: dict[str, float]
    groups: dict[str, dict[str, dict[str, float]]]
    precision_curve: np.ndarray
    recall_curve: np.ndarray
    f_curve: np.ndarray
    unmatched_pred: list[str]
    unmatched_gt: list[str]
    skipped: list[str]

    @property
    def empty_gt_count(self) -> int:
        return sum(s.empty_gt for _, s in self.per_image)

    def report_tsv(self) -> str:
        head = "\t".join(("name",) + SCORE_COLUMNS + ("empty_gt",))
        rows = [head]
        for name, s in self.per_image:
            rows.append("\t".join([name] + [f"{getattr(s, k):.6f}" for k in SCORE_COLUMNS] + [str(int(s.empty_gt))]))
        rows.append("\t".join(["MEAN"] + [f"{self.mean[k]:.6f}" for k in SCORE_COLUMNS] + [str(self.empty_gt_count)]))
        for attr, table in self.groups.items():
            for letter, vals in table.items():
                cnt = int(vals.get("count", 0))
                rows.append("\t".join([f"{attr}={letter}"] + [f"{vals[k]:.6f}" for k in SCORE_COLUMNS] + [str(cnt)]))
        return "\n".join(rows) + "\n"

    def curves_tsv(self) -> str:
        rows = ["threshold\tprecision\trecall\tf_measure"]
        for t, p, r, f in zip(THRESHOLDS, self.precision_curve, self.recall_curve, self.f_curve):
            rows.append(f"{t:.6f}\t{p:.6f}\t{r:.6f}\t{f:.6f}")
        return "\n".join(rows) + "\n"


_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


def _listing(d: Path) -> dict[str, Path]:
    return {p.stem: p for p in sorted(d.iterdir()) if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES}


def evaluate_directory(pred_dir, gt_dir, group_by: list[str] | None = None,
                       gt_threshold: int = 128) -> DirectoryReport:
    """Score every prediction whose file stem also exists among the masks.

    ``group_by`` names SampleMeta attributes (emergency, category, weather,
    size_class); images whose names do not parse are left out of the groups.
    """
    from . import dataset_tools
    from ._io import read_gray, read_mask

    preds = _listing(Path(pred_dir))
    gts = _listing(Path(gt_dir))
    common = sorted(preds.keys() & gts.keys())
    if not common:
        raise ValueError(f"no matching file names between {pred_dir} and {gt_dir}")
    per_image: list[tuple[str, SaliencyScores]] = []
    skipped = []
    for stem in common:
        try:
            pred = read_gray(preds[stem])
            gt = read_mask(gts[stem], gt_threshold)
            if pred.shape != gt.shape:
                raise ValueError(f"shape {pred.shape} vs {gt.shape}")
        except (OSError, ValueError) as exc:
            log.warning("skipping %s: %s", stem, exc)
            skipped.append(stem)
            continue
        per_image.append((gts[stem].name, evaluate(pred, gt)))
    if not per_image:
        raise ValueError("every matched pair failed to load")
    scored = [s for _, s in per_image]
    valid = [s for s in scored if not s.empty_gt] or scored
    groups: dict[str, dict[str, dict[str, float]]] = {}
    for attr in group_by or []:
        if attr not in dataset_tools.FIELDS:
            raise ValueError(f"unknown grouping attribute {attr!r}; choose from {dataset_tools.FIELDS}")
        buckets: dict[str, list[SaliencyScores]] = {}
        for name, s in per_image:
            try:
                meta = dataset_tools.parse_name(name)
            except ValueError:
                continue
            buckets.setdefault(getattr(meta, attr), []).append(s)
        groups[attr] = {k: {**_mean_scores(v), "count": len(v)} for k, v in sorted(buckets.items())}
    return DirectoryReport(
        per_image=per_image,
        mean=_mean_scores(scored),
        groups=groups,
        precision_curve=np.mean([s.pr_curve[:, 0] for s in valid], axis=0),
        recall_curve=np.mean([s.pr_curve[:, 1] for s in valid], axis=0),
        f_curve=np.mean([s.f_curve for s in valid], axis=0),
        unmatched_pred=sorted(preds.keys() - gts.keys()),
        unmatched_gt=sorted(gts.keys() - preds.keys()),
        skipped=skipped,
    )
