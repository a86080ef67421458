"""Acceptance gate: one pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py``; the lines are repeated in an
"acceptance" section of the terminal summary. Criteria 6 and 7 train and
differentiate the whole network and take a few minutes on one core.
"""

import sys
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from tramba import scan2d
from tramba.dataset_tools import (ALPHABETS, FIELDS, SampleMeta, format_name, parse_name, size_class_of,
                                  stratified_split, synth_dataset)
from tramba.freq import dct2, freq_split, idct2
from tramba.metrics import e_measure, f_measure, mae, s_measure, weighted_f
from tramba.network import TrambaConfig, gradcheck, synthetic_batch, train_toy
from tramba.ssm_kernel import SsmParams, ssm_convolutional, ssm_recurrent, zoh_discretize

SIDES = range(1, 17)
POW2 = (1, 2, 4, 8, 16)
README = Path(__file__).resolve().parent.parent / "README.md"


def sweep():
    """Every scan family plus the baselines over the full shape range."""
    for h in SIDES:
        for w in SIDES:
            yield "cross", (h, w), scan2d.cross_scan((h, w))
            yield "window", (h, w), scan2d.window_scan((h, w), 4)
            yield "dilation", (h, w), scan2d.dilation_scan((h, w), 2)
            yield "helix", (h, w), scan2d.helix_scan((h, w))
            yield "diagonal", (h, w), scan2d.baseline_scan((h, w), "diagonal")
            yield "spiral", (h, w), scan2d.baseline_scan((h, w), "central_spiral")
            if h in POW2 and w in POW2:
                yield "hilbert", (h, w), scan2d.baseline_scan((h, w), "hilbert")


def test_criterion_1_scan_bijectivity(verdict):
    scan2d._helix_cached.cache_clear()
    t0 = time.perf_counter()
    bad, count = [], 0
    for kind, (h, w), s in sweep():
        n = h * w
        for o in s:
            count += 1
            if not (np.array_equal(np.sort(o.order), np.arange(n))
                    and np.array_equal(o.inverse[o.order], np.arange(n))):
                bad.append((kind, h, w))
    elapsed = time.perf_counter() - t0
    verdict(1, not bad and elapsed < 10,
            f"{count} orders are permutations with inverse.order = id ({len(bad)} bad) in {elapsed:.2f}s (< 10s)")


def test_criterion_2_reversal_law(verdict):
    bad = [(kind, shape) for kind, shape, s in sweep()
           if not (np.array_equal(s.backward_a.order, s.forward_a.order[::-1])
                   and np.array_equal(s.backward_b.order, s.forward_b.order[::-1]))]
    verdict(2, not bad, f"backward orders are exact reversals of forwards ({len(bad)} mismatches)")


def test_criterion_3_degeneracy(verdict):
    bad = []
    for h in SIDES:
        for w in SIDES:
            raster = np.arange(h * w)
            if not np.array_equal(scan2d.window_scan((h, w), 1).forward_a.order, raster):
                bad.append(("window", h, w))
            if not np.array_equal(scan2d.dilation_scan((h, w), 1).forward_a.order, raster):
                bad.append(("dilation", h, w))
    verdict(3, not bad, f"window S=1 and dilation R=1 equal raster exactly ({len(bad)} mismatches)")


def test_criterion_4_ssm_equivalence(verdict):
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 9))
        length = int(rng.integers(1, 65))
        p = SsmParams(-np.exp(rng.normal(size=n)), rng.normal(size=n), rng.normal(size=n),
                      float(np.exp(rng.normal() - 1)))
        d = zoh_discretize(p)
        x = rng.normal(size=length)
        worst = max(worst, float(np.abs(ssm_recurrent(d, x) - ssm_convolutional(d, x)).max()))
    elapsed = time.perf_counter() - t0
    verdict(4, worst < 1e-10 and elapsed < 5,
            f"recurrent vs convolutional max deviation {worst:.2e} (< 1e-10) in {elapsed:.2f}s (< 5s)")


def test_criterion_5_dct_suite(verdict):
    rng = np.random.default_rng(0)
    rt = pars = split = 0.0
    for _ in range(100):
        h, w = rng.integers(1, 33, size=2)
        x = rng.normal(size=(h, w))
        spec = dct2(x)
        rt = max(rt, float(np.abs(idct2(spec) - x).max()))
        pars = max(pars, abs(float((x * x).sum() - (spec * spec).sum())))
        lo, hi = freq_split(x, float(rng.uniform(0.05, 1.0)))
        split = max(split, float(np.abs(lo + hi - x).max()))
    verdict(5, max(rt, pars, split) < 1e-9,
            f"round trip {rt:.1e}, Parseval {pars:.1e}, low+high {split:.1e} (each < 1e-9)")


@pytest.mark.slow
def test_criterion_6_gradient_check(verdict):
    cfg = TrambaConfig(input_size=(32, 32), base_channels=8, encoder_depths=(1, 1, 1, 1),
                       decoder_depths=(1, 1, 1))
    t0 = time.perf_counter()
    report = gradcheck(cfg, seed=0)
    elapsed = time.perf_counter() - t0
    name, err = report.worst()
    verdict(6, err < 1e-4 and elapsed < 300,
            f"{len(report.errors)} parameter groups, max relative error {err:.2e} at {name} (< 1e-4) "
            f"in {elapsed:.1f}s (< 300s)")


@pytest.mark.slow
def test_criterion_7_overfit(verdict):
    cfg = TrambaConfig(seed=0)
    assert cfg.input_size == (64, 64)
    imgs, masks = synthetic_batch(4, cfg.input_size, seed=0)
    t0 = time.perf_counter()
    trace = train_toy(cfg, imgs, masks, steps=200)
    elapsed = time.perf_counter() - t0
    ratio = trace[-1] / trace[0]
    verdict(7, ratio < 0.2 and elapsed < 600,
            f"loss {trace[0]:.3f} -> {trace[-1]:.3f}, ratio {ratio:.3f} (< 0.2) in {elapsed:.0f}s (< 600s)")


def test_criterion_8_metric_oracles(verdict):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        p = rng.uniform(size=(8, 8))
        if rng.uniform() < 0.3:
            p = np.round(p * 255) / 255
        g = rng.uniform(size=(8, 8)) < rng.uniform(0.1, 0.7)
        g[rng.integers(8), rng.integers(8)] = True
        fm = f_measure(p, g)
        ours = [mae(p, g), fm.adaptive, fm.mean, fm.max, *e_measure(p, g), s_measure(p, g),
                weighted_f(p, g)[0]]
        ref = [oracles.mae(p, g), *oracles.f_measure(p, g), *oracles.e_measure(p, g), oracles.s_measure(p, g),
               oracles.weighted_f(p, g)]
        worst = max(worst, max(abs(a - b) for a, b in zip(ours, ref)))
    m = mae(np.array([[1, 0.5], [0, 0]]), np.array([[1, 1], [0, 0]]))
    f = f_measure(np.array([[0.9, 0.9, 0.1, 0.1]]), np.array([[1, 0, 0, 0]])).max
    ok = worst < 1e-9 and m == 0.125 and round(f, 4) == 0.5652
    verdict(8, ok, f"100 pairs match the literal transcriptions to {worst:.1e} (< 1e-9); "
                   f"MAE spot {m}, F spot {f:.4f}")


def test_criterion_9_dataset_tooling(verdict):
    rng = np.random.default_rng(9)
    trips = 0
    for _ in range(10_000):
        meta = SampleMeta(*(str(rng.choice(list(ALPHABETS[f]))) for f in FIELDS),
                          id=f"{int(rng.integers(0, 100000)):05d}")
        trips += parse_name(format_name(meta)) == meta
    counts = {"H": 10, "V": 23, "S": 7, "O": 1}
    names = [f"C_{c}_F_L_{i:05d}.jpg" for i, c in enumerate(c for c, n in counts.items() for _ in range(n))]
    train, _ = stratified_split(names, seed=0)
    split_ok = all(abs(sum(parse_name(x).category == c for x in train) - 0.8 * n) <= 1 for c, n in counts.items())
    fixtures = synth_dataset(32, seed=0)
    synth_ok = all(parse_name(s.name).size_class == size_class_of(s.mask) for s in fixtures)
    verdict(9, trips == 10_000 and split_ok and synth_ok,
            f"codec round trips {trips}/10000; per-class 8:2 split within 1 item: {split_ok}; "
            f"synthetic names agree with masks: {synth_ok}")


def test_criterion_10_published_scores_out_of_scope(verdict):
    text = README.read_text() if README.exists() else ""
    documented = all(k in text for k in (".8694", ".0076", "out of scope"))
    verdict(10, documented,
            "published benchmark scores (Tramba F_adp .8694, MAE .0076 on TSOD10K-TE) need the private dataset, "
            "pretrained VMamba-B weights and GPU training; README documents them as out of scope and "
            "criteria 1-9 substitute")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
