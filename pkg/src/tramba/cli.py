"""Command-line entry point: ``tramba <subcommand> ...``.

Report formats (tab separated, fixed column order):

  eval report   name, mae, f_adp, f_mean, f_max, e_adp, e_mean, e_max,
                s_measure, f_weighted, empty_gt; then a MEAN row and one row
                per ``attribute=letter`` group (last column holds the count)
  eval curves   threshold, precision, recall, f_measure
  train trace   step, loss
  gradcheck     group, analytic, numeric, rel_error

Relative output paths land under $TRAMBA_OUTPUT_DIR when it is set.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import scan2d
from ._io import atomic_write, resolve_output

log = logging.getLogger("tramba")


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(resolve_output(out), text)


# ----------------------------------------------------------------------------
# subcommands


def cmd_scan_dump(args) -> int:
    kind = "central_spiral" if args.kind == "spiral" else args.kind
    s = scan2d.make_scan(kind, (args.h, args.w), window=args.window, rate=args.rate)
    if args.grid:
        blocks = []
        for o in s:
            blocks.append("\n".join(" ".join(str(v) for v in row) for row in o.rank_grid()))
        text = "\n\n".join(blocks) + "\n"
    else:
        text = "".join(" ".join(str(v) for v in o.order) + "\n" for o in s)
    _emit(text, args.out)
    return 0


def cmd_ssm_check(args) -> int:
    from .ssm_kernel import SsmParams, ssm_convolutional, ssm_recurrent, zoh_discretize

    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.trials):
        n = int(rng.integers(1, args.dstate + 1))
        length = int(rng.integers(1, args.l + 1))
        p = SsmParams(-np.exp(rng.normal(size=n)), rng.normal(size=n), rng.normal(size=n),
                      float(np.exp(rng.normal() - 1)))
        d = zoh_discretize(p)
        x = rng.normal(size=length)
        worst = max(worst, float(np.max(np.abs(ssm_recurrent(d, x) - ssm_convolutional(d, x)))))
    print(f"trials={args.trials} max_len={args.l} max_dstate={args.dstate} max_abs_diff={worst:.3e}")
    return 0 if worst < args.tol else 1


def cmd_freq_check(args) -> int:
    from .freq import dct2, freq_split, idct2

    rng = np.random.default_rng(args.seed)
    rt = pars = split = 0.0
    for _ in range(args.trials):
        h, w = rng.integers(1, args.max_size + 1, size=2)
        x = rng.normal(size=(1, 2, h, w))
        spec = dct2(x)
        rt = max(rt, float(np.abs(idct2(spec) - x).max()))
        pars = max(pars, abs(float((x * x).sum() - (spec * spec).sum())))
        lo, hi = freq_split(x, float(rng.uniform(0.05, 1.0)))
        split = max(split, float(np.abs(lo + hi - x).max()))
    print(f"trials={args.trials} roundtrip={rt:.3e} parseval={pars:.3e} split={split:.3e}")
    return 0 if max(rt, pars, split) < args.tol else 1


def _load_cfg(args):
    from .network import TrambaConfig, load_config

    cfg = load_config(args.config) if args.config else TrambaConfig()
    kw = {}
    if args.size:
        kw["input_size"] = (args.size, args.size)
    if args.base:
        kw["base_channels"] = args.base
    kw["seed"] = args.seed
    return cfg.replace(**kw)


def cmd_gradcheck(args) -> int:
    from .network import gradcheck

    if not args.config and not args.size:
        args.size = 32
    if not args.config and not args.base:
        args.base = 8
    cfg = _load_cfg(args)
    report = gradcheck(cfg, seed=args.seed, eps=args.eps)
    text = "group\tanalytic\tnumeric\trel_error\n" + "\n".join(report.lines()) + "\n"
    if args.out:
        _emit(text, args.out)
    name, err = report.worst()
    print(f"groups={len(report.errors)} max_rel_error={err:.3e} worst={name}")
    return 0 if err < args.tol else 1


def cmd_train_toy(args) -> int:
    from .network import synthetic_batch, train_toy

    cfg = _load_cfg(args)
    imgs, masks = synthetic_batch(args.n_images, cfg.input_size, args.seed)
    trace = train_toy(cfg, imgs, masks, steps=args.steps, lr=args.lr, optimizer=args.optimizer,
                      clip=None if args.clip <= 0 else args.clip,
                      callback=lambda s, v: log.info("step %d loss %.6f", s, v))
    text = "step\tloss\n" + "".join(f"{i}\t{v:.10f}\n" for i, v in enumerate(trace))
    _emit(text, args.out)
    if trace:
        print(f"initial={trace[0]:.6f} final={trace[-1]:.6f} ratio={trace[-1] / trace[0]:.4f}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    from .metrics import evaluate_directory

    report = evaluate_directory(args.pred, args.gt, group_by=args.group_by)
    for stem in report.unmatched_pred:
        log.warning("prediction without ground truth: %s", stem)
    for stem in report.unmatched_gt:
        log.warning("ground truth without prediction: %s", stem)
    _emit(report.report_tsv(), args.out)
    if args.curves:
        atomic_write(resolve_output(args.curves), report.curves_tsv())
    return 0


def _read_names(args) -> list[str]:
    names = list(args.names or [])
    if args.list:
        names += [ln.strip() for ln in Path(args.list).read_text().splitlines() if ln.strip()]
    if args.dir:
        names += sorted(p.name for p in Path(args.dir).iterdir() if p.is_file())
    return names


def cmd_dataset(args) -> int:
    from . import dataset_tools as dt

    if args.action == "parse":
        rows = ["name\temergency\tcategory\tweather\tsize_class\tid"]
        bad = 0
        for n in _read_names(args):
            try:
                m = dt.parse_name(n)
            except dt.NameParseError as exc:
                print(f"error: {exc}", file=sys.stderr)
                bad += 1
                continue
            rows.append("\t".join([n, m.emergency, m.category, m.weather, m.size_class, m.id]))
        _emit("\n".join(rows) + "\n", args.out)
        return 1 if bad else 0
    if args.action == "split":
        train, test = dt.stratified_split(_read_names(args), ratio=args.ratio, seed=args.seed)
        out_dir = resolve_output(args.out_dir)
        atomic_write(out_dir / "train.txt", "".join(n + "\n" for n in train))
        atomic_write(out_dir / "test.txt", "".join(n + "\n" for n in test))
        print(f"train={len(train)} test={len(test)}")
        return 0
    if args.action == "stat":
        if not args.dir:
            raise ValueError("dataset stat needs --dir pointing at the mask directory")
        paths = sorted(p for p in Path(args.dir).iterdir() if p.is_file())
        stats = dt.compute_stats((p.name, p) for p in paths)
        _emit(stats.to_tsv(), args.out)
        return 0
    if args.action == "synth":
        from ._io import encode_jpeg, encode_png

        out_dir = resolve_output(args.out_dir)
        for s in dt.synth_dataset(args.n, seed=args.seed, size=(args.size, args.size)):
            atomic_write(out_dir / "images" / s.name, encode_jpeg(s.image))
            atomic_write(out_dir / "masks" / (Path(s.name).stem + ".png"), encode_png(s.mask.astype(np.uint8) * 255))
        print(f"wrote {args.n} samples to {out_dir}")
        return 0
    raise ValueError(f"unknown dataset action {args.action!r}")


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tramba", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("scan-dump", help="print the four directional orders of a scan")
    s.add_argument("--kind", required=True, choices=scan2d.SCAN_KINDS)
    s.add_argument("--h", type=int, required=True)
    s.add_argument("--w", type=int, required=True)
    s.add_argument("--window", type=int, default=4)
    s.add_argument("--rate", type=int, default=2)
    s.add_argument("--grid", action="store_true", help="emit visit-rank matrices instead of index lists")
    s.add_argument("--out")
    s.set_defaults(func=cmd_scan_dump)

    s = sub.add_parser("ssm-check", help="recurrent vs convolutional SSM equivalence")
    s.add_argument("--l", type=int, default=64)
    s.add_argument("--dstate", type=int, default=8)
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_ssm_check)

    s = sub.add_parser("freq-check", help="DCT round trip, Parseval and band-split checks")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--max-size", type=int, default=32)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_freq_check)

    for name, func, help_ in (("gradcheck", cmd_gradcheck, "finite-difference check of the model gradient"),
                              ("train-toy", cmd_train_toy, "overfit a few synthetic scenes")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="key = value model configuration file")
        s.add_argument("--size", type=int)
        s.add_argument("--base", type=int)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out")
        s.set_defaults(func=func)
        if name == "gradcheck":
            s.add_argument("--eps", type=float, default=1e-5)
            s.add_argument("--tol", type=float, default=1e-4)
        else:
            s.add_argument("--steps", type=int, default=200)
            s.add_argument("--lr", type=float, default=0.1)
            s.add_argument("--clip", type=float, default=1.0, help="global gradient-norm cap (<= 0 disables)")
            s.add_argument("--optimizer", choices=("gd", "adam"), default="gd")
            s.add_argument("--n-images", type=int, default=4)

    s = sub.add_parser("eval", help="score a prediction directory against masks")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--group-by", action="append", choices=("emergency", "category", "weather", "size_class"))
    s.add_argument("--out")
    s.add_argument("--curves")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("dataset", help="TSOD10K naming, splitting, statistics, fixtures")
    s.add_argument("action", choices=("parse", "split", "stat", "synth"))
    s.add_argument("names", nargs="*")
    s.add_argument("--list", help="file with one name per line")
    s.add_argument("--dir", help="directory whose file names (or masks, for stat) are used")
    s.add_argument("--ratio", type=float, default=0.8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n", type=int, default=16)
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--out")
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_dataset)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return int(args.func(args))
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
