"""Command-line entry point ``neugen``.

Exit codes: 0 success (possibly with skipped rows), 1 usage error,
2 I/O error, 3 nothing succeeded (every scene or image failed, or a
render check failed).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import EmptyDataset, NeuGenError
from .metrics import SsimParams
from .pipeline import (DEFAULT_SWEEP_WEIGHTS, EMIT_CHOICES, eval_effect, emit_report,
                       resolve_workers, scan_dataset, sweep_report, transform_batch,
                       validate_weights, weight_sweep)
from .transform import NeuGenConfig

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_ALL_FAILED = 0, 1, 2, 3

log = logging.getLogger("neugen")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _weights(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad weight list {text!r}") from exc


def _report_format(args) -> str:
    if args.format:
        return args.format
    return "csv" if Path(args.report).suffix.lower() == ".csv" else "json"


def _echo(command: str, config: dict) -> None:
    print(f"neugen {__version__} {command}: " + json.dumps(config, sort_keys=True, default=str),
          file=sys.stderr)


def _figure_path(report: str) -> Path:
    p = Path(report)
    return p.with_name(p.stem + ".png")


def cmd_transform(args) -> int:
    cfg = NeuGenConfig(patch_size=args.patch_size, fusion_weight=args.weight)
    _echo("transform", {"in": args.inp, "out": args.out, "emit": args.emit, "depth": args.depth,
                        "patch_size": cfg.patch_size, "weight": cfg.fusion_weight,
                        "workers": resolve_workers()})
    scenes = scan_dataset(args.inp)
    summary = transform_batch(scenes, cfg, args.out, args.emit, depth=args.depth)
    print(f"processed {summary.processed}/{summary.total}, failed {summary.failed}, "
          f"degenerate {len(summary.degenerate)}")
    for key in summary.degenerate:
        print(f"  degenerate: {key}")
    for key, why in summary.failures.items():
        print(f"  failed: {key}: {why}")
    return EXIT_ALL_FAILED if summary.total and summary.processed == 0 else EXIT_OK


def cmd_eval(args) -> int:
    cfg = NeuGenConfig(patch_size=args.patch_size)
    params = SsimParams(window=args.ssim_window)
    fmt = _report_format(args)
    _echo("eval", {"in": args.inp, "report": args.report, "format": fmt, "patch_size": cfg.patch_size,
                   "ssim_window": params.window, "ratio": args.ratio, "workers": resolve_workers()})
    scenes = scan_dataset(args.inp)
    report = eval_effect(scenes, cfg, params, ratio=args.ratio)
    emit_report(report, fmt, args.report)
    if report.rows and not args.no_figures:
        from .plotting import plot_effect
        plot_effect(report, _figure_path(args.report))
    for scene in report.scenes:
        print(f"{scene}: class_ssim original {report.value(scene, 'class_ssim', 'original'):.4f} "
              f"neugen {report.value(scene, 'class_ssim', 'neugen'):.4f} | mean matches original "
              f"{report.value(scene, 'mean_matches', 'original'):.1f} "
              f"neugen {report.value(scene, 'mean_matches', 'neugen'):.1f}")
    for name, why in {**report.skipped, **report.failed}.items():
        print(f"  {name}: {why}")
    return EXIT_OK if report.rows else EXIT_ALL_FAILED


def cmd_sweep(args) -> int:
    try:
        weights = validate_weights(args.weights)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    cfg = NeuGenConfig(patch_size=args.patch_size)
    params = SsimParams(window=args.ssim_window)
    fmt = _report_format(args)
    config = {"in": args.inp, "report": args.report, "format": fmt, "weights": weights,
              "patch_size": cfg.patch_size, "ssim_window": params.window, "ratio": args.ratio}
    _echo("sweep", {**config, "workers": resolve_workers()})
    scenes = scan_dataset(args.inp)
    rows = weight_sweep(scenes, weights, cfg, params, ratio=args.ratio)
    if not rows[0].class_ssim:
        print("no scene could be swept")
        return EXIT_ALL_FAILED
    emit_report(sweep_report(rows, config), fmt, args.report)
    if not args.no_figures:
        from .plotting import plot_sweep
        plot_sweep(rows, _figure_path(args.report))
    for row in rows:
        fid = sum(row.class_ssim.values()) / len(row.class_ssim)
        print(f"w={row.weight:<5g} ssim(original, enhanced) {fid:.4f}  mean match delta {row.mean_match_delta:+.2f}")
    return EXIT_OK


def cmd_render_test(args) -> int:
    from .rendertest import run_render_test

    _echo("render-test", {"out": args.out, "samples": args.samples, "size": args.size})
    checks = run_render_test(args.out, args.samples, args.size)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_ALL_FAILED


def cmd_metrics(args) -> int:
    from .imagecore import load_image
    from .metrics import psnr, ssim

    params = SsimParams(window=args.ssim_window)
    _echo("metrics", {"a": args.a, "b": args.b, "ssim_window": params.window})
    a, b = load_image(args.a), load_image(args.b)
    print(f"ssim {ssim(a, b, params):.6f}")
    print(f"psnr {psnr(a, b):.4f} dB")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import benchmark_stats

    _echo("bench", {"size": args.size, "patch_size": args.patch_size, "repeats": args.repeats})
    res = benchmark_stats(args.size, args.patch_size, repeats=args.repeats)
    print(json.dumps(res, indent=2))
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synthetic import affine_corpus, write_corpus

    _echo("synth", {"out": args.out, "scenes": args.scenes, "variants": args.variants,
                    "size": args.size, "seed": args.seed})
    corpus = affine_corpus(args.scenes, args.variants, args.size, args.seed)
    paths = write_corpus(args.out, corpus)
    print(f"wrote {len(paths)} images in {len(corpus)} scenes under {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="neugen", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"neugen {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("transform", help="write contrast maps and enhanced images")
    t.add_argument("--in", dest="inp", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--patch-size", type=int, default=3)
    t.add_argument("--weight", type=float, default=0.5)
    t.add_argument("--emit", choices=EMIT_CHOICES, default="both")
    t.add_argument("--depth", type=int, choices=(8, 16), default=8)
    t.set_defaults(func=cmd_transform)

    e = sub.add_parser("eval", help="compare originals and contrast maps per scene")
    e.add_argument("--in", dest="inp", required=True)
    e.add_argument("--patch-size", type=int, default=3)
    e.add_argument("--ssim-window", type=int, default=11)
    e.add_argument("--ratio", type=float, default=0.8)
    e.add_argument("--report", required=True)
    e.add_argument("--format", choices=("json", "csv"))
    e.add_argument("--no-figures", action="store_true")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="score enhanced images across fusion weights")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--weights", type=_weights, default=list(DEFAULT_SWEEP_WEIGHTS))
    s.add_argument("--patch-size", type=int, default=3)
    s.add_argument("--ssim-window", type=int, default=11)
    s.add_argument("--ratio", type=float, default=0.8)
    s.add_argument("--report", required=True)
    s.add_argument("--format", choices=("json", "csv"))
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("render-test", help="run the volume-rendering checks")
    r.add_argument("--samples", type=int, default=1024)
    r.add_argument("--size", type=int, default=128)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render_test)

    m = sub.add_parser("metrics", help="SSIM and PSNR for one image pair")
    m.add_argument("--a", required=True)
    m.add_argument("--b", required=True)
    m.add_argument("--ssim-window", type=int, default=11)
    m.set_defaults(func=cmd_metrics)

    b = sub.add_parser("bench", help="time reference vs summed-area-table statistics")
    b.add_argument("--size", type=int, default=1024)
    b.add_argument("--patch-size", type=int, default=15)
    b.add_argument("--repeats", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    y = sub.add_parser("synth", help="write a synthetic affine-intensity corpus")
    y.add_argument("--out", required=True)
    y.add_argument("--scenes", type=int, default=5)
    y.add_argument("--variants", type=int, default=4)
    y.add_argument("--size", type=int, default=96)
    y.add_argument("--seed", type=int, default=0)
    y.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"neugen: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, NotADirectoryError, EmptyDataset, OSError) as exc:
        print(f"neugen: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NeuGenError, ValueError) as exc:
        print(f"neugen: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
