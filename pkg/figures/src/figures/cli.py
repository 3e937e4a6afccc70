"""Command-line figure regeneration from emitted files."""

import argparse
import sys

from . import plots
from .readers import FormatError


def build_parser():
    parser = argparse.ArgumentParser(prog="shapereg-figures")
    sub = parser.add_subparsers(dest="kind", required=True)

    p = sub.add_parser("mode_histogram")
    p.add_argument("--chains", nargs="+", required=True)
    p.add_argument("--mode", type=int, default=0)
    p.add_argument("--field", choices=["p0", "nu"], default="p0")
    p.add_argument("--labels", nargs="*")
    p.add_argument("--manifest")
    p.add_argument("--out", required=True)

    p = sub.add_parser("mean_band")
    p.add_argument("--summary", required=True)
    p.add_argument("--field", choices=["p0", "nu"], default="p0")
    p.add_argument("--truth")
    p.add_argument("--out", required=True)

    p = sub.add_parser("spaghetti")
    p.add_argument("--shapes", required=True)
    p.add_argument("--data")
    p.add_argument("--truth-shape")
    p.add_argument("--count", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sigma2_marginal")
    p.add_argument("--chains", nargs="+", required=True)
    p.add_argument("--labels", nargs="*")
    p.add_argument("--true-values", nargs="*", type=float, default=[])
    p.add_argument("--out", required=True)

    p = sub.add_parser("shape_overlay")
    p.add_argument("--curves", nargs="+", required=True)
    p.add_argument("--labels", nargs="*")
    p.add_argument("--scatter-last", action="store_true")
    p.add_argument("--out", required=True)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        if args.kind == "mode_histogram":
            plots.plot_mode_histogram(
                args.chains, args.mode, args.out, field=args.field,
                labels=args.labels, manifest_path=args.manifest,
            )
        elif args.kind == "mean_band":
            plots.plot_mean_band(args.summary, args.out, field=args.field, truth_path=args.truth)
        elif args.kind == "spaghetti":
            plots.plot_spaghetti(
                args.shapes, args.out, data_path=args.data,
                truth_shape_path=args.truth_shape, count=args.count,
            )
        elif args.kind == "sigma2_marginal":
            plots.plot_sigma2_marginal(
                args.chains, args.out, labels=args.labels, true_values=args.true_values
            )
        elif args.kind == "shape_overlay":
            plots.plot_shape_overlay(
                args.curves, args.out, labels=args.labels, scatter_last=args.scatter_last
            )
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
