"""Command-line front-end: design, run, crb, selftest."""
from __future__ import annotations

import argparse
import json
import sys

from .covariance import CovarianceError
from .crb import CrbUndefinedError
from .estimator import EstimationError
from .geometry import DesignError, coarray_report, design_aligned, design_misaligned
from .harness import (ConfigError, crb_curve, emit_results, load_config, run_campaign, to_csv)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _design(args) -> int:
    build = design_aligned if args.kind == "aligned" else design_misaligned
    design = build(args.M, args.G, args.d)
    report = coarray_report(design)
    if args.json:
        print(json.dumps(report, indent=2))
        return EXIT_OK
    print(f"kind={design.kind.value} M1={design.M1} M2={design.M2} G={design.G} d={design.d}")
    for v, pos in enumerate(design.positions):
        print(f"  movement {v}: {list(pos)}")
    print(f"virtual positions: {report['virtual_positions']}")
    lo, hi = report["consecutive_range"]
    print(f"consecutive lags: [{lo}, {hi}] -> {report['consecutive_dof']} DoF "
          f"(closed form {report['closed_form_dof']})")
    return EXIT_OK


def _load(args):
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    for name in ("trials", "workers"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    if getattr(args, "out", None):
        config.output = args.out
    return config


def _run(args) -> int:
    config = _load(args)
    result = run_campaign(config)
    paths = emit_results(result, config.output, args.format)
    sys.stdout.write(to_csv(result))
    for p in paths:
        print(f"wrote {p}", file=sys.stderr)
    return EXIT_OK


def _crb(args) -> int:
    config = _load(args)
    result = crb_curve(config)
    sys.stdout.write(to_csv(result))
    if args.out:
        emit_results(result, args.out, args.format)
    return EXIT_OK


def _selftest(args) -> int:
    from .selftest import run_selftest
    return EXIT_OK if run_selftest() else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fasdoa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="print an array layout and its co-array")
    p.add_argument("--kind", choices=("aligned", "misaligned"), default="aligned")
    p.add_argument("-M", type=int, required=True, help="number of antennas")
    p.add_argument("-G", type=int, required=True, help="number of movements")
    p.add_argument("--d", type=float, default=0.5, help="movement unit in wavelengths")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_design)

    p = sub.add_parser("run", help="run a Monte-Carlo campaign")
    p.add_argument("config", help="TOML campaign file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output path prefix")
    p.add_argument("--format", nargs="+", default=["csv", "json", "dat"],
                   choices=("csv", "json", "dat"))
    p.set_defaults(func=_run)

    p = sub.add_parser("crb", help="bound curve only")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--format", nargs="+", default=["csv", "json"], choices=("csv", "json", "dat"))
    p.set_defaults(func=_crb)

    p = sub.add_parser("selftest", help="run the oracle checks")
    p.set_defaults(func=_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DesignError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EstimationError, CovarianceError, CrbUndefinedError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
