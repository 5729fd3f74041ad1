"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 estimation error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .config import TIERS, ConfigError, load_config
from .errors import DataError, EstimationError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ESTIMATION = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand from resetting flags given before the verb
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="root random seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--tier", choices=TIERS, help="analysis tier")
    common.add_argument("--indicators", help="comma-separated subset of LogReturn,LogVol,CAViaR,CARES")
    common.add_argument("--print-config", action="store_true", help="print the effective configuration and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="spillover", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("ingest", parents=[common], help="build the return panel of a tier")
    sub.add_parser("indicators", parents=[common], help="fit LogVol, CAViaR and CARES per asset")
    sub.add_parser("static", parents=[common], help="full-sample spillover tables")
    sub.add_parser("rolling", parents=[common], help="rolling spillover indices and episode averages")
    sub.add_parser("network", parents=[common], help="pruned networks, communities and the core set")
    rob = sub.add_parser("robustness", parents=[common], help="sweep h, p or sampling frequency")
    rob.add_argument("--sweep", choices=("h", "p", "frequency"), default="h")
    syn = sub.add_parser("synthetic", parents=[common], help="write the demo dataset and its config")
    syn.add_argument("--companies", type=int, default=12)
    syn.add_argument("--length", type=int, default=1300)
    sub.add_parser("run", parents=[common], help="ingest, indicators, static, rolling for the tier")
    return parser


def _config(args):
    cfg = load_config(getattr(args, "config", None))
    over = {k: getattr(args, k, None) for k in ("seed", "out", "tier")}
    if getattr(args, "indicators", None):
        over["indicators"] = tuple(t for t in args.indicators.split(",") if t.strip())
    cfg = cfg.with_overrides(**over)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
    except (ConfigError, ValueError) as exc:
        print(f"spillover: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "print_config", False):
        sys.stdout.write(cfg.to_text())
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    tier = cfg.tier
    try:
        if args.command == "synthetic":
            from .synthetic import make_demo_dataset

            path = make_demo_dataset(cfg.out, n_companies=args.companies, T=args.length, seed=cfg.seed)
            print(path / "config.txt")
        elif args.command == "ingest":
            print(pipeline.cmd_ingest(cfg, tier))
        elif args.command == "indicators":
            pipeline.cmd_indicators(cfg, tier)
        elif args.command == "static":
            for kind, total in pipeline.cmd_static(cfg, tier).items():
                print(f"{tier} {kind}: total spillover {total:.2f}")
        elif args.command == "rolling":
            pipeline.cmd_rolling(cfg, tier)
        elif args.command == "network":
            report = pipeline.cmd_network(cfg, tier)
            print("core: " + (", ".join(report["core"]) if report["core"] else "(empty)"))
        elif args.command == "robustness":
            for kind, rho in pipeline.cmd_robustness(cfg, tier, args.sweep).items():
                print(kind + " " + " ".join(f"{k}:{v:.3f}" for k, v in rho.items()))
        elif args.command == "run":
            pipeline.cmd_ingest(cfg, tier)
            pipeline.cmd_indicators(cfg, tier)
            pipeline.cmd_static(cfg, tier)
            pipeline.cmd_rolling(cfg, tier)
    except (DataError, OSError) as exc:
        print(f"spillover: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as exc:
        print(f"spillover: estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except (ConfigError, ValueError) as exc:
        print(f"spillover: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
