"""
Command-line entry point for FunLoRA continual-learning experiments

Subcommands: continual, analyze-rank, importance, nfe-sweep, bounds, report.
"""
import argparse
import sys
from typing import List, Optional

from funlora import __version__
from funlora.config.logging_config import setup_logging
from funlora.controllers.analysis_controller import cmd_analyze_rank, cmd_importance, cmd_nfe_sweep
from funlora.controllers.continual_controller import cmd_bounds, cmd_continual, cmd_report
from funlora.schemas.experiment_schemas import SolverMethod


def _int_list(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", help="output directory (default: $FUNLORA_OUTPUT_ROOT or ./runs)")
    parser.add_argument("--canonical-json", action="store_true",
                        help="sorted keys, no wall-time fields; byte-comparable across reruns")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ...")


def _seeded(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML experiment config (defaults when omitted)")
    parser.add_argument("--seed", type=int, default=None, help="master seed (overrides run.seed)")
    parser.add_argument("--seeds", type=int, default=1, help="run K consecutive seeds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="funlora", description="Functional LoRA class-incremental experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    continual = sub.add_parser("continual", help="run the incremental pipeline and write metrics")
    _seeded(continual)
    _common(continual)

    bounds = sub.add_parser("bounds", help="multitask upper bounds and vanilla-conditioning lower bound")
    _seeded(bounds)
    _common(bounds)

    rank = sub.add_parser("analyze-rank", help="numerical ranks of the adapters in a checkpoint")
    rank.add_argument("--checkpoint", required=True)
    rank.add_argument("--rel-tol", type=float, default=None)
    rank.add_argument("--per-epoch", default=None, help="directory of epoch snapshots")
    _common(rank)

    importance = sub.add_parser("importance", help="layer importance and layer selection")
    importance.add_argument("--checkpoint", required=True)
    importance.add_argument("--strategy", default="top_k:2", help="top_k:K | range:A:B | threshold:T")
    _common(importance)

    sweep = sub.add_parser("nfe-sweep", help="accuracy and sampling time per NFE budget and resample factor")
    sweep.add_argument("--checkpoint", required=True)
    sweep.add_argument("--config")
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--method", choices=[m.value for m in SolverMethod], default=SolverMethod.RK4.value)
    sweep.add_argument("--nfe", type=_int_list, default=[5, 10, 20])
    sweep.add_argument("--factors", type=_int_list, default=[1])
    _common(sweep)

    report = sub.add_parser("report", help="rebuild summary.json and accuracy.csv from metric files")
    _common(report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    canonical = args.canonical_json

    if args.command == "continual":
        return cmd_continual(args.config, seed=args.seed, seeds=args.seeds, out=args.out, canonical=canonical)
    if args.command == "bounds":
        return cmd_bounds(args.config, seed=args.seed, seeds=args.seeds, out=args.out, canonical=canonical)
    if args.command == "analyze-rank":
        return cmd_analyze_rank(args.checkpoint, out=args.out, rel_tol=args.rel_tol, per_epoch=args.per_epoch,
                                canonical=canonical)
    if args.command == "importance":
        return cmd_importance(args.checkpoint, strategy=args.strategy, out=args.out, canonical=canonical)
    if args.command == "nfe-sweep":
        return cmd_nfe_sweep(args.checkpoint, config_path=args.config, method=args.method, nfes=args.nfe,
                             factors=args.factors, seed=args.seed, out=args.out, canonical=canonical)
    return cmd_report(out=args.out, canonical=canonical)


if __name__ == "__main__":
    sys.exit(main())
