import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table as RichTable

from atep import __version__
from atep.core.command_runner import CommandRunner
from atep.core.config_manager import available_presets
from atep.core.errors import AtepError
from atep.metrics.export import SERIES
from atep.metrics.generalization import Bucket, GeneralizationReport

logger = logging.getLogger("atep")


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=verbose)],
        force=True,
    )


def _parse_override(text: str) -> Dict[str, Any]:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got '{text}'")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return {key: value}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atep",
        description="Co-evolve NEAT walkers and CPPN terrains with transfer between pairs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="start a new run")
    run.add_argument("config", nargs="?", type=Path, help="run config (JSON)")
    run.add_argument("--preset", choices=available_presets(), help="baseline preset layer")
    run.add_argument("--iterations", type=int, help="override run.iterations")
    run.add_argument(
        "--set",
        dest="overrides",
        action="append",
        type=_parse_override,
        default=[],
        metavar="KEY=VALUE",
        help="override a dotted config key, e.g. schedule.n_transfer_iters=5",
    )

    resume = sub.add_parser("resume", help="continue a run from a checkpoint")
    resume.add_argument("checkpoint", type=Path, help="checkpoints/iter_NNNNNN directory")
    resume.add_argument("--iterations", type=int, required=True, help="extra iterations")
    resume.add_argument("--config", type=Path, help="config to resume with (default: run echo)")
    resume.add_argument("--force", action="store_true", help="accept a config hash mismatch")

    gen = sub.add_parser("eval-generalization", help="cross-evaluate solved environments")
    gen.add_argument("run_dirs", nargs="+", type=Path)
    gen.add_argument("--n-envs", type=int, default=10)
    gen.add_argument("--n-runs", type=int, default=30)
    gen.add_argument("--noise-stdev", type=float, default=0.01)
    gen.add_argument("--workers", type=int, default=1)
    gen.add_argument("--out", type=Path, help="report directory (default: cwd)")

    export = sub.add_parser("export", help="write a plot-ready CSV table")
    export.add_argument("run_dir", type=Path)
    export.add_argument("series", help=f"one of: {', '.join(SERIES)}")
    export.add_argument("--env-id", type=int)
    export.add_argument("--out", type=Path, help="output file (default: stdout)")
    return parser


def print_report(report: GeneralizationReport) -> None:
    table = RichTable(title="generalization" + (" (self)" if report.self_generalization else ""))
    table.add_column("method")
    table.add_column("pairs", justify="right")
    for bucket in Bucket:
        table.add_column(bucket.value, justify="right")
    for method in report.methods():
        shares = report.bucket_percentages(method)
        pairs = sum(1 for e in report.entries if e.method == method)
        table.add_row(method, str(pairs), *(f"{shares[b]:.1f}%" for b in Bucket))
    Console(stderr=True).print(table)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    runner = CommandRunner()
    try:
        if args.command == "run":
            overrides: Dict[str, Any] = {}
            for item in args.overrides:
                overrides.update(item)
            runner.run(args.config, args.preset, args.iterations, overrides)
        elif args.command == "resume":
            runner.resume(args.checkpoint, args.iterations, args.config, args.force)
        elif args.command == "eval-generalization":
            report = runner.eval_generalization(
                args.run_dirs,
                args.n_envs,
                args.n_runs,
                args.noise_stdev,
                args.out,
                args.workers,
            )
            print_report(report)
        elif args.command == "export":
            runner.export(args.run_dir, args.series, args.env_id, args.out)
    except AtepError as e:
        logger.error("%s", e)
        return 1
    except KeyboardInterrupt:
        logger.warning("interrupted")
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
