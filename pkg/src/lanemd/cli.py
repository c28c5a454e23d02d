"""Command-line interface.

    lanemd run scenario.txt --csv out.csv --summary out.txt

Exit codes: 0 success, 1 invalid input, 2 diverged simulation, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .driver import emit_csv, emit_summary, run_simulation
from .errors import (ConfigurationError, DegenerateDomainError,
                     ParticleOverlapError, ScenarioError,
                     SimulationDivergedError)
from .scenario import parse_scenario
from .tuning import Configuration

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_DIVERGED = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lanemd",
        description="Lennard-Jones MD with lane-patterned kernels and auto-tuning")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario", help="path to the scenario file")
    run.add_argument("--vector-width", type=int, default=None,
                     help="lane count per register (power of two >= 4)")
    run.add_argument("--metric", default=None,
                     help="time | laneops | replay:<file>")
    run.add_argument("--csv", default=None, help="per-iteration CSV output path")
    run.add_argument("--summary", default=None, help="run summary output path")
    run.add_argument("--iterations", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--fixed-config", default=None,
                     metavar="CONTAINER,TRAVERSAL,NEWTON3,PATTERN",
                     help="bypass tuning and run one configuration")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = parse_scenario(args.scenario)
        if args.vector_width is not None:
            spec.vector_width = args.vector_width
            spec.cluster_size = args.vector_width
        if args.metric is not None:
            spec.metric = args.metric
        if args.iterations is not None:
            spec.iterations = args.iterations
        if args.seed is not None:
            spec.seed = args.seed
        if args.csv is not None:
            spec.csv_path = args.csv
        if args.summary is not None:
            spec.summary_path = args.summary
        fixed = Configuration.parse(args.fixed_config) \
            if args.fixed_config else None
    except (ScenarioError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        records, summary = run_simulation(spec, fixed_config=fixed)
    except SimulationDivergedError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        _flush(getattr(exc, "records", []), getattr(exc, "summary", None), spec)
        return EXIT_DIVERGED
    except ParticleOverlapError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ScenarioError, ConfigurationError, DegenerateDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        _flush(records, summary, spec)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"completed {len(records)} iterations, "
          f"{summary.particle_count} particles, "
          f"wall time {summary.wall_time_s:.2f}s")
    return EXIT_OK


def _flush(records, summary, spec) -> None:
    if spec.csv_path and records:
        emit_csv(records, spec.csv_path)
    if spec.summary_path and summary is not None:
        emit_summary(summary, spec.summary_path)


if __name__ == "__main__":
    sys.exit(main())
