"""Command-line entry points.

Exit codes: 0 ok, 2 config/validation error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pipeline
from .errors import ScenarioError, StageFailure
from .scenario_io import load_scenario, write_frame


def _cmd_validate(args) -> int:
    bundle = load_scenario(args.config)
    pop = bundle.population
    print(
        f"ok: {len(bundle.zones)} zones, {bundle.network.n_nodes} nodes, "
        f"{bundle.network.n_links} links, {len(pop.households)} households, "
        f"{len(pop.persons)} persons, {len(pop.jobs)} jobs, "
        f"{len(bundle.specs)} specs, years {bundle.settings.start_year}-{bundle.settings.end_year}"
    )
    return 0


def _cmd_run(args) -> int:
    overrides = {
        "seed": args.seed,
        "years": args.years,
        "threads": args.threads,
        "gap_tol": args.gap_tol,
    }
    result = pipeline.run_scenario(args.config, args.out_dir, overrides)
    for (year, stage), secs in sorted(result.timings.items()):
        print(f"timing {year} {stage}: {secs:.2f}s", file=sys.stderr)
    print(f"manifest: {result.manifest_path}")
    return 0


def _cmd_compare(args) -> int:
    frame = pipeline.compare_scenarios(args.manifest_a, args.manifest_b)
    if args.out:
        write_frame(Path(args.out), frame)
        print(f"wrote {args.out}")
    else:
        print(frame.to_csv(index=False), end="")
    return 0


def _cmd_report(args) -> int:
    print(pipeline.report(args.manifest))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cityloop",
        description="Integrated land use / travel demand / traffic assignment pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load and validate a scenario config")
    p.add_argument("config")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("run", help="run a scenario end to end")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="override global_seed")
    p.add_argument("--years", type=int, default=None, help="number of years to simulate")
    p.add_argument("--threads", type=int, default=None, help="shortest-path worker threads")
    p.add_argument("--gap-tol", type=float, default=None, help="assignment relative-gap tolerance")
    p.add_argument("--out-dir", default="out", help="output root directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="per-year deltas between two finished runs")
    p.add_argument("manifest_a")
    p.add_argument("manifest_b")
    p.add_argument("--out", default=None, help="write the delta table to a CSV")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("report", help="summarize a finished run")
    p.add_argument("manifest")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
