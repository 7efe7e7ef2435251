"""Command line entry point.

    nnreach verify --config scenario.json --networks DIR --jobs 4 --out run/
    nnreach report --records run/records.jsonl --bin-arc-ft 500 --out run/report
    nnreach benchmark --out bench/
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional

from .batch import RunConfig, emit_report, parse_cell_range, run_batch
from .benchmark import write_benchmark
from .config import ScenarioError

log = logging.getLogger("nnreach")


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _non_negative(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def _cell_range(text: str):
    try:
        return parse_cell_range(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nnreach", description="Reachability verification of NN-controlled systems.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="verify every partition cell of a scenario")
    v.add_argument("--config", required=True, help="scenario JSON file")
    v.add_argument("--networks", help="directory with the network files (default: next to the config)")
    v.add_argument("--jobs", type=_positive, default=1)
    v.add_argument("--steps", type=_positive, help="integration steps per period (M)")
    v.add_argument("--gamma", type=_positive, help="resize threshold")
    v.add_argument("--order", type=_positive, help="Taylor order")
    v.add_argument("--max-split-depth", type=_non_negative)
    v.add_argument("--out", required=True, help="output directory")
    v.add_argument("--cells", type=_cell_range, metavar="A..B", help="half-open range of cell indices")
    v.add_argument("--dump-tubes", action="store_true", help="also write reachtubes to tubes.jsonl")

    r = sub.add_parser("report", help="per-arc coverage tables from a records file")
    r.add_argument("--records", required=True)
    r.add_argument("--bin-arc-ft", type=float, required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--radius", type=float, help="sensor radius (default: from summary.json)")

    b = sub.add_parser("benchmark", help="write the desk-scale benchmark scenario and networks")
    b.add_argument("--out", required=True)
    b.add_argument("--arcs", type=_positive, default=36)
    b.add_argument("--heading-bins", type=_positive, default=8)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "verify":
            cfg = RunConfig(
                scenario=args.config, out=args.out, networks=args.networks, jobs=args.jobs,
                steps=args.steps, gamma=args.gamma, order=args.order,
                max_split_depth=args.max_split_depth, cells=args.cells, dump_tubes=args.dump_tubes,
            )
            summary = run_batch(cfg)
            json.dump(summary, sys.stdout, indent=2)
            print()
            if not summary["coverageDefined"]:
                log.warning("no cells selected; coverage undefined")
        elif args.command == "report":
            bins, cells = emit_report(args.records, args.bin_arc_ft, args.out, args.radius)
            print(bins)
            print(cells)
        else:
            print(write_benchmark(args.out, arc_count=args.arcs, heading_bin_count=args.heading_bins))
    except (ScenarioError, FileNotFoundError, ValueError) as exc:
        print(f"nnreach: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
