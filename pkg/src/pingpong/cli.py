"""Command-line scenario runner.

Exit codes: 0 when the swap completes, 2 when it aborts, 1 on a
configuration error (the message names the offending field).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from .scenario import (
    EXIT_CONFIG,
    PRESETS,
    SWEEP_FIELDS,
    ScenarioError,
    load_scenario,
    run_scenario,
    sweep_aborts,
)

EVENTS_FILE = "events.jsonl"
REPORT_FILE = "report.json"
SWEEP_FILE = "sweep.csv"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pingpong",
        description="Simulate ping-pong swaps over two payment channels.",
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", metavar="PATH", help="scenario JSON file")
    source.add_argument("--preset", metavar="NAME", choices=sorted(PRESETS),
                        help="built-in scenario: %(choices)s")
    source.add_argument("--list-presets", action="store_true", help="print preset names")
    parser.add_argument("--seed", type=int, metavar="U64", help="override the scenario seed")
    parser.add_argument("--out", type=Path, default=Path("out"), metavar="DIR",
                        help="output directory (default: %(default)s)")
    parser.add_argument("--sweep-aborts", action="store_true",
                        help="run every abort point for both parties and write a CSV table")
    parser.add_argument("--batch", type=int, metavar="N",
                        help="run N copies with consecutive seeds, each in its own directory")
    return parser


def write_run(out: Path, report: dict, events: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / EVENTS_FILE).write_text(events)
    (out / REPORT_FILE).write_text(json.dumps(report, indent=2) + "\n")


def _run_one(source: str, seed: int | None, out: Path) -> tuple[int, dict]:
    result = run_scenario(source, {"seed": seed})
    write_run(out, result.report, result.log.to_jsonl())
    return result.exit_code, result.report


def _summary(report: dict) -> str:
    line = (f"{report['scenario']}: {report['phase']} after {report['steps_completed']} steps, "
            f"{report['accepted_updates']} updates, {report['onchain_txs_total']} on-chain txs")
    if report["reason"]:
        line += f" (reason {report['reason']}, step {report['aborted_at']})"
    return line


def _sweep(source: str, seed: int | None, out: Path) -> int:
    scenario = load_scenario(source)
    if seed is not None:
        scenario.seed = seed
    rows = sweep_aborts(scenario)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / SWEEP_FILE, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
        writer.writeheader()
        writer.writerows(r.as_dict() for r in rows)
    worst = max(r.cheater_gain_units for r in rows)
    print(f"{len(rows)} abort points, max cheater gain {worst} micro-unit(s) pre-fee; "
          f"table in {out / SWEEP_FILE}")
    return 0


def _batch(source: str, seed: int | None, out: Path, count: int) -> int:
    base = load_scenario(source).seed if seed is None else seed
    jobs = [(source, base + i, out / f"run-{i:03d}") for i in range(count)]
    with ProcessPoolExecutor() as pool:
        results = list(pool.map(_run_one, *zip(*jobs)))
    for (_, s, path), (code, report) in zip(jobs, results):
        print(f"seed {s}: {_summary(report)} -> {path}")
    return max(code for code, _ in results)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_presets:
        print("\n".join(sorted(PRESETS)))
        return 0
    source = args.preset or args.scenario
    try:
        if args.seed is not None and args.seed < 0:
            raise ScenarioError("seed", "must be unsigned")
        if args.batch is not None and args.batch < 1:
            raise ScenarioError("batch", "must be at least 1")
        if args.sweep_aborts:
            return _sweep(source, args.seed, args.out)
        if args.batch:
            return _batch(source, args.seed, args.out, args.batch)
        code, report = _run_one(source, args.seed, args.out)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(_summary(report))
    print(f"wrote {args.out / REPORT_FILE} and {args.out / EVENTS_FILE}")
    return code


if __name__ == "__main__":
    sys.exit(main())
