"""``objlab`` command line: run the scenario matrix, dump traces, replay the
example programs against golden traces, and demonstrate the listing hazard."""

from __future__ import annotations

import argparse
import difflib
import sys
from typing import Optional, Sequence

from objlab.errors import ConfigError
from objlab.harness.catalog import get_scenario, run_cell, run_matrix, single_task, three_task
from objlab.harness.config import add_config_flags, load_config, shipped_config
from objlab.harness.report import render_report, write_traces
from objlab.store import RestOp

GOLDEN = {
    "single-task": ("golden_single_task.txt", single_task),
    "three-task": ("golden_three_task.txt", three_task),
}
SINGLE_TASK_TOTAL = 8


def golden_lines(name: str) -> list[str]:
    _, make = GOLDEN[name]
    report = run_cell(make(), get_scenario("Stocator"))
    return [ev.label() for ev in report.trace]


def _matrix(cfg):
    return run_matrix(cfg.workloads, cfg.scenarios, cfg.repeats, cfg.seed, cfg.pricing)


def cmd_run(args) -> int:
    cfg = load_config(args)
    reports = _matrix(cfg)
    sys.stdout.write(render_report(reports, cfg.format))
    if cfg.trace:
        with open(cfg.trace, "w") as fp:
            write_traces(reports, fp)
    return 0


def cmd_trace(args) -> int:
    cfg = load_config(args)
    reports = _matrix(cfg)
    if cfg.trace:
        with open(cfg.trace, "w") as fp:
            write_traces(reports, fp)
    else:
        write_traces(reports, sys.stdout)
    return 0


def cmd_demo(args) -> int:
    cfg = load_config(args, base=shipped_config("hazard.ini"))
    print(f"create_listing_lag={cfg.policy.create_listing_lag} "
          f"delete_listing_lag={cfg.policy.delete_listing_lag}")
    for r in _matrix(cfg):
        if r.wrote_success and not r.complete:
            verdict = "INCOMPLETE OUTPUT behind _SUCCESS"
        elif r.wrote_success:
            verdict = "complete"
        else:
            verdict = "no _SUCCESS"
        print(f"{r.scenario:<12} {r.workload:<20} _SUCCESS={'yes' if r.wrote_success else 'no'} "
              f"readable={r.parts_readable}/{r.expected_parts}  {verdict}")
    return 0


def cmd_golden(args) -> int:
    ok = True
    for name, (filename, _) in GOLDEN.items():
        expected = shipped_config(filename).splitlines()
        actual = golden_lines(name)
        diff = list(difflib.unified_diff(expected, actual, f"golden/{filename}", f"run/{name}", lineterm=""))
        if diff:
            ok = False
            print("\n".join(diff))
        print(f"{name}: {'match' if not diff else 'MISMATCH'} ({len(actual)} events)")
    tally = run_cell(single_task(), get_scenario("Stocator")).tally
    counts = {op.value: tally[op] for op in RestOp if tally[op]}
    total_ok = tally.total() == SINGLE_TASK_TOTAL and tally[RestOp.COPY_OBJECT] == 0
    ok &= total_ok
    print(f"single-task ops: {counts} total={tally.total()} {'ok' if total_ok else 'MISMATCH'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="objlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, help_text in (
        ("run", cmd_run, "run the workload x scenario matrix and print a report"),
        ("trace", cmd_trace, "run the matrix and emit every store event as JSONL"),
        ("demo-inconsistency", cmd_demo, "run the shipped listing-lag schedule and print verdicts"),
    ):
        p = sub.add_parser(name, help=help_text)
        add_config_flags(p)
        p.set_defaults(func=func)
    p = sub.add_parser("golden", help="replay the two example programs against golden traces")
    p.set_defaults(func=cmd_golden)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"objlab: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
