from __future__ import annotations

import csv
import io
import json
from typing import IO, Iterable

from objlab.engine import RunReport
from objlab.errors import ConfigError
from objlab.store import RestOp, write_trace_jsonl

COLUMNS = [
    "scenario", "workload", "HEAD", "PUT", "COPY", "DELETE", "GET-container", "total",
    "bytes_put", "bytes_got", "bytes_copied", "peak_staged", "cost", "complete",
    # not in the headline table but needed for lossless round trips
    "GET", "HEAD-container", "repeat",
]

_OP_COLUMNS = {
    "HEAD": RestOp.HEAD_OBJECT,
    "PUT": RestOp.PUT_OBJECT,
    "COPY": RestOp.COPY_OBJECT,
    "DELETE": RestOp.DELETE_OBJECT,
    "GET-container": RestOp.GET_CONTAINER,
    "GET": RestOp.GET_OBJECT,
    "HEAD-container": RestOp.HEAD_CONTAINER,
}
_INT_COLUMNS = set(_OP_COLUMNS) | {"total", "bytes_put", "bytes_got", "bytes_copied", "peak_staged", "repeat"}
FORMATS = ("table", "csv", "jsonl")


def report_row(r: RunReport) -> dict:
    t = r.tally
    row = {"scenario": r.scenario, "workload": r.workload}
    for col, op in _OP_COLUMNS.items():
        row[col] = t[op]
    row.update(
        total=t.total(),
        bytes_put=t.bytes_put,
        bytes_got=t.bytes_got,
        bytes_copied=t.bytes_copied,
        peak_staged=t.peak_staged,
        cost=r.cost,
        complete=r.complete,
        repeat=r.repeat,
    )
    return {c: row[c] for c in COLUMNS}


def _cell(value) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_report(reports: Iterable[RunReport], fmt: str = "table") -> str:
    rows = [report_row(r) for r in reports]
    if fmt == "jsonl":
        return "".join(json.dumps(row, sort_keys=False) + "\n" for row in rows)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(v) for k, v in row.items()})
        return buf.getvalue()
    if fmt == "table":
        cells = [COLUMNS] + [[_cell(row[c]) for c in COLUMNS] for row in rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(COLUMNS))]
        lines = []
        for n, r in enumerate(cells):
            lines.append("  ".join(v.ljust(w) if i < 2 else v.rjust(w)
                                   for i, (v, w) in enumerate(zip(r, widths))).rstrip())
            if n == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")


def _typed(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        if k in _INT_COLUMNS:
            out[k] = int(v)
        elif k == "cost":
            out[k] = float(v)
        elif k == "complete":
            out[k] = v if isinstance(v, bool) else v == "yes"
        else:
            out[k] = v
    return out


def parse_csv(text: str) -> list[dict]:
    return [_typed(row) for row in csv.DictReader(io.StringIO(text))]


def parse_jsonl(text: str) -> list[dict]:
    return [_typed(json.loads(line)) for line in text.splitlines() if line.strip()]


def write_traces(reports: Iterable[RunReport], fp: IO[str]) -> None:
    """Store events of every report, tagged with their matrix cell."""
    for r in reports:
        write_trace_jsonl(r.trace, fp, scenario=r.scenario, workload=r.workload, repeat=r.repeat)
