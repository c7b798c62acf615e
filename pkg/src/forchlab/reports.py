"""Summary tables over the JSON reports of a run directory."""

from __future__ import annotations

import csv
import glob
import io as _io
import os

from .io import read_json

REPORT_DIR = "reports"
COLUMNS = ("id", "status", "margin_min", "detail")


def status_of(rep):
    p = rep.get("pass")
    return "n/a" if p is None else ("pass" if p else "fail")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def summary_rows(out_dir):
    """One row per report file, sorted by check id."""
    paths = sorted(glob.glob(os.path.join(out_dir, REPORT_DIR, "*.json")))
    if not paths:
        raise FileNotFoundError(f"no reports under {os.path.join(out_dir, REPORT_DIR)}")
    rows = []
    for p in paths:
        rep = read_json(p)
        rid = rep.get("id") or rep.get("theorem") or os.path.splitext(os.path.basename(p))[0]
        notes = rep.get("notes") or []
        rows.append({"id": rid, "status": status_of(rep), "margin_min": _fmt(rep.get("margin_min")),
                     "detail": notes[0] if notes else ""})
    return sorted(rows, key=lambda r: r["id"])


def write_summary(out_dir, rows=None):
    """Write ``summary.csv`` and ``summary.md``; returns the rows."""
    rows = summary_rows(out_dir) if rows is None else rows
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
        fh.write(buf.getvalue())
    lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "---|" * len(COLUMNS)]
    for r in rows:
        lines.append("| " + " | ".join(str(r[c]).replace("|", "/") for c in COLUMNS) + " |")
    with open(os.path.join(out_dir, "summary.md"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return rows
