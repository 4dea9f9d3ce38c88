"""CSV and Markdown rendering of convergence tables."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .experiments import ConvergenceRecord

CSV_HEADER = ("experiment", "alpha", "M", "error", "order")

_NORM_LABEL = {1: "Linf(L2)", 2: "L1(H1_0)", 3: "L2(L2(boundary))"}


def format_error(x: float) -> str:
    """Three significant digits with a bare exponent: ``6.93e-1``, ``1.46e0``."""
    mant, exp = f"{x:.2e}".split("e")
    return f"{mant}e{int(exp)}"


def format_order(order: float | None) -> str:
    return "" if order is None else f"{order:.3g}"


def to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow((r.experiment, f"{r.alpha:g}", r.M, format_error(r.error), format_order(r.order)))
    return buf.getvalue()


def to_markdown(records) -> str:
    """One row per ``M``, one (error, order) column pair per ``alpha``."""
    experiment = records[0].experiment
    alphas = list(dict.fromkeys(r.alpha for r in records))
    Ms = sorted({r.M for r in records})
    cell = {(r.alpha, r.M): r for r in records}
    label = _NORM_LABEL.get(experiment, "error")
    head = ["M"]
    for a in alphas:
        head += [f"alpha={a:g}: {label}", "Order"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for M in Ms:
        row = [str(M)]
        for a in alphas:
            r = cell.get((a, M))
            row += [format_error(r.error), format_order(r.order) or "--"] if r else ["", ""]
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def emit_tables(records, fmt: str = "csv", path=None) -> str:
    """Render ``records`` and, when ``path`` is given, write them there.
    Returns the rendered text."""
    records = list(records)
    if not records:
        raise ValueError("no convergence records to emit")
    if fmt == "csv":
        text = to_csv(records)
    elif fmt in ("md", "markdown"):
        text = to_markdown(records)
    else:
        raise ValueError(f"unknown table format {fmt!r}")
    if path is not None:
        p = Path(path)
        try:
            p.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write table to {p}: {exc.strerror or exc}") from exc
    return text


def parse_csv(text: str) -> list:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"expected header {','.join(CSV_HEADER)}")
    out = []
    for exp, alpha, M, err, order in rows[1:]:
        out.append(ConvergenceRecord(int(exp), float(alpha), int(M), float(err), float(order) if order else None))
    return out
