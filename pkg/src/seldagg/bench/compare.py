"""Aggregator comparison tables: overall and per-node improvement over a control."""

from __future__ import annotations

import csv
import io
from typing import Sequence

from ..metrics import Improvement, MetricsReport, improvement_report

COLUMNS = ("aggregator", "nodes", "sed_overall", "sed_per_node", "doa_overall", "doa_per_node", "seld_overall", "seld_per_node")


def compare(
    control: MetricsReport | None,
    variants: Sequence[tuple[str, MetricsReport, int]],
    rounded: bool = False,
) -> list[Improvement]:
    """``rounded`` first rounds every report to the reporting precision, which is
    how improvement columns are derived from printed results."""
    if control is None:
        raise ValueError("a control report is required")
    if not variants:
        raise ValueError("need at least one variant report")
    if rounded:
        control = control.rounded()
    out = []
    for name, report, nodes in variants:
        out.append(improvement_report(control, report.rounded() if rounded else report, nodes, name))
    return out


def comparison_json(rows: Sequence[Improvement]) -> dict:
    return {"columns": list(COLUMNS), "rows": [r.to_dict() for r in rows]}


def comparison_csv(rows: Sequence[Improvement]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.to_dict())
    return buf.getvalue()


def format_table(rows: Sequence[Improvement]) -> str:
    head = f"{'aggregator':<12}{'nodes':>6}{'SED %':>9}{'/node':>8}{'DOA %':>9}{'/node':>8}{'SELD %':>9}{'/node':>8}"
    lines = [head]
    for r in rows:
        lines.append(
            f"{r.name:<12}{r.nodes:>6}{r.sed:>9.2f}{r.sed_per_node:>8.2f}{r.doa:>9.2f}{r.doa_per_node:>8.2f}{r.seld:>9.2f}{r.seld_per_node:>8.2f}"
        )
    return "\n".join(lines)
