"""Render an :class:`EvalReport` as a markdown table, CSV or JSON.

Rows run None, then partially seen conditions, then unseen ones (each split
into transmission then manipulation), then the per-system average over
every non-None condition that produced an EER. Cells are EER percentages
with two decimals; a trailing `` *`` marks a condition the system declared
as partially seen.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

from .dsp.conditions import MANIPULATION, TRANSMISSION, ConditionKind
from .harness import CellResult, EvalReport

AVERAGE_LABEL = "Average w/o None"
SKIPPED = "skipped"


@dataclass(frozen=True)
class Row:
    section: str
    subgroup: str
    condition: ConditionKind


def ordered_rows(r: EvalReport) -> list[Row]:
    present = set(r.conditions)
    rows = []
    if ConditionKind.NONE in present:
        rows.append(Row("None", "", ConditionKind.NONE))
    for section, pick in (("Partially seen", lambda c: c in r.partially_seen_rows),
                          ("Unseen", lambda c: c not in r.partially_seen_rows)):
        for subgroup, members in (("Transmission", TRANSMISSION), ("Manipulation", MANIPULATION)):
            rows.extend(Row(section, subgroup, c) for c in members if c in present and pick(c))
    return rows


def format_eer(eer: float) -> str:
    return f"{100.0 * eer:.2f}"


class _Notes:
    def __init__(self):
        self.items: list[str] = []

    def ref(self, text: str) -> int:
        if text not in self.items:
            self.items.append(text)
        return self.items.index(text) + 1


def _cell_text(c: CellResult, notes: _Notes | None) -> str:
    if c.eer is None:
        text = SKIPPED
    else:
        text = format_eer(c.eer)
        if c.partially_seen:
            text += " *"
    if notes is not None and c.note:
        text += f" [{notes.ref(f'{c.system} / {c.condition.display_name}: {c.note}')}]"
    return text


def _average_text(r: EvalReport, system: str) -> str:
    avg = r.average(system)
    return "n/a" if avg is None else format_eer(avg)


def render_markdown(r: EvalReport) -> str:
    notes = _Notes()
    out = io.StringIO()
    out.write("| Group | Condition | " + " | ".join(r.systems) + " |\n")
    out.write("|---|---|" + "---:|" * len(r.systems) + "\n")
    for row in ordered_rows(r):
        group = row.section if not row.subgroup else f"{row.section} / {row.subgroup}"
        cells = [_cell_text(r.cell(s, row.condition), notes) for s in r.systems]
        out.write(f"| {group} | {row.condition.display_name} | " + " | ".join(cells) + " |\n")
    out.write(f"| {AVERAGE_LABEL} | | " + " | ".join(_average_text(r, s) for s in r.systems) + " |\n")
    out.write(f"\nEER in %. {r.n_total} trials per cell. "
              "Cells marked * are conditions the system declared as partially seen.\n")
    for s in r.systems:
        excluded = r.excluded(s)
        if excluded:
            names = ", ".join(c.display_name for c in excluded)
            out.write(f"The {s} average leaves out conditions without an EER: {names}.\n")
    if notes.items:
        out.write("\n")
        for i, text in enumerate(notes.items, start=1):
            out.write(f"[{i}] {text}\n")
    return out.getvalue()


def render_csv(r: EvalReport) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["section", "subgroup", "condition", *r.systems])
    for row in ordered_rows(r):
        w.writerow([row.section, row.subgroup, row.condition.value,
                    *(_cell_text(r.cell(s, row.condition), None) for s in r.systems)])
    w.writerow([AVERAGE_LABEL, "", "", *(_average_text(r, s) for s in r.systems)])
    return out.getvalue()


def render_json(r: EvalReport) -> str:
    rows = []
    for row in ordered_rows(r):
        cells = {}
        for s in r.systems:
            c = r.cell(s, row.condition)
            cells[s] = {"eer": c.eer, "tau_star": c.tau_star, "n_trials": c.n_trials,
                        "skipped": c.skipped, "partially_seen": c.partially_seen, "note": c.note}
        rows.append({"section": row.section, "subgroup": row.subgroup,
                     "condition": row.condition.value,
                     "display_name": row.condition.display_name, "cells": cells})
    doc = {"systems": list(r.systems), "n_total": r.n_total, "rows": rows,
           "average_without_none": {s: r.average(s) for s in r.systems},
           "excluded_from_average": {s: [c.value for c in r.excluded(s)] for s in r.systems},
           "failures": list(r.failures)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def render_report(r: EvalReport, fmt: str = "markdown") -> str:
    if fmt == "markdown":
        return render_markdown(r)
    if fmt == "csv":
        return render_csv(r)
    if fmt == "json":
        return render_json(r)
    raise ValueError(f"format must be markdown, csv or json, got {fmt!r}")
