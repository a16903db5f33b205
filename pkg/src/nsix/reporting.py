"""Report emission for experiment grids.

A grid of :class:`~nsix.evaluation.EvalRun` cells is rendered four ways
into an output directory:

* ``report.json`` - the full machine-readable record (stable key order);
* one aligned-column ``.txt`` table per sweep, methods as rows and the
  sweep variable as ascending columns;
* the same tables as ``.csv``;
* one ``.png`` line chart per table comparing methods across the sweep.

When the grid sweeps feature numbers, each perturbation gets its own MAP
and latency tables; when it sweeps perturbations at a fixed feature
number, the perturbation labels become the columns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvalRun
from .scoring import METHOD_ORDER

_FN_FULL_LABEL = "full"


@dataclass(frozen=True)
class ReportTable:
    name: str            # file stem, e.g. "map_none"
    title: str
    value_kind: str      # "map" or "latency_s"
    sweep_name: str      # column axis label
    columns: list[str]
    rows: list[tuple[str, list[float]]]


def _method_sort_key(label: str) -> tuple[int, str]:
    try:
        return (METHOD_ORDER.index(label), label)
    except ValueError:
        return (len(METHOD_ORDER), label)


def _fn_sort_key(fn: int | None) -> tuple[int, int]:
    # Untruncated queries sort after every explicit feature number.
    return (1, 0) if fn is None else (0, fn)


def _fn_label(fn: int | None) -> str:
    return _FN_FULL_LABEL if fn is None else str(fn)


def _slug(label: str) -> str:
    return label.replace(":", "").replace(".", "").replace("+", "-")


def build_tables(runs: list[EvalRun]) -> list[ReportTable]:
    """Group cells into MAP and latency tables with a single sweep axis."""
    if not runs:
        return []
    methods = sorted({r.method.label() for r in runs}, key=_method_sort_key)
    fns = sorted({r.feature_number for r in runs}, key=_fn_sort_key)
    perts = sorted({r.perturbation for r in runs}, key=lambda p: p.sort_key())

    cells = {(r.method.label(), r.feature_number, r.perturbation): r for r in runs}
    tables: list[ReportTable] = []

    def extract(kind: str, run: EvalRun) -> float:
        return run.map_score if kind == "map" else run.latency_mean_s

    if len(perts) > 1 and len(fns) == 1:
        columns = [p.label() for p in perts]
        for kind, noun in (("map", "MAP"), ("latency_s", "mean latency [s]")):
            value = "map" if kind == "map" else "latency"
            rows = [
                (
                    m,
                    [extract(kind, cells[(m, fns[0], p)]) for p in perts],
                )
                for m in methods
            ]
            tables.append(
                ReportTable(
                    name=f"{value}_by_perturbation",
                    title=f"{noun} by perturbation (feature number {_fn_label(fns[0])})",
                    value_kind=kind,
                    sweep_name="perturbation",
                    columns=columns,
                    rows=rows,
                )
            )
        return tables

    columns = [_fn_label(fn) for fn in fns]
    for pert in perts:
        suffix = _slug(pert.label())
        for kind, noun in (("map", "MAP"), ("latency_s", "mean latency [s]")):
            value = "map" if kind == "map" else "latency"
            rows = [
                (
                    m,
                    [extract(kind, cells[(m, fn, pert)]) for fn in fns],
                )
                for m in methods
            ]
            tables.append(
                ReportTable(
                    name=f"{value}_{suffix}",
                    title=f"{noun} by feature number (perturbation {pert.label()})",
                    value_kind=kind,
                    sweep_name="feature number",
                    columns=columns,
                    rows=rows,
                )
            )
    return tables


def format_table(table: ReportTable) -> str:
    """Render a table with aligned columns."""
    precision = 3
    header = [table.sweep_name] + table.columns
    body = [
        [label] + [f"{v:.{precision}f}" for v in values] for label, values in table.rows
    ]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = [table.title]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def format_table_csv(table: ReportTable) -> str:
    lines = [",".join(["method"] + table.columns)]
    for label, values in table.rows:
        lines.append(",".join([label] + [repr(v) for v in values]))
    return "\n".join(lines) + "\n"


def render_figure(table: ReportTable, path: Path) -> None:
    """Line chart: one series per method across the sweep."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    xs = range(len(table.columns))
    for label, values in table.rows:
        ax.plot(xs, values, marker="o", linewidth=1.5, label=label)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(table.columns)
    ax.set_xlabel(table.sweep_name)
    ax.set_ylabel("MAP" if table.value_kind == "map" else "mean latency [s]")
    if table.value_kind == "map":
        ax.set_ylim(-0.05, 1.05)
    ax.set_title(table.title)
    ax.grid(True, linestyle=":", linewidth=0.6, alpha=0.7)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_report(
    runs: list[EvalRun],
    out_dir: str | Path,
    seed: int = 0,
    extra_config: dict | None = None,
) -> list[Path]:
    """Write report.json plus per-table .txt, .csv, and .png files.

    Returns the paths written. JSON output is byte-stable across runs with
    identical inputs except for the timing fields.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    payload = {
        "seed": seed,
        "config": extra_config or {},
        "cells": [r.to_dict() for r in runs],
    }
    report_path = out / "report.json"
    report_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    written.append(report_path)

    for table in build_tables(runs):
        txt = out / f"{table.name}.txt"
        txt.write_text(format_table(table))
        written.append(txt)
        csv = out / f"{table.name}.csv"
        csv.write_text(format_table_csv(table))
        written.append(csv)
        png = out / f"{table.name}.png"
        render_figure(table, png)
        written.append(png)
    return written
