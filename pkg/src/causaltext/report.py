"""Result tables and figures.

Rows are grouped dataset, then setting, then model; each metric gets a
tagged and a connector-form column. Markdown flags the best value per
group in bold; the CSV form carries full-precision floats so aggregates
re-parse losslessly. Figures render the same aggregates as grouped bar
charts, one file per dataset and temperature, next to the tables.
"""

from __future__ import annotations

import csv
import io
from collections import OrderedDict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import RunnerError
from .runner import CellResult

_NATIVE_METRICS = [("rouge_l", "RougeL"), ("meteor_lite", "METEOR-lite"), ("polarity_accuracy", "Polarity")]
_SETTING_ORDER = {"fine-tuned": 0, "few-shot": 1, "zero-shot": 2}


def _metric_columns(results: Sequence[CellResult]) -> list[tuple[str, str]]:
    columns = [(key, title) for key, title in _NATIVE_METRICS]
    external = sorted(
        {name for r in results if r.aggregate for name in r.aggregate.external}
    )
    columns.extend((f"external:{name}", name) for name in external)
    return columns


def _metric_value(result: CellResult, key: str) -> float | None:
    if result.aggregate is None:
        return None
    if key.startswith("external:"):
        return result.aggregate.external.get(key.split(":", 1)[1])
    return getattr(result.aggregate, key)


def _grouped_rows(results: Sequence[CellResult]):
    """One row per (dataset, setting, temperature, model); modes become columns."""
    rows: "OrderedDict[tuple, dict[str, CellResult]]" = OrderedDict()
    for result in results:
        cell = result.cell
        key = (cell.dataset, cell.setting.label(), cell.temperature, cell.model)
        rows.setdefault(key, {})[cell.input_mode] = result
    ordered = sorted(
        rows.items(),
        key=lambda item: (
            item[0][0],
            _SETTING_ORDER.get(item[0][1].split("(")[0], 9),
            item[0][2],
            item[0][3],
        ),
    )
    return ordered


def render_table(results: Sequence[CellResult], layout: str = "markdown") -> str:
    """Render aggregates as a markdown or CSV table (CSV is lossless)."""
    if not results:
        raise RunnerError("no results to tabulate", code="empty-results")
    if layout not in ("markdown", "csv"):
        raise RunnerError(f"unknown layout {layout!r}", code="bad-layout")
    columns = _metric_columns(results)
    rows = _grouped_rows(results)
    header = ["dataset", "setting", "temperature", "model"]
    for _, title in columns:
        header.extend([f"{title} Tags", f"{title} NoTags"])

    cells_text: list[list[str]] = []
    values: list[list[float | None]] = []
    for (dataset, setting, temperature, model), by_mode in rows:
        row_vals: list[float | None] = []
        for key, _ in columns:
            for mode in ("tags", "notags"):
                result = by_mode.get(mode)
                row_vals.append(_metric_value(result, key) if result else None)
        values.append(row_vals)
        cells_text.append([dataset, setting, str(temperature), model])

    if layout == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        for meta, row_vals in zip(cells_text, values):
            writer.writerow(meta + ["" if v is None else repr(v) for v in row_vals])
        return out.getvalue()

    # Markdown: flag the best value per (dataset, setting, temperature) group
    # and per column in bold.
    group_of = [(meta[0], meta[1], meta[2]) for meta in cells_text]
    best: dict[tuple, list[float | None]] = {}
    for group, row_vals in zip(group_of, values):
        current = best.setdefault(group, [None] * len(row_vals))
        for i, v in enumerate(row_vals):
            if v is not None and (current[i] is None or v > current[i]):
                current[i] = v
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for meta, group, row_vals in zip(cells_text, group_of, values):
        rendered = []
        for i, v in enumerate(row_vals):
            if v is None:
                rendered.append("")
            else:
                text = f"{v:.3f}"
                if best[group][i] is not None and v == best[group][i]:
                    text = f"**{text}**"
                rendered.append(text)
        lines.append("| " + " | ".join(meta + rendered) + " |")
    return "\n".join(lines) + "\n"


def parse_table_csv(text: str) -> list[dict]:
    """Re-parse a CSV table into per-row dicts with float metric values."""
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for raw in reader:
        row: dict = {}
        for key, value in raw.items():
            if key in ("dataset", "setting", "model"):
                row[key] = value
            elif value == "" or value is None:
                row[key] = None
            else:
                row[key] = float(value)
        rows.append(row)
    return rows


def render_figures(results: Sequence[CellResult], out_dir: str | Path) -> list[Path]:
    """Write one grouped bar chart per dataset and temperature; return paths."""
    if not results:
        raise RunnerError("no results to plot", code="empty-results")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    columns = _metric_columns(results)
    rows = _grouped_rows(results)
    panels: "OrderedDict[tuple[str, float], list]" = OrderedDict()
    for (dataset, setting, temperature, model), by_mode in rows:
        panels.setdefault((dataset, temperature), []).append((setting, model, by_mode))

    written: list[Path] = []
    for (dataset, temperature), entries in panels.items():
        labels = [f"{setting}\n{model}" for setting, model, _ in entries]
        positions = range(len(entries))
        width = 0.8 / (2 * len(columns))
        fig, ax = plt.subplots(figsize=(max(6.0, 1.8 * len(entries)), 4.0))
        for c, (key, title) in enumerate(columns):
            for m, mode in enumerate(("tags", "notags")):
                offsets = [
                    p + (2 * c + m - len(columns) + 0.5) * width for p in positions
                ]
                heights = []
                for _, _, by_mode in entries:
                    result = by_mode.get(mode)
                    value = _metric_value(result, key) if result else None
                    heights.append(0.0 if value is None else value)
                ax.bar(
                    offsets,
                    heights,
                    width=width,
                    label=f"{title} ({'Tags' if mode == 'tags' else 'NoTags'})",
                    hatch="" if mode == "tags" else "//",
                )
        ax.set_xticks(list(positions))
        ax.set_xticklabels(labels, fontsize=8)
        ax.set_ylim(0.0, 1.05)
        ax.set_ylabel("score")
        ax.set_title(f"{dataset} (temperature {temperature})")
        ax.legend(fontsize=7, ncol=2)
        fig.tight_layout()
        safe_temp = str(temperature).replace(".", "_")
        path = out_dir / f"scores_{dataset}_T{safe_temp}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def write_report(results: Sequence[CellResult], out_dir: str | Path) -> dict[str, list[Path]]:
    """Write table.csv, table.md and the figures into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "table.csv"
    md_path = out_dir / "table.md"
    csv_path.write_text(render_table(results, "csv"), encoding="utf-8")
    md_path.write_text(render_table(results, "markdown"), encoding="utf-8")
    figures = render_figures(results, out_dir)
    return {"tables": [csv_path, md_path], "figures": figures}
