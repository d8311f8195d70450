"""Result tables, CSV emission and the reproducibility manifest."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


@dataclass
class ResultTable:
    """Fixed column schema plus rows; ``None`` cells are only allowed in failed rows."""

    columns: list[str]
    rows: list[list] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, row):
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, schema has {len(self.columns)}")
        self.rows.append(list(row))

    def column(self, name):
        j = self.columns.index(name)
        return [r[j] for r in self.rows]


def format_cell(value) -> str:
    """Shortest round-trippable text for numbers, empty for missing cells."""
    if value is None:
        return ""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def _format_meta(value) -> str:
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_meta(v) for v in value) + "]"
    return format_cell(value)


def table_to_csv(table: ResultTable) -> str:
    """RFC-4180 CSV (CRLF rows) preceded by a ``#`` metadata block."""
    buf = io.StringIO(newline="")
    for key, value in table.metadata.items():
        buf.write(f"# {key}: {_format_meta(value)}\r\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([format_cell(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a CSV written by :func:`table_to_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def gnuplot_script(csv_name: str, table: ResultTable, x: str, ys: list[str]) -> str:
    """A minimal gnuplot script plotting ``ys`` against ``x`` from the CSV."""
    cols = {name: i + 1 for i, name in enumerate(table.columns)}
    plots = ", ".join(f"'{csv_name}' using {cols[x]}:{cols[y]} with linespoints title '{y}'" for y in ys)
    return (
        "set datafile separator ','\n"
        "set datafile commentschars '#'\n"
        "set key autotitle columnhead\n"
        f"set xlabel '{x}'\n"
        f"plot {plots}\n"
    )


def manifest(document: dict, derived: dict | None = None, kind: str = "config") -> dict:
    out = {"ioncorr_version": __version__, kind: document}
    if derived:
        out["derived"] = derived
    return out


class OutputWriter:
    """Single writer for every file a run produces; records what it wrote."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.written: list[Path] = []

    def _write(self, name, text):
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        self.written.append(path)
        return path

    def table(self, stem, table: ResultTable):
        return self._write(f"{stem}.csv", table_to_csv(table))

    def json(self, name, obj):
        return self._write(name, json.dumps(obj, indent=2, sort_keys=False) + "\n")

    def text(self, name, text):
        return self._write(name, text)


__all__ = [
    "OutputWriter",
    "ResultTable",
    "format_cell",
    "gnuplot_script",
    "manifest",
    "read_csv",
    "table_to_csv",
]
