"""
Line-based tabular format: comma-separated values with a header line and a
units line. Floats are written with ``repr`` so a file re-reads losslessly.
Columns named ``*_counts`` hold non-negative integers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from .errors import SchemaError

UNITS = {
    "pump_power": "mW",
    "alpha2": "1",
    "phase": "rad",
    "T_model": "1",
    "R_model": "1",
    "T_obs": "1",
    "T_fit": "1",
    "residual": "1",
    "ratio_tt_tv": "1",
    "visible_rate": "counts/s",
    "telecom_rate": "counts/s",
}
for _band in ("visible", "telecom"):
    UNITS.update({
        f"{_band}_counts": "counts",
        f"{_band}_expected": "counts",
        f"{_band}_background": "counts",
        f"{_band}_background_sigma": "counts",
        f"{_band}_V": "1",
        f"{_band}_sigma": "1",
        f"{_band}_V_net": "1",
        f"{_band}_V_net_sigma": "1",
        f"{_band}_V_model": "1",
        f"{_band}_V_model_sigma": "1",
    })

Value = Union[int, float]


@dataclass
class Table:
    columns: Tuple[str, ...]
    rows: List[Tuple[Value, ...]]

    @property
    def units(self) -> Tuple[str, ...]:
        return tuple(UNITS[c] for c in self.columns)

    def column(self, name: str) -> np.ndarray:
        try:
            i = self.columns.index(name)
        except ValueError:
            raise SchemaError(f"no column {name!r}") from None
        return np.array([r[i] for r in self.rows])

    def __len__(self):
        return len(self.rows)

    def __eq__(self, other):
        if not isinstance(other, Table):
            return NotImplemented
        if self.columns != other.columns or len(self.rows) != len(other.rows):
            return False
        for a, b in zip(self.rows, other.rows):
            for x, y in zip(a, b):
                if type(x) is not type(y):
                    return False
                if isinstance(x, float) and math.isnan(x) and math.isnan(y):
                    continue
                if x != y:
                    return False
        return True


def _is_count(col: str) -> bool:
    return col.endswith("_counts")


def _format(col: str, value: Value) -> str:
    if _is_count(col):
        return str(int(value))
    return repr(float(value))


def make_table(columns: Sequence[str], rows) -> Table:
    columns = tuple(columns)
    for c in columns:
        if c not in UNITS:
            raise SchemaError(f"unknown column {c!r}")
    clean = []
    for row in rows:
        if len(row) != len(columns):
            raise SchemaError("row length does not match header")
        clean.append(tuple(int(v) if _is_count(c) else float(v) for c, v in zip(columns, row)))
    return Table(columns, clean)


def dumps(table: Table) -> str:
    lines = [",".join(table.columns), ",".join(table.units)]
    for row in table.rows:
        lines.append(",".join(_format(c, v) for c, v in zip(table.columns, row)))
    return "\n".join(lines) + "\n"


def write(table: Table, path: Path) -> None:
    Path(path).write_text(dumps(table))


def loads(text: str) -> Table:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise SchemaError("empty file: header line missing", line=1)
    columns = tuple(c.strip() for c in lines[0].split(","))
    for c in columns:
        if c not in UNITS:
            raise SchemaError(f"unknown column {c!r}", line=1)
    if len(set(columns)) != len(columns):
        raise SchemaError("duplicate column names", line=1)
    if len(lines) < 2:
        raise SchemaError("units line missing", line=2)
    units = tuple(u.strip() for u in lines[1].split(","))
    expected = tuple(UNITS[c] for c in columns)
    if units != expected:
        raise SchemaError(f"units {units} do not match {expected}", line=2)
    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != len(columns):
            raise SchemaError(f"expected {len(columns)} fields, got {len(fields)}", line=lineno)
        row = []
        for col, raw in zip(columns, fields):
            raw = raw.strip()
            if _is_count(col):
                try:
                    v = int(raw)
                except ValueError:
                    raise SchemaError(f"{col}: {raw!r} is not an integer count",
                                      line=lineno) from None
                if v < 0:
                    raise SchemaError(f"{col}: negative count {v}", line=lineno)
            else:
                try:
                    v = float(raw)
                except ValueError:
                    raise SchemaError(f"{col}: {raw!r} is not a number", line=lineno) from None
            row.append(v)
        rows.append(tuple(row))
    return Table(columns, rows)


def ingest(path) -> Table:
    """Read and validate a results or count-data file."""
    return loads(Path(path).read_text())
