"""Reading and writing count tables as CSV.

Header: ``a1,...,aQ[,l],count``. Levels are literal 0/1, rows may come in
any order and repeated level rows are summed. A ``probability`` column is
accepted in place of (or beside) ``count`` so that probability tables can be
read back as pseudo-counts; ``count`` wins when both are present.
"""
from __future__ import annotations

import csv
import io
import math
import re

import numpy as np

from .errors import DataError
from .tables import CountTable

_LEAF = re.compile(r"a(\d+)$")
_WEIGHTS = ("count", "probability")


def _parse_header(header: list[str]) -> tuple[int, bool, dict]:
    names = [h.strip().lower() for h in header]
    weight_cols = {name: i for i, name in enumerate(names) if name in _WEIGHTS}
    if not weight_cols:
        raise DataError("header needs a 'count' column", line=1)
    level_names = [name for name in names if name not in _WEIGHTS]
    root = bool(level_names) and level_names[-1] == "l"
    leaf_names = level_names[:-1] if root else level_names
    if not leaf_names:
        raise DataError("header names no leaf columns a1..aQ", line=1)
    for q, name in enumerate(leaf_names, start=1):
        match = _LEAF.match(name)
        if not match or int(match.group(1)) != q:
            raise DataError(f"expected column 'a{q}', found {name!r}", line=1)
    if names[: len(level_names)] != level_names:
        raise DataError("level columns must precede the count column", line=1)
    return len(leaf_names), root, weight_cols


def parse_counts(text: str) -> CountTable:
    """Parse CSV text into a :class:`CountTable`."""
    rows = list(csv.reader(io.StringIO(text)))
    while rows and not any(cell.strip() for cell in rows[-1]):
        rows.pop()
    if not rows:
        raise DataError("empty input", line=1)
    Q, root, weight_cols = _parse_header(rows[0])
    width = Q + 1 if root else Q
    weight_at = weight_cols.get("count", weight_cols.get("probability"))
    counts = np.zeros(1 << width)
    for lineno, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            raise DataError("blank row", line=lineno)
        if len(row) != len(rows[0]):
            raise DataError(f"expected {len(rows[0])} fields, got {len(row)}", line=lineno)
        t = 0
        for q in range(width):
            level = row[q].strip()
            if level not in ("0", "1"):
                raise DataError(f"level must be 0 or 1, got {level!r}", line=lineno)
            t |= int(level) << q
        raw = row[weight_at].strip()
        try:
            value = float(raw)
        except ValueError:
            raise DataError(f"count is not a number: {raw!r}", line=lineno) from None
        if not math.isfinite(value) or value < 0:
            raise DataError(f"count must be finite and nonnegative, got {raw!r}", line=lineno)
        counts[t] += value
    if counts.sum() <= 0:
        raise DataError("table has no observations", line=len(rows))
    return CountTable(Q, root, counts)


def read_counts(path) -> CountTable:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_counts(fh.read())


def format_counts(table: CountTable) -> str:
    """Render a table in the CSV schema; integral counts are written without a decimal point."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [f"a{q + 1}" for q in range(table.Q)]
    if table.root_observed:
        header.append("l")
    writer.writerow(header + ["count"])
    width = table.width
    for t, value in enumerate(table.counts):
        levels = [(t >> q) & 1 for q in range(width)]
        value = float(value)
        writer.writerow(levels + [int(value) if value.is_integer() else repr(value)])
    return buf.getvalue()
