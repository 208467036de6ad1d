"""Deterministic text serialization helpers.

Every file this package writes must be byte-reproducible from the same
inputs, so floats are always rendered as their shortest round-trip decimal
(Python ``repr``) and CSVs use a fixed '\\n' line terminator.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence


def fmt(value: object) -> str:
    """Render a cell value; floats get shortest round-trip decimals."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
