"""Multichannel CSV ingestion (ETT-style: one timestamp column plus numeric channels)."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ContractError


def load_csv(path: str | Path, date_column: str | None = "date") -> tuple[np.ndarray, list[str]]:
    """Return ``(values (rows, channels), channel_names)`` in file column order.

    ``date_column`` is dropped when present; pass ``None`` to keep every column.
    """
    path = Path(path)
    with open(path, newline="") as fh:  # missing file -> FileNotFoundError
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ContractError(f"{path}: empty file") from None
        keep = [i for i, name in enumerate(header) if name != date_column]
        names = [header[i] for i in keep]
        rows = []
        for r, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ContractError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
            vals = []
            for i in keep:
                try:
                    vals.append(float(row[i]))
                except ValueError:
                    raise ContractError(
                        f"{path}: cannot parse {row[i]!r} at row {r}, column {header[i]!r}") from None
            rows.append(vals)
    if not rows:
        raise ContractError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64), names


def write_csv(path: str | Path, values: np.ndarray, names: Sequence[str],
              dates: Sequence[str] | None = None, date_column: str = "date") -> None:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(([date_column] if dates is not None else []) + list(names))
        for i, row in enumerate(values):
            cells = [repr(float(v)) for v in row]
            w.writerow(([dates[i]] if dates is not None else []) + cells)
