"""Deterministic JSON reports and CSV tables with metadata sidecars."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

REPORT_SCHEMA = 1


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and dataclass-ish objects into JSON-ready values."""
    if hasattr(value, "to_dict"):
        return _plain(value.to_dict())
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def canonical_json(obj: Any) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))


def config_hash(obj: Any) -> str:
    """SHA-256 of the sorted-key canonical JSON, so field order never matters."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def content_hash(*parts: bytes | str | np.ndarray) -> str:
    """Git-style blob hash over the concatenated parts."""
    chunks = []
    for p in parts:
        if isinstance(p, np.ndarray):
            p = np.ascontiguousarray(p, dtype="<f8").tobytes()
        elif isinstance(p, str):
            p = p.encode()
        chunks.append(p)
    data = b"".join(chunks)
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _cell(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]],
                meta: dict | None = None) -> Path:
    """Write ``rows`` as CSV plus ``<name>.meta.json`` holding ``meta`` and the table's content hash."""
    path = Path(path)
    rows = [list(r) for r in rows]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    sidecar = dict(meta or {})
    sidecar["table_hash"] = content_hash(path.read_bytes())
    sidecar["rows"] = len(rows)
    side = path.with_suffix(".meta.json")
    side.write_text(json.dumps(_plain(sidecar), sort_keys=True, indent=2) + "\n")
    return side


@dataclass
class ExperimentReport:
    """Everything an experiment produced, minus wall-clock data."""

    kind: str
    config_hash: str
    seeds: list[int]
    parameter_counts: dict[str, Any] = field(default_factory=dict)
    metrics: dict[str, Any] = field(default_factory=dict)
    summary: dict[str, Any] = field(default_factory=dict)
    captures: dict[str, Any] = field(default_factory=dict)
    grids: list[Any] = field(default_factory=list)
    tables: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return _plain({
            "schema": REPORT_SCHEMA,
            "kind": self.kind,
            "config_hash": self.config_hash,
            "seeds": list(self.seeds),
            "parameter_counts": self.parameter_counts,
            "metrics": self.metrics,
            "summary": self.summary,
            "captures": self.captures,
            "grids": self.grids,
            "tables": sorted(self.tables),
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def read(cls, path: str | Path) -> dict:
        return json.loads(Path(path).read_text())
