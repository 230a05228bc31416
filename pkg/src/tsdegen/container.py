"""Versioned binary container: JSON header + raw float64 arrays + SHA-256 trailer.

Layout::

    magic (4) | format version (u16) | kind (8, ascii, space padded) |
    header length (u64) | header JSON | array payload | sha256 of all preceding bytes

The header is serialized with sorted keys, so writing the same content twice
yields identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import CheckpointError

MAGIC = b"TSDG"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sH8sQ")
_DIGEST = 32


def encode(kind: str, meta: Mapping, arrays: Mapping[str, np.ndarray]) -> bytes:
    entries = []
    chunks = []
    offset = 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset, "nbytes": a.nbytes})
        chunks.append(a.tobytes())
        offset += a.nbytes
    header = json.dumps({"meta": meta, "arrays": entries}, sort_keys=True, separators=(",", ":")).encode()
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, kind.encode().ljust(8)[:8], len(header)) + header + b"".join(chunks)
    return body + hashlib.sha256(body).digest()


def decode(blob: bytes, kind: str | None = None, source: str = "<bytes>") -> tuple[dict, dict[str, np.ndarray]]:
    if len(blob) < _PREFIX.size + _DIGEST:
        raise CheckpointError(f"{source}: file truncated ({len(blob)} bytes)")
    magic, version, raw_kind, hlen = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError(f"{source}: not a tsdegen container (bad magic {magic!r})")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{source}: format version {version} unsupported (expected {FORMAT_VERSION})")
    body, digest = blob[:-_DIGEST], blob[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{source}: checksum mismatch (corrupt or truncated file)")
    found_kind = raw_kind.decode().strip()
    if kind is not None and found_kind != kind:
        raise CheckpointError(f"{source}: expected a {kind!r} container, found {found_kind!r}")
    start = _PREFIX.size
    try:
        header = json.loads(body[start:start + hlen])
    except ValueError as exc:
        raise CheckpointError(f"{source}: unreadable header ({exc})") from None
    payload = body[start + hlen:]
    arrays = {}
    for e in header["arrays"]:
        lo, hi = e["offset"], e["offset"] + e["nbytes"]
        if hi > len(payload):
            raise CheckpointError(f"{source}: array {e['name']!r} extends past end of payload")
        arrays[e["name"]] = np.frombuffer(payload[lo:hi], dtype="<f8").reshape(e["shape"]).astype(np.float64)
    return header["meta"], arrays


def write(path: str | Path, kind: str, meta: Mapping, arrays: Mapping[str, np.ndarray]) -> None:
    Path(path).write_bytes(encode(kind, meta, arrays))


def read(path: str | Path, kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    return decode(path.read_bytes(), kind, str(path))
