"""Field files: a self-describing binary container for one real field on a grid.

Layout (all integers little-endian)::

    bytes 0-7    magic  b"KGFIELD1"
    bytes 8-15   uint64 header length H
    next H bytes UTF-8 JSON header, keys sorted
    rest         n * n float64 ('<f8'), row-major, first index = x1

The header holds ``format`` (=1), ``n``, ``L``, ``dtype``, ``order`` and a free
``meta`` mapping.  Nothing time-dependent is written, so identical inputs give
identical bytes.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .spectral import RealField, make_grid

MAGIC = b"KGFIELD1"
FORMAT_VERSION = 1


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj) -> str:
    """Canonical JSON used for every artifact (sorted keys, full float precision).

    Numpy scalars and arrays are converted to plain Python values.
    """
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True, default=_plain) + "\n"


def save_field(path, field: RealField, meta: dict | None = None) -> None:
    header = {"format": FORMAT_VERSION, "n": field.grid.n, "L": field.grid.L, "dtype": "<f8", "order": "C",
              "meta": meta or {}}
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    data = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(hb)))
        fh.write(hb)
        fh.write(data)


def load_field(path) -> tuple[RealField, dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a field file")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    if header.get("format") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format {header.get('format')!r}")
    n = int(header["n"])
    body = raw[16 + hlen:]
    if len(body) != n * n * 8:
        raise ValueError(f"{path}: expected {n * n * 8} data bytes, found {len(body)}")
    values = np.frombuffer(body, dtype="<f8").reshape(n, n).astype(float)
    return RealField(make_grid(n, float(header["L"])), values), header["meta"]
