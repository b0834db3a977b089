"""Binary spectra dump.

Layout: 8-byte magic b"GFLSPEC1", little-endian uint64 count, then `count` pairs of
little-endian float64 (re, im).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"GFLSPEC1"
_HEADER = struct.Struct("<8sQ")


def write_spectrum(path: str | Path, values: np.ndarray) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    vals = np.asarray(values, dtype=np.complex128).ravel()
    pairs = np.empty((vals.size, 2), dtype="<f8")
    pairs[:, 0] = vals.real
    pairs[:, 1] = vals.imag
    with p.open("wb") as f:
        f.write(_HEADER.pack(MAGIC, vals.size))
        f.write(pairs.tobytes())
    return p


def read_spectrum(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    body = raw[_HEADER.size:]
    if len(body) != 16 * count:
        raise ValueError(f"{path}: expected {count} pairs, found {len(body) / 16:g}")
    pairs = np.frombuffer(body, dtype="<f8").reshape(count, 2)
    return pairs[:, 0] + 1j * pairs[:, 1]
