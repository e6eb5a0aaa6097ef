"""Binary grid dumps and step-log CSV.

Layout (little endian): ``b"STFH"``, version u16, n u8, dims u32 x n,
h f64, t f64, and for version 2 an extra lambda f64; then U and V as
row-major f64 arrays.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"STFH"
STEPLOG_COLUMNS = ("step_index", "t", "residual", "iterations", "front_min_radius", "front_max_radius")


class DumpFormatError(ValueError):
    pass


@dataclass
class GridDump:
    U: np.ndarray
    V: np.ndarray
    h: float
    t: float
    lam: float | None = None


def write_dump(path, U, V, h: float, t: float, lam: float | None = None) -> None:
    U = np.ascontiguousarray(U, dtype="<f8")
    V = np.ascontiguousarray(V, dtype="<f8")
    if U.shape != V.shape:
        raise ValueError("U and V must share a shape")
    version = 1 if lam is None else 2
    head = MAGIC + struct.pack("<HB", version, U.ndim) + struct.pack(f"<{U.ndim}I", *U.shape)
    head += struct.pack("<dd", h, t)
    if lam is not None:
        head += struct.pack("<d", lam)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(U.tobytes())
        fh.write(V.tobytes())


def read_dump(path) -> GridDump:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise DumpFormatError(f"{path}: bad magic")
    version, n = struct.unpack_from("<HB", data, 4)
    if version not in (1, 2):
        raise DumpFormatError(f"{path}: unsupported version {version}")
    off = 7
    dims = struct.unpack_from(f"<{n}I", data, off)
    off += 4 * n
    h, t = struct.unpack_from("<dd", data, off)
    off += 16
    lam = None
    if version == 2:
        (lam,) = struct.unpack_from("<d", data, off)
        off += 8
    size = int(np.prod(dims))
    if len(data) != off + 16 * size:
        raise DumpFormatError(f"{path}: payload size mismatch")
    U = np.frombuffer(data, "<f8", size, off).reshape(dims).astype(float)
    V = np.frombuffer(data, "<f8", size, off + 8 * size).reshape(dims).astype(float)
    return GridDump(U, V, h, t, lam)


def write_steplog(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=STEPLOG_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: (int(row[k]) if k in ("step_index", "iterations") else repr(float(row[k]))) for k in STEPLOG_COLUMNS})
