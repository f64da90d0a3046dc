"""CSG1 grid snapshots and diagnostics CSV.

CSG1 layout (little-endian, no padding)::

    b"CSG1" | u32 nx | u32 ny | f64 dx | f64 dy | nx*ny f64 values, row-major
"""

from __future__ import annotations

import csv
import io
import os
import struct
from pathlib import Path
from typing import Iterable

import numpy as np

from .diagnostics import Diagnostics
from .grid import Grid2D

MAGIC = b"CSG1"
_HEADER = struct.Struct("<4sIIdd")
DIAGNOSTICS_HEADER = ("t", "s", "k1_inv")


def fmt(x: float) -> str:
    return f"{x:.17g}"


def write_snapshot(grid: Grid2D, path) -> None:
    header = _HEADER.pack(MAGIC, grid.nx, grid.ny, grid.dx, grid.dy)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(grid.values.astype("<f8", copy=False).tobytes())


def read_snapshot(path) -> Grid2D:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: too short for a CSG1 header")
    magic, nx, ny, dx, dy = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * nx * ny
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    return Grid2D(nx, ny, dx, dy, values)


def format_diagnostics(rows: Iterable[Diagnostics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DIAGNOSTICS_HEADER)
    for r in rows:
        w.writerow((fmt(r.t), fmt(r.s), fmt(r.k1_inv)))
    return buf.getvalue()


def write_diagnostics(rows: Iterable[Diagnostics], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_diagnostics(rows))


def read_diagnostics(path) -> list[Diagnostics]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != DIAGNOSTICS_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [Diagnostics(float(t), float(s), float(k)) for t, s, k in rd]


class FileSink:
    """Streams diagnostics rows to a CSV and snapshots to ``snapshot_dir``."""

    def __init__(self, csv_path, snapshot_dir=None):
        self.csv_path = Path(csv_path)
        self.snapshot_dir = Path(snapshot_dir) if snapshot_dir is not None else None
        if self.snapshot_dir is not None:
            os.makedirs(self.snapshot_dir, exist_ok=True)
        self._fh = open(self.csv_path, "w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(DIAGNOSTICS_HEADER)

    def diagnostics(self, row: Diagnostics) -> None:
        self._writer.writerow((fmt(row.t), fmt(row.s), fmt(row.k1_inv)))

    def snapshot(self, step: int, t: float, grid: Grid2D) -> None:
        if self.snapshot_dir is None:
            return
        write_snapshot(grid, self.snapshot_dir / f"c_{step:08d}.csg")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "FileSink":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
