"""Grid storage, index helpers and y-direction tile decomposition."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class BoundaryMode(enum.Enum):
    PERIODIC = "periodic"
    NON_PERIODIC = "nonperiodic"


@dataclass
class Grid2D:
    """Row-major 2D field of float64 values.

    ``values[j * nx + i]`` holds the sample at ``(i * dx, j * dy)``.
    ``field`` is a writable ``(ny, nx)`` view onto the same storage.
    """

    nx: int
    ny: int
    dx: float = 1.0
    dy: float = 1.0
    values: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self.nx}x{self.ny}")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError(f"grid spacings must be positive, got dx={self.dx}, dy={self.dy}")
        if self.values is None:
            self.values = np.zeros(self.nx * self.ny, dtype=np.float64)
        else:
            vals = np.ascontiguousarray(self.values, dtype=np.float64).reshape(-1)
            if vals.size != self.nx * self.ny:
                raise ValueError(
                    f"values has {vals.size} entries, expected {self.nx * self.ny}"
                )
            self.values = vals

    @classmethod
    def from_array(cls, arr, dx: float = 1.0, dy: float = 1.0) -> "Grid2D":
        """Wrap (a copy of) an ``(ny, nx)`` array."""
        arr = np.array(arr, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise ValueError("expected a 2D array shaped (ny, nx)")
        ny, nx = arr.shape
        return cls(nx, ny, dx, dy, arr.reshape(-1))

    @property
    def field(self) -> np.ndarray:
        return self.values.reshape(self.ny, self.nx)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def like(self) -> "Grid2D":
        """Zero grid with the same shape and spacing."""
        return Grid2D(self.nx, self.ny, self.dx, self.dy)

    def copy(self) -> "Grid2D":
        return Grid2D(self.nx, self.ny, self.dx, self.dy, self.values.copy())

    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    def y(self) -> np.ndarray:
        return np.arange(self.ny) * self.dy

    def __getitem__(self, ij):
        i, j = ij
        return self.values[linear_index(i, j, self.nx)]

    def __setitem__(self, ij, value) -> None:
        i, j = ij
        self.values[linear_index(i, j, self.nx)] = value


@dataclass(frozen=True)
class Extents:
    """Points a stencil reaches left/right (x) and top/bottom (y) of its centre."""

    left: int = 0
    right: int = 0
    top: int = 0
    bottom: int = 0

    def __post_init__(self) -> None:
        for name in ("left", "right", "top", "bottom"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"extent {name} must be a non-negative integer, got {v!r}")

    @property
    def width(self) -> int:
        return self.left + self.right + 1

    @property
    def height(self) -> int:
        return self.top + self.bottom + 1

    @property
    def size(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class TilePlan:
    """Contiguous, ordered row ranges ``[j_begin, j_end)`` covering ``[0, ny)``."""

    ny: int
    ranges: tuple[tuple[int, int], ...]
    halo_top: int = 0
    halo_bottom: int = 0

    @property
    def num_tiles(self) -> int:
        return len(self.ranges)

    def sizes(self) -> list[int]:
        return [b - a for a, b in self.ranges]

    def __iter__(self):
        return iter(self.ranges)


def linear_index(i: int, j: int, nx: int) -> int:
    if __debug__:
        if not 0 <= i < nx or j < 0:
            raise IndexError(f"index ({i}, {j}) out of range for nx={nx}")
    return j * nx + i


def wrap(i: int, n: int) -> int:
    if n <= 0:
        raise ValueError(f"period must be positive, got {n}")
    return ((i % n) + n) % n


def transpose(g: Grid2D) -> Grid2D:
    """Swap the x and y axes, spacing included."""
    out = np.ascontiguousarray(g.field.T)
    return Grid2D(g.ny, g.nx, g.dy, g.dx, out.reshape(-1))


def split_range(n: int, parts: int) -> tuple[tuple[int, int], ...]:
    # larger chunks first: n = q * parts + r gives r chunks of q + 1, then q
    q, r = divmod(n, parts)
    ranges = []
    start = 0
    for k in range(parts):
        stop = start + q + (1 if k < r else 0)
        ranges.append((start, stop))
        start = stop
    return tuple(ranges)


def make_tiles(ny: int, num_tiles: int, ext: Extents | None = None) -> TilePlan:
    if not 1 <= num_tiles <= ny:
        raise ValueError(f"num_tiles must lie in [1, {ny}], got {num_tiles}")
    ext = ext or Extents()
    return TilePlan(ny, split_range(ny, num_tiles), ext.top, ext.bottom)
