"""Batched pentadiagonal solves in interleaved layout.

Element (system ``b``, row ``r``) of every diagonal and right-hand side lives
at flat index ``r * batch_count + b``; viewed as ``(n, batch_count)`` arrays,
each column is one system and each row sweep touches contiguous memory.

Cyclic systems are solved as a banded core plus a rank-4 corner update
(Woodbury identity). The four auxiliary core solves and the 4x4
capacitance inverses are computed once per operator in
:class:`PentaSolver` and reused for every right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import Grid2D, split_range
from .workers import WorkerPool, nonempty


class ZeroPivotError(ZeroDivisionError):
    def __init__(self, system: int, row: int):
        super().__init__(f"zero pivot in system {system} at row {row}")
        self.system = system
        self.row = row


class SingularCapacitanceError(np.linalg.LinAlgError):
    def __init__(self, system: int):
        super().__init__(f"corner capacitance matrix of system {system} is singular")
        self.system = system


DIAGONALS = ("ll", "l", "d", "u", "uu")


@dataclass
class PentaBatch:
    """``batch_count`` pentadiagonal systems of ``n`` unknowns.

    Diagonals: ``ll`` couples row r to r-2, ``l`` to r-1, ``d`` to r,
    ``u`` to r+1 and ``uu`` to r+2. Entries that fall outside the matrix
    (``ll`` on rows 0-1, ``uu`` on rows n-2..n-1, ...) are ignored unless
    ``periodic``, in which case they wrap around to the opposite end.
    """

    n: int
    batch_count: int
    ll: np.ndarray
    l: np.ndarray
    d: np.ndarray
    u: np.ndarray
    uu: np.ndarray
    periodic: bool = False

    def __post_init__(self) -> None:
        if self.n < 5:
            raise ValueError(f"pentadiagonal systems need n >= 5, got {self.n}")
        if self.batch_count < 1:
            raise ValueError("batch_count must be >= 1")
        size = self.n * self.batch_count
        for name in DIAGONALS:
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64).reshape(-1)
            if arr.size != size:
                raise ValueError(f"diagonal {name} has {arr.size} entries, expected {size}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"diagonal {name} has non-finite entries")
            setattr(self, name, arr)

    def diagonal(self, name: str) -> np.ndarray:
        """``(n, batch_count)`` view of one diagonal."""
        return getattr(self, name).reshape(self.n, self.batch_count)

    @classmethod
    def from_systems(cls, diags, periodic: bool = False) -> "PentaBatch":
        """Build from five ``(batch_count, n)`` arrays ordered ll, l, d, u, uu."""
        arrs = [np.asarray(a, dtype=np.float64) for a in diags]
        batch_count, n = arrs[0].shape
        flat = [np.ascontiguousarray(a.T).reshape(-1) for a in arrs]
        return cls(n, batch_count, *flat, periodic=periodic)

    def to_dense(self, b: int) -> np.ndarray:
        """Dense matrix of system ``b`` (corner entries included when periodic)."""
        n = self.n
        a = np.zeros((n, n))
        for offset, name in zip((-2, -1, 0, 1, 2), DIAGONALS):
            col = self.diagonal(name)[:, b]
            for r in range(n):
                c = r + offset
                if 0 <= c < n:
                    a[r, c] = col[r]
                elif self.periodic:
                    a[r, c % n] += col[r]
        return a


@dataclass
class RhsBatch:
    """Right-hand sides (or solutions) in the interleaved layout."""

    n: int
    batch_count: int
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size != self.n * self.batch_count:
            raise ValueError(
                f"rhs has {self.values.size} entries, expected {self.n * self.batch_count}"
            )

    def systems(self) -> np.ndarray:
        return self.values.reshape(self.n, self.batch_count)


def interleave(g: Grid2D, axis: str = "x") -> RhsBatch:
    """Lay out a grid as a batch of 1D systems along ``axis``.

    ``axis="x"``: ``ny`` systems (rows) of ``nx`` unknowns.
    ``axis="y"``: ``nx`` systems (columns) of ``ny`` unknowns; this is the
    row-major layout itself.
    """
    if axis == "x":
        return RhsBatch(g.nx, g.ny, np.ascontiguousarray(g.field.T).reshape(-1))
    if axis == "y":
        return RhsBatch(g.ny, g.nx, g.values.copy())
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")


def deinterleave(rhs: RhsBatch, axis: str = "x", dx: float = 1.0, dy: float = 1.0) -> Grid2D:
    if axis == "x":
        ny, nx = rhs.batch_count, rhs.n
        return Grid2D(nx, ny, dx, dy, np.ascontiguousarray(rhs.systems().T).reshape(-1))
    if axis == "y":
        return Grid2D(rhs.batch_count, rhs.n, dx, dy, rhs.values.copy())
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")


def build_hyperdiffusion_operator(sigma: float, n: int, batch_count: int, periodic: bool) -> PentaBatch:
    """Rows ``{sigma, -4 sigma, 1 + 6 sigma, -4 sigma, sigma}``, i.e. I + sigma * (1,-4,6,-4,1)."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    size = n * batch_count
    ll = np.full(size, sigma)
    l = np.full(size, -4.0 * sigma)
    d = np.full(size, 1.0 + 6.0 * sigma)
    u = np.full(size, -4.0 * sigma)
    uu = np.full(size, sigma)
    m = PentaBatch(n, batch_count, ll, l, d, u, uu, periodic=periodic)
    if not periodic:
        m.diagonal("ll")[:2] = 0.0
        m.diagonal("l")[:1] = 0.0
        m.diagonal("u")[-1:] = 0.0
        m.diagonal("uu")[-2:] = 0.0
    return m


def _corner_columns(n: int) -> tuple[int, int, int, int]:
    return (0, 1, n - 2, n - 1)


class PentaSolver:
    """Factorised batch operator, reusable across right-hand sides.

    Systems are split into ``num_chunks`` contiguous groups that the pool
    solves concurrently; each system is always solved by the same sequential
    arithmetic, so the split never changes the answer.
    """

    def __init__(self, m: PentaBatch, pool: WorkerPool | None = None, num_chunks: int | None = None):
        self.n = m.n
        self.batch_count = m.batch_count
        self.periodic = m.periodic
        self.pool = pool or WorkerPool(1)
        chunks = num_chunks or self.pool.num_workers
        self.ranges = nonempty(split_range(m.batch_count, min(chunks, m.batch_count)))

        n, nb = m.n, m.batch_count
        diags = {k: m.diagonal(k).copy() for k in DIAGONALS}
        if m.periodic:
            corner = (
                diags["ll"][0].copy(),
                diags["l"][0].copy(),
                diags["ll"][1].copy(),
                diags["uu"][n - 2].copy(),
                diags["u"][n - 1].copy(),
                diags["uu"][n - 1].copy(),
            )
        diags["ll"][:2] = 0.0
        diags["l"][:1] = 0.0
        diags["u"][n - 1 :] = 0.0
        diags["uu"][n - 2 :] = 0.0

        self._e = np.empty((n, nb))
        self._gam = np.empty((n, nb))
        self._mu = np.empty((n, nb))
        self._al = np.empty((n, nb))
        self._be = np.empty((n, nb))

        def factor(b0, b1):
            return _kernels.penta_factor(
                diags["ll"], diags["l"], diags["d"], diags["u"], diags["uu"],
                self._e, self._gam, self._mu, self._al, self._be, b0, b1,
            )

        for sysidx, row in self.pool.run(factor, self.ranges):
            if sysidx >= 0:
                raise ZeroPivotError(sysidx, row)

        self._w = None
        self._kinv = None
        self._y = None
        if m.periodic:
            self._setup_corners(corner)

    def _setup_corners(self, corner) -> None:
        n, nb = self.n, self.batch_count
        ll0, l0, ll1, uun2, un1, uun1 = corner
        # columns of U, one per coupled unknown (0, 1, n-2, n-1)
        w = np.zeros((4, n, nb))
        w[0, n - 2] = uun2
        w[0, n - 1] = un1
        w[1, n - 1] = uun1
        w[2, 0] = ll0
        w[3, 0] = l0
        w[3, 1] = ll1
        for k in range(4):
            self._core_solve(w[k])
        cols = _corner_columns(n)
        # K[k, m] = delta_km + W[m, c_k]
        cap = np.empty((nb, 4, 4))
        for k, c in enumerate(cols):
            for m_ in range(4):
                cap[:, k, m_] = w[m_, c] + (1.0 if k == m_ else 0.0)
        kinv = np.empty_like(cap)
        for b in range(nb):
            try:
                kinv[b] = np.linalg.inv(cap[b])
            except np.linalg.LinAlgError:
                raise SingularCapacitanceError(b) from None
            if not np.all(np.isfinite(kinv[b])) or np.linalg.cond(cap[b]) > 1e14:
                raise SingularCapacitanceError(b)
        self._w = w
        self._kinv = np.ascontiguousarray(kinv.transpose(1, 2, 0))
        self._y = np.zeros((4, nb))

    def _core_solve(self, x: np.ndarray) -> None:
        e, gam, mu, al, be = self._e, self._gam, self._mu, self._al, self._be

        def work(b0, b1):
            _kernels.penta_solve(e, gam, mu, al, be, x, b0, b1)

        self.pool.run(work, self.ranges)

    def solve_inplace(self, x: np.ndarray) -> np.ndarray:
        """Overwrite an ``(n, batch_count)`` array of right-hand sides with solutions."""
        if x.shape != (self.n, self.batch_count):
            raise ValueError(f"rhs shape {x.shape} != {(self.n, self.batch_count)}")
        e, gam, mu, al, be = self._e, self._gam, self._mu, self._al, self._be
        w, kinv, y = self._w, self._kinv, self._y

        if self.periodic:
            def work(b0, b1):
                _kernels.penta_solve(e, gam, mu, al, be, x, b0, b1)
                _kernels.woodbury_correct(x, w, kinv, y, b0, b1)
        else:
            def work(b0, b1):
                _kernels.penta_solve(e, gam, mu, al, be, x, b0, b1)

        self.pool.run(work, self.ranges)
        return x

    def solve(self, rhs) -> RhsBatch:
        vals = rhs.values if isinstance(rhs, RhsBatch) else np.asarray(rhs, dtype=np.float64)
        if vals.size != self.n * self.batch_count:
            raise ValueError(f"rhs has {vals.size} entries, expected {self.n * self.batch_count}")
        x = np.array(vals, dtype=np.float64).reshape(self.n, self.batch_count)
        self.solve_inplace(x)
        return RhsBatch(self.n, self.batch_count, x.reshape(-1))


def solve_batch(m: PentaBatch, rhs, pool: WorkerPool | None = None) -> RhsBatch:
    """Solve non-periodic systems (out-of-band entries ignored)."""
    if m.periodic:
        m = PentaBatch(m.n, m.batch_count, m.ll, m.l, m.d, m.u, m.uu, periodic=False)
    return PentaSolver(m, pool).solve(rhs)


def solve_periodic_batch(m: PentaBatch, rhs, pool: WorkerPool | None = None) -> RhsBatch:
    """Solve cyclic systems via the banded core plus corner correction."""
    if not m.periodic:
        m = PentaBatch(m.n, m.batch_count, m.ll, m.l, m.d, m.u, m.uu, periodic=True)
    return PentaSolver(m, pool).solve(rhs)
