"""Serial vs multi-worker timing of the Cahn-Hilliard stepper.

Only the stepping loop is timed. Building the state, compiling kernels,
starting worker threads and teardown all happen outside the clock, and
nothing inside the loop touches files.
"""

from __future__ import annotations

import builtins
import hashlib
import io
import math
import re
import time
import tracemalloc
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cahn_hilliard import CHParams, Simulation, initial_condition
from .grid import Grid2D


@dataclass(frozen=True)
class BenchRow:
    n: int
    t_serial: float
    t_parallel: float
    speedup: float
    checksum_serial: str
    checksum_parallel: str

    @property
    def identical(self) -> bool:
        return self.checksum_serial == self.checksum_parallel


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    num_workers: int = 1

    @property
    def serial_exponent(self) -> float:
        return fit_exponent([r.n for r in self.rows], [r.t_serial for r in self.rows])

    def to_csv(self) -> str:
        lines = ["N,t_serial,t_parallel,speedup"]
        for r in self.rows:
            lines.append(f"{r.n},{r.t_serial:.6f},{r.t_parallel:.6f},{r.speedup:.4f}")
        return "\n".join(lines) + "\n"


def fit_exponent(ns, times) -> float:
    """Least-squares slope of log(time) against log(N)."""
    if len(ns) < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(times, float)), 1)
    return float(slope)


def checksum(g: Grid2D) -> str:
    return hashlib.sha256(g.values.tobytes()).hexdigest()[:16]


def warm_up() -> None:
    """Compile every kernel the stepper uses on a tiny grid."""
    p = CHParams.with_dt_factor(0.1, nx=8, ny=8, T=1.0)
    for workers in (1, 2):
        with Simulation(p, num_workers=workers, num_tiles=2) as sim:
            sim.advance(2)


def timed_steps(sim: Simulation, num_steps: int) -> float:
    t0 = time.perf_counter()
    sim.advance(num_steps)
    return time.perf_counter() - t0


def bench_params(n: int, T: float = 10.0, dt_factor: float = 0.1, **kw) -> CHParams:
    return CHParams.with_dt_factor(dt_factor, nx=n, ny=n, T=T, **kw)


def bench(
    n_list,
    num_workers: int = 4,
    num_tiles: int | None = None,
    T: float = 10.0,
    dt_factor: float = 0.1,
    log=None,
    **param_kw,
) -> BenchReport:
    """Time stepping to ``T`` for each N with 1 and ``num_workers`` workers."""
    warm_up()
    tiles = num_tiles or num_workers
    report = BenchReport(num_workers=num_workers)
    for n in n_list:
        params = bench_params(n, T, dt_factor, **param_kw)
        c0 = initial_condition(params)
        timings, sums = [], []
        for workers, ntiles in ((1, 1), (num_workers, tiles)):
            sim = Simulation(params, c0, workers, min(ntiles, n))
            timings.append(timed_steps(sim, params.num_steps))
            sums.append(checksum(sim.field))
            sim.close()
        row = BenchRow(n, timings[0], timings[1], timings[0] / timings[1], sums[0], sums[1])
        report.rows.append(row)
        if log is not None:
            log(f"N={n}: serial {row.t_serial:.3f}s, {num_workers} workers {row.t_parallel:.3f}s")
    return report


@dataclass
class TimedRegionAudit:
    steps: int
    grid_bytes: int
    traced_peak_bytes: int
    nrt_allocations: int | None
    file_opens: int


ALLOC_SYMBOL = re.compile(r"@(NRT_MemInfo_alloc\w*|NRT_Allocate\w*|NRT_MemInfo_new\w*)")


def step_kernels() -> dict:
    """Every compiled kernel one time step calls."""
    from numba.core.registry import CPUDispatcher

    from . import _kernels
    from .cahn_hilliard import laplacian_of_cubic

    ks = {n: f for n, f in vars(_kernels).items() if isinstance(f, CPUDispatcher)}
    ks["laplacian_of_cubic"] = laplacian_of_cubic
    return ks


def kernel_allocation_sites(kernels=None) -> dict[str, list[str]]:
    """Heap-allocation calls found in the generated code of each kernel.

    Needs freshly compiled kernels: code loaded from numba's on-disk cache
    cannot be inspected, so run this with an empty ``NUMBA_CACHE_DIR``.
    """
    kernels = step_kernels() if kernels is None else kernels
    sites = {}
    for name, fn in kernels.items():
        if not fn.signatures:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            ir = "".join(fn.inspect_llvm().values())
        sites[name] = sorted(set(ALLOC_SYMBOL.findall(ir)))
    return sites


def audit_timed_region(n: int = 64, num_steps: int = 20, num_workers: int = 1) -> TimedRegionAudit:
    """Run the timed loop under allocation tracing and with file opening trapped.

    ``nrt_allocations`` counts allocations made inside compiled kernels; it
    is only available when the process started with ``NUMBA_NRT_STATS=1``.
    """
    from numba.core.runtime import rtsys

    params = bench_params(n, T=num_steps * 0.1 * 2 * math.pi / n)
    warm_up()
    sim = Simulation(params, num_workers=num_workers, num_tiles=max(1, num_workers))
    sim.advance(1)

    opens = []
    real_open, real_io_open = builtins.open, io.open

    def trap(*args, **kw):
        opens.append(args[:1])
        return real_open(*args, **kw)

    try:
        nrt_before = rtsys.get_allocation_stats().alloc
    except Exception:
        nrt_before = None
    tracemalloc.start()
    base, _ = tracemalloc.get_traced_memory()
    builtins.open = io.open = trap
    try:
        timed_steps(sim, num_steps)
    finally:
        builtins.open, io.open = real_open, real_io_open
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
    nrt = None if nrt_before is None else rtsys.get_allocation_stats().alloc - nrt_before
    sim.close()
    return TimedRegionAudit(num_steps, n * n * 8, peak - base, nrt, len(opens))
