import json
import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from gridsten.bench import BenchReport, BenchRow, bench, checksum, fit_exponent
from gridsten.grid import Grid2D


def test_fit_exponent_recovers_power_law():
    ns = [64, 128, 256]
    assert fit_exponent(ns, [2.0 * n**3 for n in ns]) == pytest.approx(3.0)
    assert np.isnan(fit_exponent([64], [1.0]))


def test_report_csv():
    r = BenchReport([BenchRow(64, 1.0, 0.5, 2.0, "a", "a"), BenchRow(128, 8.0, 4.0, 2.0, "b", "c")], 2)
    text = r.to_csv()
    assert text.splitlines()[0] == "N,t_serial,t_parallel,speedup"
    assert text.endswith("\n")
    assert r.rows[0].identical and not r.rows[1].identical
    assert r.serial_exponent == pytest.approx(3.0)


def test_checksum_is_bitwise():
    g = Grid2D(4, 4, 1.0, 1.0, np.zeros(16))
    h = g.copy()
    h.values[5] = -0.0
    assert checksum(g) == checksum(g.copy())
    assert checksum(g) != checksum(h)


def test_bench_small():
    report = bench([32, 64], num_workers=2, T=0.2)
    assert [r.n for r in report.rows] == [32, 64]
    for r in report.rows:
        assert r.identical
        assert r.t_serial > 0 and r.t_parallel > 0
        assert r.speedup == pytest.approx(r.t_serial / r.t_parallel)


def test_single_worker_speedup_is_about_one():
    report = bench([64], num_workers=1, T=1.0)
    assert 0.5 <= report.rows[0].speedup <= 2.0


AUDIT = textwrap.dedent(
    """
    import json
    from numba import njit
    from gridsten.bench import audit_timed_region, kernel_allocation_sites, warm_up

    @njit
    def allocating(a):
        t = a.copy()
        return t[0]

    import numpy as np
    allocating(np.zeros(3))
    warm_up()
    out = {
        "sites": kernel_allocation_sites(),
        "control": kernel_allocation_sites({"allocating": allocating}),
        "audits": [],
    }
    for n, workers in ((64, 1), (128, 1), (128, 3)):
        a = audit_timed_region(n, 10, workers)
        out["audits"].append([n, a.grid_bytes, a.traced_peak_bytes, a.nrt_allocations, a.file_opens])
    print(json.dumps(out))
    """
)


def test_timed_region_purity(tmp_path):
    env = dict(os.environ, NUMBA_NRT_STATS="1", NUMBA_CACHE_DIR=str(tmp_path / "cache"))
    proc = subprocess.run([sys.executable, "-c", AUDIT], env=env, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    res = json.loads(proc.stdout.splitlines()[-1])
    # the probe does find an allocation when one exists
    assert res["control"]["allocating"]
    # no compiled kernel of the step allocates
    assert res["sites"] and all(not v for v in res["sites"].values()), res["sites"]
    peaks, counts = {}, {}
    for n, grid_bytes, peak, nrt, opens in res["audits"]:
        assert opens == 0
        assert nrt is not None
        peaks.setdefault(n, peak)
        counts.setdefault(n, nrt)
    # Python-side transient memory is a fixed overhead, far below one grid
    assert peaks[128] < 128 * 128 * 8 // 8
    assert peaks[128] <= peaks[64] + 4096
    # compiled-code allocation counts (array argument wrappers) do not grow with N
    assert counts[64] == counts[128]
