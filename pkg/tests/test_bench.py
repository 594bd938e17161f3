import numpy as np

from stpod.backend import HAS_NUMBA
from stpod.bench import (
    bench_kernels,
    bench_svd_width,
    fit_report,
    loglog_slope,
    time_callable,
    write_rows_csv,
)


def test_time_callable_returns_median_seconds():
    value = time_callable(lambda: sum(range(1000)), reps=3)
    assert value > 0.0


def test_loglog_slope_recovers_power_law():
    x = np.array([10.0, 20.0, 40.0, 80.0])
    assert abs(loglog_slope(x, 3.0 * x**2) - 2.0) < 1e-12


def test_svd_width_rows_and_report(tmp_path):
    rows = bench_svd_width(64, (8, 16, 32), reps=2)
    assert [r["m"] for r in rows] == [8, 16, 32]
    report = fit_report(rows)
    assert np.isfinite(report["svd_width_slope"])
    path = tmp_path / "rows.csv"
    write_rows_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "case,nd,m,s,seconds"
    assert len(lines) == 4


def test_kernel_backend_comparison_rows():
    if not HAS_NUMBA:
        return
    rows = bench_kernels(length=20_000, depth=8, reps=2)
    cases = {r["case"] for r in rows}
    assert {"lag-sums[numba]", "lag-sums[numpy]", "recursion[numba]", "recursion[numpy]"} <= cases
    report = fit_report(rows)
    assert report["lag-sums_numba_speedup"] > 0.0
    assert report["recursion_numba_speedup"] > 0.0
