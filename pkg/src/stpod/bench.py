"""Desk-scale timing harness for the decomposition paths and kernel backends.

Timings are the median of several repetitions after one warm-up run, which is
stable enough to expose the scaling regimes of interest: SVD cost quadratic in
the smaller matrix dimension, the speedup from column spacing on tall
matrices, the crossover between the Toeplitz and Hankel routes, and the gap
between the numba kernels and their numpy fallbacks.
"""

from __future__ import annotations

import time

import numpy as np

from . import backend, kernels
from .timeseries import GeneratorSpec, generate
from .decomposition import spacetime_pod, spacetime_pod_toeplitz


def time_callable(fn, reps: int = 5) -> float:
    """Median wall-clock seconds over ``reps`` runs after one warm-up."""
    fn()
    samples = []
    for _ in range(max(1, reps)):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return float(np.median(samples))


def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def bench_svd_width(n_rows: int, m_values, reps: int = 5, seed: int = 0):
    """SVD time against column count at fixed row count (rows > columns)."""
    rng = np.random.Generator(np.random.Philox(seed))
    rows = []
    for m in m_values:
        data = rng.standard_normal((n_rows, m))
        seconds = time_callable(lambda d=data: np.linalg.svd(d, full_matrices=False), reps)
        rows.append({"case": "svd-width", "nd": n_rows, "m": m, "s": 1, "seconds": seconds})
    return rows


def bench_spaced_speedup(n_components: int, d: int, s_values, base_m: int,
                         reps: int = 5, seed: int = 0):
    """Full-Hankel versus spaced-column SVD time on the same underlying series."""
    tau = 10.0
    gen = GeneratorSpec.ou(drift=-1.0 / tau, diffusion=np.sqrt(2.0 / tau), seed=seed)
    length = d + (base_m - 1) * max(int(v) for v in s_values)
    series = generate(gen, length, 1.0)
    rows = []
    for s in sorted({1, *(int(v) for v in s_values)}):
        seconds = time_callable(lambda sp=s: spacetime_pod(series, d, sp), reps)
        m = (length - d) // s + 1
        rows.append({"case": "spaced", "nd": n_components * d, "m": m, "s": s, "seconds": seconds})
    return rows


def bench_toeplitz_vs_hankel(n_components: int, d: int, m_values, reps: int = 5, seed: int = 0):
    """Hankel SVD against Toeplitz eigendecomposition across the Nd/m ratio."""
    tau = 10.0
    gen = GeneratorSpec.ou(
        drift=-np.eye(n_components) / tau,
        diffusion=np.sqrt(2.0 / tau) * np.eye(n_components),
        seed=seed,
    )
    rows = []
    for m in m_values:
        series = generate(gen, m + d - 1, 1.0)
        t_hankel = time_callable(lambda: spacetime_pod(series, d), reps)
        t_toeplitz = time_callable(lambda: spacetime_pod_toeplitz(series, d), reps)
        nd = n_components * d
        rows.append({"case": "hankel", "nd": nd, "m": m, "s": 1, "seconds": t_hankel})
        rows.append({"case": "toeplitz", "nd": nd, "m": m, "s": 1, "seconds": t_toeplitz})
    return rows


def bench_kernels(length: int = 200_000, depth: int = 30, reps: int = 5, seed: int = 0):
    """Numba kernels against their numpy fallbacks on the generator and lag loops."""
    rng = np.random.Generator(np.random.Philox(seed))
    values = rng.standard_normal((1, length))
    noise = rng.standard_normal((3, length))
    transition = np.array([[0.9, 0.05, 0.0], [0.0, 0.85, 0.05], [0.0, 0.0, 0.8]])
    initial = np.zeros(3)
    rows = []
    names = ["numba", "numpy"] if backend.HAS_NUMBA else ["numpy"]
    for name in names:
        with backend.using_backend(name):
            t_lag = time_callable(lambda: kernels.lag_product_sums(values, depth), reps)
            t_rec = time_callable(lambda: kernels.linear_recursion(transition, noise, initial), reps)
        rows.append({"case": f"lag-sums[{name}]", "nd": depth, "m": length, "s": 1, "seconds": t_lag})
        rows.append({"case": f"recursion[{name}]", "nd": 3, "m": length, "s": 1, "seconds": t_rec})
    return rows


def fit_report(rows) -> dict:
    """Fitted log-log slopes and speedups from a list of timing rows."""
    report: dict = {}
    width = [r for r in rows if r["case"] == "svd-width"]
    if len(width) >= 2:
        report["svd_width_slope"] = loglog_slope(
            [r["m"] for r in width], [r["seconds"] for r in width]
        )
    spaced = sorted((r for r in rows if r["case"] == "spaced"), key=lambda r: r["s"])
    if len(spaced) >= 2 and spaced[0]["s"] == 1:
        base = spaced[0]["seconds"]
        report["spaced_speedups"] = {
            str(r["s"]): base / r["seconds"] for r in spaced[1:]
        }
    hankel = {r["m"]: r["seconds"] for r in rows if r["case"] == "hankel"}
    toeplitz = {r["m"]: r["seconds"] for r in rows if r["case"] == "toeplitz"}
    shared = sorted(set(hankel) & set(toeplitz))
    if shared:
        report["toeplitz_over_hankel"] = {str(m): toeplitz[m] / hankel[m] for m in shared}
    kernel_rows = [r for r in rows if "[" in r["case"]]
    if kernel_rows:
        by_case = {r["case"]: r["seconds"] for r in kernel_rows}
        for stem in ("lag-sums", "recursion"):
            nb, np_ = by_case.get(f"{stem}[numba]"), by_case.get(f"{stem}[numpy]")
            if nb and np_:
                report[f"{stem}_numba_speedup"] = np_ / nb
    return report


def write_rows_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("case,nd,m,s,seconds\n")
        for r in rows:
            fh.write(f"{r['case']},{r['nd']},{r['m']},{r['s']},{r['seconds']!r}\n")
