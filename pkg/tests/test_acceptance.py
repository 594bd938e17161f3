"""Acceptance suite: one test per criterion, each printing a pass line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion alongside its measurements. Every tolerance is pinned here; the
empirical thresholds were confirmed by pilot runs before being frozen.
"""

import filecmp
import time
import warnings

import numpy as np
import pytest
from scipy import linalg

from stpod import (
    GeneratorSpec,
    LagCorrelationSet,
    SnapshotSeries,
    SpodSpec,
    StudyCell,
    StudySpec,
    WeightSpec,
    assemble_block_toeplitz,
    build_embedded,
    canonicalize_modes,
    captured_energy,
    convergence_study,
    cumulative_energy,
    generate,
    hankel_correlation,
    lag_correlations,
    mode_psd,
    mode_similarity,
    psd_peak_fraction,
    same_lag_spread,
    space_only_pod,
    spacetime_pod,
    spod,
    time_averaged_spatial_similarity,
    weighted_svd_modes,
)
from stpod import bench as bench_mod
from stpod.cli import main as cli_main


def _report(criterion, detail, elapsed, budget):
    assert elapsed < budget, f"criterion {criterion} exceeded its {budget}s budget ({elapsed:.1f}s)"
    print(f"CRITERION {criterion:>2} PASS: {detail} [{elapsed:.1f}s < {budget}s]")


def scalar_ou(tau, seed):
    return GeneratorSpec.ou(drift=-1.0 / tau, diffusion=np.sqrt(2.0 / tau), seed=seed)


def test_c01_svd_matches_dense_eigendecomposition():
    """Weighted-SVD modes equal the dense eigendecomposition of (1/m) Y Y^T W."""
    start = time.time()
    rng = np.random.default_rng(20260808)
    checked = 0
    for _ in range(50):
        n = int(rng.integers(1, 6))
        d = int(rng.integers(1, 7))
        m = int(rng.integers(1, 13))
        series = SnapshotSeries(rng.standard_normal((n, d + m - 1)), dt=1.0)
        weight = WeightSpec(rng.uniform(0.5, 2.0, size=n))
        data = build_embedded(series, d, 1)
        assert data.m == m
        result = weighted_svd_modes(data, weight)
        w_vec = weight.expanded(d)
        vals, vecs = linalg.eig((data.values @ data.values.T / data.m) * w_vec[None, :])
        order = np.argsort(vals.real)[::-1]
        vals, vecs = vals.real[order], vecs.real[:, order]
        norms = np.sqrt(np.einsum("ik,i,ik->k", vecs, w_vec, vecs))
        vecs = vecs / norms[None, :]
        for k in range(result.n_modes):
            if result.energies[k] < 1e-8 * result.energies[0]:
                break
            assert mode_similarity(result.modes[:, k], vecs[:, k], w_vec) >= 1.0 - 1e-8
            assert abs(result.energies[k] - vals[k]) <= 1e-8 * vals[0]
            checked += 1
    _report(1, f"50 random instances, {checked} modes at 1e-8", time.time() - start, 10.0)


def test_c02_uniform_weight_returns_left_singular_vectors_bitwise():
    """With W = I the returned modes are bitwise the left singular vectors."""
    start = time.time()
    series = generate(scalar_ou(5.0, seed=12), 400, dt=1.0)
    data = build_embedded(series, 16, 1)
    result = weighted_svd_modes(data)
    u, s, _ = np.linalg.svd(data.values / np.sqrt(data.m), full_matrices=False)
    modes, energies = canonicalize_modes(u, s**2)
    assert np.array_equal(result.modes, modes)
    assert np.array_equal(result.energies, energies)
    _report(2, "modes bitwise equal to lsv of the scaled Hankel matrix",
            time.time() - start, 1.0)


def test_c03_block_toeplitz_exactness_and_hankel_defect():
    """Assembled blocks repeat exactly per lag; the Hankel product's do not."""
    start = time.time()
    rng = np.random.default_rng(7)
    for n, d in ((1, 3), (2, 5), (3, 4), (4, 8)):
        blocks = rng.standard_normal((d, n, n))
        blocks[0] = blocks[0] + blocks[0].T
        lags = LagCorrelationSet(blocks, np.arange(d + 10, 10, -1), dt=1.0)
        corr = assemble_block_toeplitz(lags)
        for i in range(d):
            for j in range(i, d):
                assert np.array_equal(corr.block(i, j), blocks[j - i])
                assert np.array_equal(corr.block(j, i), blocks[j - i].T)
    series = SnapshotSeries(rng.standard_normal((3, 60)), dt=1.0)
    hankel_spread = same_lag_spread(hankel_correlation(build_embedded(series, 6)))
    toeplitz_spread = same_lag_spread(assemble_block_toeplitz(lag_correlations(series, 6)))
    assert hankel_spread > 0.0
    assert toeplitz_spread == 0.0
    _report(3, f"exact block layout; spreads {hankel_spread:.3f} vs {toeplitz_spread}",
            time.time() - start, 5.0)


def test_c04_toeplitz_beats_hankel_and_gap_shrinks():
    """Short-data accuracy: Toeplitz median above Hankel, gap closing with m."""
    start = time.time()
    spec = StudySpec(
        generator=scalar_ou(10.0, seed=0),
        dt=1.0,
        cells=(
            StudyCell("hankel", m=30, d=30),
            StudyCell("toeplitz", m=30, d=30),
            StudyCell("hankel", m=300, d=30),
            StudyCell("toeplitz", m=300, d=30),
        ),
        trials=200,
        seed=2024,
        reference_factor=300,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = convergence_study(spec)
    medians = report.medians
    assert medians[1] > medians[0], "Toeplitz must beat Hankel at m=30"
    gap_small = medians[1] - medians[0]
    gap_large = medians[3] - medians[2]
    assert gap_large < gap_small, "advantage must shrink as m grows at fixed d"
    _report(
        4,
        f"m=30 medians {medians[1]:.3f} > {medians[0]:.3f}; "
        f"gap {gap_small:.3f} -> {gap_large:.3f} at m=300",
        time.time() - start,
        300.0,
    )


def test_c05_spaced_columns_beat_hankel_at_fixed_width():
    """Same column count: decorrelated columns converge at least as fast."""
    start = time.time()
    cells = []
    for m in (25, 50, 100):
        cells.append(StudyCell("hankel", m=m, d=21))
        cells.append(StudyCell("spaced", m=m, d=21, s=10))
    spec = StudySpec(
        generator=scalar_ou(10.0, seed=0),
        dt=1.0,
        cells=tuple(cells),
        trials=100,
        seed=77,
        reference_factor=300,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = convergence_study(spec)
    wins = sum(
        report.medians[2 * i + 1] >= report.medians[2 * i] for i in range(3)
    )
    assert wins >= 3, f"spaced columns won only {wins} of 3 cells"
    # measured column-count overhead of the Hankel route (open-question report)
    hankel_m = {cells[2 * i].m: report.medians[2 * i] for i in range(3)}
    spaced_25 = report.medians[1]
    overhead = next((m / 25 for m in sorted(hankel_m) if hankel_m[m] >= spaced_25), np.inf)
    assert overhead > 1.0
    _report(
        5,
        f"spaced >= hankel in {wins}/3 cells; measured column overhead c = {overhead:g}",
        time.time() - start,
        300.0,
    )


def test_c06_tenfold_downsampling_keeps_leading_mode():
    """Every tenth column of a 5000-column Hankel matrix gives nearly the same mode."""
    start = time.time()
    sims = []
    for seed in range(50):
        series = generate(scalar_ou(10.0, seed=1000 + seed), 5020, dt=1.0)
        full = spacetime_pod(series, d=21, s=1)
        down = spacetime_pod(series, d=21, s=10)
        sims.append(mode_similarity(full.modes[:, 0], down.modes[:, 0]))
    median = float(np.median(sims))
    assert median >= 0.97  # threshold confirmed by pilot (median ~0.9994)
    _report(6, f"median similarity {median:.5f} over 50 trials (>= 0.97)",
            time.time() - start, 120.0)


def test_c07_short_window_limit_recovers_space_only_pod():
    """Time-averaged spatial similarity near 1 at T = tau_c/20, nonincreasing in T."""
    start = time.time()
    drift = np.array([[-0.10, 0.03, 0.0], [0.0, -0.125, 0.04], [0.02, 0.0, -0.08]])
    diffusion = np.diag([1.0, 0.8, 0.6])
    dt, m, s = 0.25, 1500, 5
    depths = (3, 9, 21, 41, 81)  # T = 0.5 (= tau_c/20) up to 20
    medians = []
    for d in depths:
        sims = []
        for seed in range(20):
            gen = GeneratorSpec.ou(drift, diffusion, seed=3000 + seed)
            series = generate(gen, d + (m - 1) * s, dt)
            st_modes = spacetime_pod(series, d, s)
            so_modes = space_only_pod(series)
            sims.append(
                time_averaged_spatial_similarity(st_modes.modes[:, 0], so_modes.modes[:, 0], 3)
            )
        medians.append(float(np.median(sims)))
    assert medians[0] >= 0.99
    for a, b in zip(medians, medians[1:]):
        assert b <= a + 1e-12, f"median similarity increased along T grid: {medians}"
    _report(
        7,
        "medians " + " -> ".join(f"{v:.4f}" for v in medians) + " over T = 0.5..20",
        time.time() - start,
        120.0,
    )


def test_c08_long_window_limit_concentrates_mode_spectra():
    """Peak-bin PSD fraction nondecreasing over doubling windows, > 0.9 at the top."""
    start = time.time()
    dt = 0.5
    carrier = 2.0 * np.pi * 0.1
    # gate: deterministic narrowband limit (zero bandwidth); windows span
    # 0.5, 1, 2 and 4 carrier cycles, so the first window cannot resolve the
    # carrier and the rest concentrate fully
    medians = []
    for d in (10, 20, 40, 80):
        fracs = []
        for seed in range(20):
            gen = GeneratorSpec.narrowband(carrier, 0.0, seed=21000 + seed)
            series = generate(gen, d + 399 * 50, dt)
            st_modes = spacetime_pod(series, d, 50)
            _, energies = mode_psd(st_modes.modes[:, 0], 1, d, dt)
            fracs.append(psd_peak_fraction(energies))
        medians.append(float(np.median(fracs)))
    for a, b in zip(medians, medians[1:]):
        assert b >= a - 1e-12, f"peak fraction decreased along T grid: {medians}"
    assert medians[-1] > 0.9
    # companion (report only): finite-bandwidth process stays concentrated and
    # its peak bin agrees with SPOD at the largest window
    gen = GeneratorSpec.narrowband(carrier, 0.005, seed=29)
    series = generate(gen, 400 + 2399 * 400, dt)
    st_modes = spacetime_pod(series, 400, 400)
    _, energies = mode_psd(st_modes.modes[:, 0], 1, 400, dt)
    stochastic_frac = psd_peak_fraction(energies)
    folded = energies[:201].copy()
    folded[1:200] += energies[:199:-1][:199]
    st_peak = int(np.argmax(folded))
    spod_modes = spod(generate(gen, 200_000, dt), SpodSpec(n_fft=400))
    spod_peak = int(np.argmax(spod_modes.energies[:, 0]))
    assert st_peak == spod_peak
    _report(
        8,
        "medians " + " -> ".join(f"{v:.3f}" for v in medians)
        + f"; stochastic companion frac {stochastic_frac:.3f}, "
        f"peak bin {st_peak} == SPOD bin {spod_peak}",
        time.time() - start,
        180.0,
    )


def test_c09_spod_recovers_cosine_and_conserves_energy():
    """On-grid cosine isolates its spatial amplitude; white-noise Parseval holds."""
    start = time.time()
    amplitude = np.array([1.0, -0.5, 0.25])
    weight = WeightSpec(np.array([2.0, 1.0, 0.5]))
    n_fft, dt, bin_index = 64, 0.25, 4
    omega0 = 2.0 * np.pi * bin_index / (n_fft * dt)
    t = dt * np.arange(4096)
    series = SnapshotSeries(amplitude[:, None] * np.cos(omega0 * t)[None, :], dt)
    result = spod(series, SpodSpec(n_fft=n_fft), weight)
    sim = mode_similarity(result.modes[bin_index, :, 0], amplitude, weight.diagonal)
    assert sim >= 1.0 - 1e-8
    off = np.delete(result.energies, bin_index, axis=0)
    assert np.max(off) <= 1e-10 * result.energies[bin_index, 0]
    rng = np.random.default_rng(42)
    noise = SnapshotSeries(rng.standard_normal((2, 8192)), dt=1.0)
    spec = SpodSpec(n_fft=128, overlap=0.5, window="hann")
    noise_modes = spod(noise, spec, WeightSpec(np.array([1.5, 0.5])))
    win = spec.window_samples()
    hop, total = spec.hop, 0.0
    m_b = (8192 - 128) // hop + 1
    for b in range(m_b):
        block = noise.values[:, b * hop:b * hop + 128]
        total += np.sum(np.array([1.5, 0.5])[:, None] * block**2 * win[None, :] ** 2)
    expected = total / (m_b * np.sum(win**2))
    assert noise_modes.total_energy == pytest.approx(expected, rel=1e-8)
    _report(9, f"cosine similarity {sim:.10f}; Parseval to 1e-8",
            time.time() - start, 30.0)


def test_c10_energy_metrics_exact_and_bounded():
    """Cumulative energy of reference modes is exact; Rayleigh bound holds."""
    start = time.time()
    rng = np.random.default_rng(3)
    raw = rng.standard_normal((6, 9))
    reference = weighted_svd_modes(raw, WeightSpec(rng.uniform(0.5, 2.0, size=6)))
    for k in range(1, reference.n_modes + 1):
        value = cumulative_energy(reference.modes[:, :k], reference)
        target = reference.energies[:k].sum()
        assert abs(value - target) <= 1e-10 * target
    top = reference.energies[0]
    for _ in range(10_000):
        phi = rng.standard_normal(6)
        assert captured_energy(phi, reference) <= top * (1.0 + 1e-12)
    _report(10, "first-k sums exact to 1e-10; Rayleigh bound over 10^4 vectors",
            time.time() - start, 30.0)


def test_c11_cost_scaling_report():
    """Report-only: fitted slopes for SVD width scaling and method ratios."""
    start = time.time()
    width_rows = bench_mod.bench_svd_width(500, (40, 80, 160), reps=3)
    tall = bench_mod.fit_report(
        bench_mod.bench_spaced_speedup(1, 400, (2, 4), base_m=80, reps=3)
    )
    wide = bench_mod.fit_report(
        bench_mod.bench_spaced_speedup(1, 64, (2, 4), base_m=300, reps=3)
    )
    ratio_rows = bench_mod.bench_toeplitz_vs_hankel(1, 48, (24, 96, 384), reps=3)
    report = bench_mod.fit_report(width_rows + ratio_rows)
    assert np.isfinite(report["svd_width_slope"])
    assert tall["spaced_speedups"] and wide["spaced_speedups"]
    ratios = report["toeplitz_over_hankel"]
    ratio_slope = bench_mod.loglog_slope(
        [float(m) for m in ratios], list(ratios.values())
    )
    detail = (
        f"svd width slope {report['svd_width_slope']:.2f} (quadratic-in-smaller-dim expected); "
        f"spaced speedups tall {{{', '.join(f's={k}: {v:.1f}x' for k, v in tall['spaced_speedups'].items())}}} "
        f"wide {{{', '.join(f's={k}: {v:.1f}x' for k, v in wide['spaced_speedups'].items())}}}; "
        f"toeplitz/hankel time ratio by m {{{', '.join(f'{k}: {v:.2f}' for k, v in ratios.items())}}} "
        f"(slope {ratio_slope:.2f})"
    )
    _report(11, detail + " (not gating)", time.time() - start, 300.0)


def test_c12_seeded_pipelines_are_bitwise_reproducible(tmp_path, monkeypatch):
    """Generate, decompose and study runs rerun bit-identically, files and CSVs."""
    start = time.time()
    outputs = []
    # identical commands (relative paths) rerun in two fresh directories
    for name in ("one", "two"):
        base = tmp_path / name
        base.mkdir()
        monkeypatch.chdir(base)
        assert cli_main([
            "generate", "--kind", "ou", "--tau", "10.0", "--n", "400",
            "--dt", "0.5", "--seed", "99", "-o", "x.stpd",
        ]) == 0
        assert cli_main([
            "decompose", "--method", "hankel", "--d", "12",
            "-i", "x.stpd", "-o", "h.stpm",
        ]) == 0
        assert cli_main([
            "decompose", "--method", "toeplitz", "--d", "12",
            "-i", "x.stpd", "-o", "t.stpm",
        ]) == 0
        assert cli_main([
            "decompose", "--method", "spod", "--n-fft", "32",
            "-i", "x.stpd", "-o", "f.stpf",
        ]) == 0
        assert cli_main([
            "study", "--kind", "ou", "--tau", "2.0", "--dt", "1.0", "--d", "6",
            "--m-values", "10,20", "--methods", "hankel,toeplitz",
            "--trials", "3", "--seed", "11", "-o", "study",
        ]) == 0
        outputs.append(sorted(p for p in base.iterdir()))
    names = [p.name for p in outputs[0]]
    assert names == [p.name for p in outputs[1]]
    for left, right in zip(*outputs):
        assert filecmp.cmp(left, right, shallow=False), f"{left.name} differs between reruns"
    _report(12, f"{len(names)} files bitwise identical across reruns",
            time.time() - start, 60.0)
