"""Measurement suite: mode similarity, captured energy, mode PSD, convergence studies.

The convergence machinery repeats a full estimation pipeline over seeded
trials against a converged reference and aggregates means, medians and sample
PDFs per grid cell. References are computed from a run at least
``reference_factor`` times the longest study series and must pass a
self-consistency gate: two independent references have to agree to 0.999
leading-mode similarity, otherwise the study aborts.

Trial seeds derive deterministically from (study seed, cell index, trial
index) through numpy's SeedSequence, so results are independent of scheduling
and bitwise reproducible.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .decomposition import (
    ModeSet,
    WeightSpec,
    space_only_pod,
    spacetime_pod,
    spacetime_pod_toeplitz,
)
from .timeseries import GeneratorSpec, SnapshotSeries, generate, subtract_temporal_mean


class StudyError(RuntimeError):
    """Raised when a convergence study cannot produce a trustworthy reference."""


def _resolve_vector(weight, length):
    if weight is None:
        return np.ones(length)
    if isinstance(weight, WeightSpec):
        if length % weight.n:
            raise ValueError(
                f"mode length {length} is not a multiple of the weight dimension {weight.n}"
            )
        return weight.expanded(length // weight.n)
    w = np.asarray(weight, dtype=float)
    if w.shape != (length,):
        raise ValueError(f"weight vector must have length {length}, got {w.shape}")
    return w


def mode_similarity(a, b, weight=None) -> float:
    """Squared W-inner product of two modes, normalized to [0, 1].

    Invariant to scaling and sign (or complex phase) of either argument;
    equals 1 exactly when the modes are W-collinear.
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"mode lengths differ: {a.size} vs {b.size}")
    w = _resolve_vector(weight, a.size)
    na = np.real(np.vdot(a, w * a))
    nb = np.real(np.vdot(b, w * b))
    if na <= 0.0 or nb <= 0.0:
        raise ValueError("mode similarity is undefined for zero-norm input")
    inner = np.vdot(b, w * a)
    return float((inner * inner.conjugate()).real / (na * nb))


def captured_energy(mode, reference: ModeSet) -> float:
    """Energy of a mode expressed through its projections on reference modes.

    Returns sum_k c_k^2 lambda_k with c_k the W-normalized projection
    coefficients onto the reference ModeSet; bounded by the leading reference
    energy for any input.
    """
    mode = np.asarray(mode, dtype=float).ravel()
    if mode.size != reference.modes.shape[0]:
        raise ValueError(
            f"mode length {mode.size} does not match reference ({reference.modes.shape[0]})"
        )
    w = reference.weight.expanded(reference.depth)
    norm = float(mode @ (w * mode))
    if norm <= 0.0:
        raise ValueError("captured energy is undefined for zero-norm input")
    coeffs = reference.modes.T @ (w * mode) / np.sqrt(norm)
    return float(np.sum(coeffs**2 * reference.energies))


def cumulative_energy(modes, reference: ModeSet) -> float:
    """Summed captured energy of a mutually W-orthonormal mode set."""
    modes = np.asarray(modes, dtype=float)
    if modes.ndim == 1:
        modes = modes[:, None]
    w = reference.weight.expanded(reference.depth)
    gram = modes.T @ (w[:, None] * modes)
    if np.max(np.abs(gram - np.eye(modes.shape[1]))) > 1e-8:
        raise ValueError("cumulative energy requires a W-orthonormal mode set (1e-8)")
    return float(sum(captured_energy(modes[:, k], reference) for k in range(modes.shape[1])))


def mode_psd(mode, n_components: int, depth: int, dt: float, weight=None):
    """Domain-integrated power spectral density of a space-time mode.

    DFTs each spatial component along the time axis (forward, unnormalized)
    and returns (angular frequencies, per-bin W-weighted squared magnitudes),
    two-sided over all ``depth`` bins. The bin energies sum to
    depth * ||mode||_W^2.
    """
    mode = np.asarray(mode).ravel()
    if mode.size != n_components * depth:
        raise ValueError(f"mode has {mode.size} entries, expected N*d = {n_components * depth}")
    w = _resolve_vector(weight, n_components * depth)[:n_components]
    field_hat = np.fft.fft(mode.reshape(depth, n_components).T, axis=1)
    energies = (w[:, None] * np.abs(field_hat) ** 2).sum(axis=0)
    frequencies = 2.0 * np.pi * np.arange(depth) / (depth * dt)
    return frequencies, energies


def fold_psd(energies: np.ndarray) -> np.ndarray:
    """Fold a two-sided PSD onto nonnegative bins (pairs summed, DC and Nyquist kept)."""
    energies = np.asarray(energies, dtype=float)
    d = energies.size
    folded = energies[: d // 2 + 1].copy()
    for j in range(1, (d + 1) // 2):
        folded[j] += energies[d - j]
    return folded


def psd_peak_fraction(energies: np.ndarray) -> float:
    """Fraction of PSD energy in the strongest folded bin."""
    folded = fold_psd(energies)
    total = float(np.sum(folded))
    if total <= 0.0:
        raise ValueError("peak fraction is undefined for a zero PSD")
    return float(np.max(folded) / total)


def time_averaged_spatial_similarity(st_mode, space_mode, n_components: int,
                                     weight: WeightSpec | None = None) -> float:
    """Mean over time slices of the spatial similarity to a space-only mode."""
    st_mode = np.asarray(st_mode).ravel()
    if st_mode.size % n_components:
        raise ValueError("space-time mode length must be a multiple of N")
    depth = st_mode.size // n_components
    field = st_mode.reshape(depth, n_components).T
    w = None if weight is None else weight.diagonal
    return float(
        np.mean([mode_similarity(field[:, t], space_mode, w) for t in range(depth)])
    )


def measured_decorrelation_time(series: SnapshotSeries, max_lag: int = 10_000) -> float:
    """First lag (in time units) where the first component's autocorrelation drops below 1/e.

    The scan stops at ``max_lag`` and returns that horizon if the correlation
    never crosses the threshold.
    """
    x = series.values[0] - series.values[0].mean()
    denom = float(x @ x)
    if denom <= 0.0:
        raise ValueError("decorrelation time is undefined for a constant series")
    target = 1.0 / np.e
    horizon = min(series.n_snapshots - 1, max_lag)
    for lag in range(1, horizon + 1):
        rho = float(x[:-lag] @ x[lag:]) / denom
        if rho < target:
            return lag * series.dt
    return (horizon + 1) * series.dt


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StudyCell:
    """One grid point: estimation method plus its m, d, s parameters."""

    method: str
    m: int
    d: int
    s: int = 1

    def __post_init__(self):
        if self.method not in ("hankel", "spaced", "toeplitz", "space-only"):
            raise ValueError(f"unknown study method {self.method!r}")
        if self.m < 1 or self.d < 1 or self.s < 1:
            raise ValueError("m, d and s must all be >= 1")

    @property
    def series_length(self) -> int:
        return self.d + (self.m - 1) * self.s


@dataclass(frozen=True)
class StudySpec:
    """Full description of a convergence study (generator, grid, metric, seeds)."""

    generator: GeneratorSpec
    dt: float
    cells: tuple[StudyCell, ...]
    trials: int
    seed: int = 0
    metric: str = "similarity"
    mode_index: int = 0
    n_cumulative: int = 1
    weight: WeightSpec | None = None
    reference_factor: int = 100
    reference_gate: float = 0.999
    subtract_mean: bool = False

    def __post_init__(self):
        if not self.cells:
            raise ValueError("study needs at least one cell")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.metric not in ("similarity", "cumulative_energy"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.reference_factor < 1:
            raise ValueError("reference_factor must be >= 1")
        object.__setattr__(self, "cells", tuple(self.cells))


@dataclass
class StudyReport:
    """Per-cell trial samples with summary statistics and sample PDFs."""

    spec: StudySpec
    values: np.ndarray            # (n_cells, trials)
    trial_seeds: np.ndarray       # (n_cells, trials) uint64
    means: np.ndarray
    medians: np.ndarray
    pdfs: list[tuple[np.ndarray, np.ndarray]] = field(repr=False)
    reference_similarity: dict[int, float] = field(default_factory=dict)
    decorrelation_time: float = float("nan")

    def cell_values(self, index: int) -> np.ndarray:
        return self.values[index]

    def to_csv(self, path) -> None:
        """Long-format dump: one row per (cell, trial)."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("cell,method,m,d,s,trial,seed,value\n")
            for ci, cell in enumerate(self.spec.cells):
                for t in range(self.spec.trials):
                    fh.write(
                        f"{ci},{cell.method},{cell.m},{cell.d},{cell.s},"
                        f"{t},{self.trial_seeds[ci, t]},{self.values[ci, t]!r}\n"
                    )

    def summary(self) -> dict:
        cells = []
        for ci, cell in enumerate(self.spec.cells):
            edges, density = self.pdfs[ci]
            cells.append(
                {
                    "method": cell.method,
                    "m": cell.m,
                    "d": cell.d,
                    "s": cell.s,
                    "trials": int(self.spec.trials),
                    "mean": float(self.means[ci]),
                    "median": float(self.medians[ci]),
                    "pdf": {"edges": edges.tolist(), "density": density.tolist()},
                }
            )
        return {
            "metric": self.spec.metric,
            "generator": self.spec.generator.kind,
            "dt": self.spec.dt,
            "seed": self.spec.seed,
            "reference_factor": self.spec.reference_factor,
            "reference_similarity": {str(k): v for k, v in self.reference_similarity.items()},
            "decorrelation_time": self.decorrelation_time,
            "cells": cells,
        }

    def to_summary_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=1, sort_keys=True)
            fh.write("\n")


def _trial_seed(master: int, cell_index: int, trial_index: int) -> int:
    seq = np.random.SeedSequence(master, spawn_key=(1, cell_index, trial_index))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _reference_seed(master: int, depth: int, which: int) -> int:
    seq = np.random.SeedSequence(master, spawn_key=(0, depth, which))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _estimate(cell: StudyCell, series: SnapshotSeries, weight) -> ModeSet:
    if cell.method == "toeplitz":
        return spacetime_pod_toeplitz(series, cell.d, weight)
    if cell.method == "space-only":
        return space_only_pod(series, weight)
    return spacetime_pod(series, cell.d, cell.s, weight)


def _sample_pdf(values: np.ndarray, bins: int = 50):
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi <= lo:
        pad = max(abs(lo), 1.0) * 1e-12
        lo, hi = lo - pad, hi + pad
    density, edges = np.histogram(values, bins=bins, range=(lo, hi), density=True)
    return edges, density


def convergence_study(spec: StudySpec) -> StudyReport:
    """Run the seeded trial grid of ``spec`` against converged references.

    One Hankel reference per distinct embedding depth is computed from a
    series ``reference_factor`` times the longest cell series, and checked
    against a second, independent reference (gate: leading-mode similarity of
    at least ``reference_gate``; failure raises :class:`StudyError`). The
    metric of each trial is evaluated against the matching reference.
    """
    weight = spec.weight
    references: dict[int, ModeSet] = {}
    gate_values: dict[int, float] = {}
    decorrelation = float("nan")
    for depth in sorted({cell.d for cell in spec.cells}):
        longest = max(cell.series_length for cell in spec.cells if cell.d == depth)
        ref_length = spec.reference_factor * longest
        runs = []
        for which in range(2):
            gen = dataclasses.replace(
                spec.generator, seed=_reference_seed(spec.seed, depth, which)
            )
            series = generate(gen, ref_length, spec.dt)
            if spec.subtract_mean:
                series, _ = subtract_temporal_mean(series)
            runs.append((series, spacetime_pod(series, depth, 1, weight)))
        w_vec = runs[0][1].weight.expanded(depth)
        gate = mode_similarity(runs[0][1].modes[:, 0], runs[1][1].modes[:, 0], w_vec)
        if gate < spec.reference_gate:
            raise StudyError(
                f"reference self-consistency gate failed at d = {depth}: "
                f"leading-mode similarity {gate:.6f} < {spec.reference_gate} "
                f"(reference length {ref_length}); lengthen the reference"
            )
        references[depth] = runs[0][1]
        gate_values[depth] = gate
        if np.isnan(decorrelation):
            decorrelation = measured_decorrelation_time(runs[0][0])

    n_cells = len(spec.cells)
    values = np.empty((n_cells, spec.trials))
    seeds = np.empty((n_cells, spec.trials), dtype=np.uint64)
    for ci, cell in enumerate(spec.cells):
        reference = references[cell.d]
        for t in range(spec.trials):
            seed = _trial_seed(spec.seed, ci, t)
            seeds[ci, t] = seed
            gen = dataclasses.replace(spec.generator, seed=seed)
            series = generate(gen, cell.series_length, spec.dt)
            if spec.subtract_mean:
                series, _ = subtract_temporal_mean(series)
            modes = _estimate(cell, series, weight)
            if spec.metric == "similarity":
                w_vec = reference.weight.expanded(reference.depth)
                values[ci, t] = mode_similarity(
                    modes.modes[:, spec.mode_index],
                    reference.modes[:, spec.mode_index],
                    w_vec,
                )
            else:
                k = min(spec.n_cumulative, modes.n_modes)
                values[ci, t] = cumulative_energy(modes.modes[:, :k], reference)
    pdfs = [_sample_pdf(values[ci]) for ci in range(n_cells)]
    return StudyReport(
        spec=spec,
        values=values,
        trial_seeds=seeds,
        means=values.mean(axis=1),
        medians=np.median(values, axis=1),
        pdfs=pdfs,
        reference_similarity=gate_values,
        decorrelation_time=decorrelation,
    )
