"""Uniformly sampled vector time series: data model, generators, file I/O.

A :class:`SnapshotSeries` holds one snapshot per column on a uniform time
grid. The synthetic generators double as statistical oracles: the
Ornstein-Uhlenbeck generator uses the exact discrete-time recursion (not
Euler-Maruyama), so its stationary and lag covariances are known in closed
form at any time step, and :func:`ou_stationary_covariance` /
:func:`ou_lag_covariance` return them.

Randomness comes from numpy's Philox counter-based bit generator (4x32,
10 rounds) driven through ``numpy.random.Generator``; a seed fully determines
the output of :func:`generate`, and reruns are bitwise identical on a fixed
kernel backend.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy import linalg

from . import kernels


class FormatError(ValueError):
    """Raised when a data or mode file does not match its declared format."""


@dataclass(frozen=True)
class SnapshotSeries:
    """N x L matrix of snapshots (one per column) on a uniform time grid."""

    values: np.ndarray
    dt: float
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        values = np.asfortranarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"snapshot matrix must be 2-D, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"snapshot matrix must be at least 1x1, got {values.shape}")
        if not float(self.dt) > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(values)):
            raise ValueError("snapshot matrix contains non-finite entries")
        if self.labels is not None and len(self.labels) != values.shape[0]:
            raise ValueError("labels length must equal the number of components")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_components(self) -> int:
        return self.values.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for a synthetic stationary process.

    ``kind`` is one of ``ornstein-uhlenbeck``, ``narrowband``, ``lorenz63``;
    ``parameters`` holds the kind-specific values (see the ``ou``,
    ``narrowband`` and ``lorenz63`` constructors). ``burn_in`` initial samples
    are generated and discarded.
    """

    kind: str
    parameters: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0
    burn_in: int = 0

    def __post_init__(self):
        if self.kind not in ("ornstein-uhlenbeck", "narrowband", "lorenz63"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")

    @classmethod
    def ou(cls, drift, diffusion, seed: int = 0, burn_in: int = 0) -> "GeneratorSpec":
        """Ornstein-Uhlenbeck dx = drift x dt + diffusion dW.

        ``drift`` is a stable N x N matrix (scalars mean N = 1); ``diffusion``
        is N x N or a scalar multiple of the identity.
        """
        drift = np.atleast_2d(np.asarray(drift, dtype=float))
        n = drift.shape[0]
        if drift.shape != (n, n):
            raise ValueError(f"drift must be square, got {drift.shape}")
        diffusion = np.asarray(diffusion, dtype=float)
        if diffusion.ndim == 0:
            diffusion = float(diffusion) * np.eye(n)
        if diffusion.shape != (n, n):
            raise ValueError(f"diffusion must be scalar or {n}x{n}, got {diffusion.shape}")
        if np.max(np.linalg.eigvals(drift).real) >= 0.0:
            raise ValueError("OU drift matrix must be stable (all eigenvalue real parts < 0)")
        return cls("ornstein-uhlenbeck", {"drift": drift, "diffusion": diffusion}, seed, burn_in)

    @classmethod
    def narrowband(cls, carrier: float, bandwidth: float = 0.0, amplitude=None,
                   seed: int = 0, burn_in: int = 0) -> "GeneratorSpec":
        """Narrowband process a(x) Re z(t), z a complex AR(1) around ``carrier`` rad/time.

        ``bandwidth`` is the decay rate of the complex envelope; zero gives a
        pure sinusoid with a seeded random phase. ``amplitude`` is the spatial
        pattern a(x) (default scalar 1).
        """
        if carrier < 0.0:
            raise ValueError("carrier frequency must be >= 0")
        if bandwidth < 0.0:
            raise ValueError("bandwidth must be >= 0")
        amplitude = np.atleast_1d(np.asarray(1.0 if amplitude is None else amplitude, dtype=float))
        if amplitude.ndim != 1 or amplitude.size < 1:
            raise ValueError("amplitude pattern must be a 1-D vector")
        return cls(
            "narrowband",
            {"carrier": float(carrier), "bandwidth": float(bandwidth), "amplitude": amplitude},
            seed,
            burn_in,
        )

    @classmethod
    def lorenz63(cls, sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0,
                 observed=(0, 1, 2), seed: int = 0, burn_in: int = 0) -> "GeneratorSpec":
        """Lorenz-63 orbit observed through a subset of the three coordinates."""
        observed = tuple(int(i) for i in observed)
        if not observed or any(i not in (0, 1, 2) for i in observed):
            raise ValueError("observed coordinates must be a nonempty subset of (0, 1, 2)")
        return cls(
            "lorenz63",
            {"sigma": float(sigma), "rho": float(rho), "beta": float(beta), "observed": observed},
            seed,
            burn_in,
        )


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck oracles
# ---------------------------------------------------------------------------

def ou_stationary_covariance(drift, diffusion) -> np.ndarray:
    """Stationary covariance of the OU process: solves A S + S A^T + B B^T = 0."""
    drift = np.atleast_2d(np.asarray(drift, dtype=float))
    diffusion = np.asarray(diffusion, dtype=float)
    if diffusion.ndim == 0:
        diffusion = float(diffusion) * np.eye(drift.shape[0])
    cov = linalg.solve_continuous_lyapunov(drift, -diffusion @ diffusion.T)
    return 0.5 * (cov + cov.T)


def ou_lag_covariance(drift, diffusion, dt: float, lag: int) -> np.ndarray:
    """E[q_k q_{k+lag}^T] for the stationary OU process sampled at ``dt``.

    Matches the lag-correlation convention used by
    :func:`stpod.correlation.lag_correlations`; the transposed quantity
    E[q_{k+lag} q_k^T] is expm(A lag dt) times the stationary covariance.
    """
    cov = ou_stationary_covariance(drift, diffusion)
    drift = np.atleast_2d(np.asarray(drift, dtype=float))
    return cov @ linalg.expm(drift.T * (dt * lag))


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix; tiny negative eigenvalues clipped."""
    vals, vecs = np.linalg.eigh(0.5 * (matrix + matrix.T))
    vals = np.clip(vals, 0.0, None)
    return vecs @ (np.sqrt(vals)[:, None] * vecs.T)


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def generate(spec: GeneratorSpec, n_snapshots: int, dt: float) -> SnapshotSeries:
    """Generate a stationary series of ``n_snapshots`` columns at time step ``dt``.

    The OU path uses the exact discrete recursion x_{k+1} = e^{A dt} x_k + w_k
    with w_k drawn from the exact discrete noise covariance, started from the
    stationary distribution, so sample moments converge to the analytic
    covariances returned by the oracle functions. Equal inputs give bitwise
    identical output on a fixed kernel backend.
    """
    if n_snapshots < 1:
        raise ValueError("n_snapshots must be >= 1")
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    rng = np.random.Generator(np.random.Philox(spec.seed))
    total = spec.burn_in + n_snapshots
    if spec.kind == "ornstein-uhlenbeck":
        values = _generate_ou(spec.parameters, rng, total, dt)
    elif spec.kind == "narrowband":
        values = _generate_narrowband(spec.parameters, rng, total, dt)
    else:
        values = _generate_lorenz63(spec.parameters, rng, total, dt)
    return SnapshotSeries(values[:, spec.burn_in:], dt)


def _generate_ou(params, rng, total, dt):
    drift = params["drift"]
    diffusion = params["diffusion"]
    n = drift.shape[0]
    if np.max(np.linalg.eigvals(drift).real) >= 0.0:
        raise ValueError("OU drift matrix must be stable (all eigenvalue real parts < 0)")
    transition = linalg.expm(drift * dt)
    cov = ou_stationary_covariance(drift, diffusion)
    step_cov = cov - transition @ cov @ transition.T
    cov_sqrt = _psd_sqrt(cov)
    step_sqrt = _psd_sqrt(step_cov)
    # draws are time-major so burn-in discards a prefix of the stream
    initial = cov_sqrt @ rng.standard_normal(n)
    noise = step_sqrt @ rng.standard_normal((total, n)).T
    if n == 1:
        return kernels.ar1_recursion(transition[0, 0], noise[0], initial[0])[np.newaxis, :]
    return kernels.linear_recursion(transition, noise, initial)


def _generate_narrowband(params, rng, total, dt):
    carrier = params["carrier"]
    bandwidth = params["bandwidth"]
    amplitude = params["amplitude"]
    alpha = complex(np.exp((1j * carrier - bandwidth) * dt))
    if bandwidth == 0.0:
        # deterministic limit: unit-modulus envelope with a seeded phase
        phase = 2.0 * np.pi * rng.random()
        initial = complex(np.exp(1j * phase))
        noise = np.zeros(total, dtype=complex)
    else:
        sigma_w = math.sqrt(1.0 - math.exp(-2.0 * bandwidth * dt))
        raw = rng.standard_normal((total + 1, 2)) / math.sqrt(2.0)
        initial = complex(raw[0, 0], raw[0, 1])
        noise = sigma_w * (raw[1:, 0] + 1j * raw[1:, 1])
    envelope = kernels.ar1_recursion(alpha, noise, initial)
    return amplitude[:, None] * envelope.real[None, :]


def _generate_lorenz63(params, rng, total, dt):
    substeps = max(10, math.ceil(dt / 0.002))
    dt_sub = dt / substeps
    state0 = np.array([1.0, 1.0, 1.0]) + 0.5 * rng.standard_normal(3)
    orbit = kernels.lorenz63_orbit(
        state0, params["sigma"], params["rho"], params["beta"], dt_sub, substeps, total
    )
    return orbit[list(params["observed"]), :]


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

def subtract_temporal_mean(series: SnapshotSeries) -> tuple[SnapshotSeries, np.ndarray]:
    """Remove the columnwise temporal mean; returns (centered series, mean vector).

    Mean removal is an explicit opt-in step: the decomposition engines operate
    on the data exactly as given.
    """
    mean = series.values.mean(axis=1)
    centered = series.values - mean[:, None]
    return SnapshotSeries(centered, series.dt, series.labels), mean


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

_STPD_MAGIC = b"STPD"
_STPD_VERSION = 1


def save(series: SnapshotSeries, path, format: str | None = None) -> None:
    """Write a series as ``stpd`` (binary, lossless) or ``csv`` (text)."""
    fmt = _infer_format(path, format)
    if fmt == "stpd":
        _save_stpd(series, path)
    else:
        _save_csv(series, path)


def load(path, format: str | None = None) -> SnapshotSeries:
    """Read a series from an ``stpd`` or ``csv`` file."""
    fmt = _infer_format(path, format)
    with open(path, "rb") as fh:
        payload = fh.read()
    if len(payload) == 0:
        raise FormatError(f"no snapshots in {path}")
    if fmt == "stpd":
        return _load_stpd(payload, path)
    return _load_csv(payload.decode("utf-8"), path)


def _infer_format(path, format):
    if format is not None:
        if format not in ("stpd", "csv"):
            raise ValueError(f"unknown series format {format!r}")
        return format
    name = str(path)
    if name.endswith(".stpd"):
        return "stpd"
    if name.endswith(".csv"):
        return "csv"
    raise ValueError(f"cannot infer format from {path!r}; pass format='stpd' or 'csv'")


def _save_stpd(series, path):
    header = _STPD_MAGIC + struct.pack(
        "<IQQd", _STPD_VERSION, series.n_components, series.n_snapshots, series.dt
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(series.values.astype("<f8").tobytes(order="F"))


def _load_stpd(payload, path):
    header_size = 4 + struct.calcsize("<IQQd")
    if len(payload) < header_size:
        raise FormatError(f"{path}: truncated stpd header")
    if payload[:4] != _STPD_MAGIC:
        raise FormatError(f"{path}: bad magic {payload[:4]!r}, expected {_STPD_MAGIC!r}")
    version, n, length, dt = struct.unpack("<IQQd", payload[4:header_size])
    if version != _STPD_VERSION:
        raise FormatError(f"{path}: unsupported stpd version {version}")
    expected = header_size + 8 * n * length
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload holds {len(payload) - header_size} bytes, "
            f"expected {8 * n * length} for a {n}x{length} matrix"
        )
    flat = np.frombuffer(payload, dtype="<f8", offset=header_size)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        i, j = int(bad[0]) % n, int(bad[0]) // n
        raise FormatError(f"{path}: non-finite entry at component {i}, snapshot {j}")
    values = flat.reshape((n, length), order="F")
    if not dt > 0.0:
        raise FormatError(f"{path}: non-positive dt {dt}")
    return SnapshotSeries(values, dt)


def _save_csv(series, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dt={series.dt!r}\n")
        for j in range(series.n_snapshots):
            fh.write(",".join(repr(float(v)) for v in series.values[:, j]))
            fh.write("\n")


def _load_csv(text, path):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"no snapshots in {path}")
    head = lines[0].strip()
    if not head.startswith("dt="):
        raise FormatError(f"{path}: first line must be 'dt=<value>', got {head!r}")
    try:
        dt = float(head[3:])
    except ValueError:
        raise FormatError(f"{path}: cannot parse dt from {head!r}") from None
    rows = lines[1:]
    if not rows:
        raise FormatError(f"no snapshots in {path}")
    n = len(rows[0].split(","))
    values = np.empty((n, len(rows)))
    for j, row in enumerate(rows):
        parts = row.split(",")
        if len(parts) != n:
            raise FormatError(
                f"{path}: snapshot row {j + 1} has {len(parts)} values, expected {n}"
            )
        for i, part in enumerate(parts):
            try:
                v = float(part)
            except ValueError:
                raise FormatError(
                    f"{path}: snapshot row {j + 1}, component {i + 1}: "
                    f"cannot parse {part.strip()!r}"
                ) from None
            if not np.isfinite(v):
                raise FormatError(
                    f"{path}: non-finite entry at snapshot row {j + 1}, component {i + 1}"
                )
            values[i, j] = v
    if not dt > 0.0:
        raise FormatError(f"{path}: non-positive dt {dt}")
    return SnapshotSeries(values, dt)
