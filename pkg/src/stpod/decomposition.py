"""POD engines: weighted SVD and weighted eigendecomposition mode extraction.

All engines share one convention set. Modes are orthonormal in the diagonal
weight W (space-time weight = d-fold repetition of the spatial weight),
energies are the nonincreasing eigenvalues of the weighted correlation, and
the transform between the two routes is modes = W^{-1/2} U, energies =
singular values squared, computed from the thin SVD of (1/sqrt(m)) W^{1/2} Y.
With a uniform weight no transform is applied at all, so the returned modes
are bitwise the left singular vectors of the scaled data matrix.

Dense kernels: numpy.linalg.svd (LAPACK ``gesdd``, economy mode, cost
quadratic in the smaller matrix dimension) and numpy.linalg.eigh (LAPACK
``syevd``); above ``DENSE_EIG_LIMIT`` rows the Toeplitz path switches to
scipy's iterative ``eigsh`` for the requested top modes.

Sign convention: each mode is flipped so its entry of largest magnitude is
positive; among energies that agree to 1e-10 (relative), modes are ordered by
decreasing lexicographic comparison of their entries, which makes every
output deterministic.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import linalg as sparse_linalg

from .correlation import SpaceTimeCorrelation, assemble_block_toeplitz, lag_correlations
from .embedding import DataMatrix, EmbeddingSpec, build_embedded
from .timeseries import FormatError, SnapshotSeries

DENSE_EIG_LIMIT = 4096
RANK_REL_FLOOR = 1e-12
DEGENERACY_RTOL = 1e-10
NEGATIVE_TRACE_TOL = 1e-10

_METHODS = ("space-only", "hankel", "spaced", "toeplitz")


@dataclass(frozen=True)
class WeightSpec:
    """Diagonal positive weight defining the spatial inner product."""

    diagonal: np.ndarray
    kind: str = "diagonal"

    def __post_init__(self):
        diagonal = np.atleast_1d(np.asarray(self.diagonal, dtype=float))
        if diagonal.ndim != 1 or diagonal.size < 1:
            raise ValueError("weight diagonal must be a 1-D vector")
        if not np.all(diagonal > 0.0):
            raise ValueError("weight entries must be strictly positive")
        kind = "uniform" if np.all(diagonal == 1.0) else "diagonal"
        object.__setattr__(self, "diagonal", diagonal)
        object.__setattr__(self, "kind", kind)

    @classmethod
    def uniform(cls, n: int) -> "WeightSpec":
        return cls(np.ones(n))

    @property
    def n(self) -> int:
        return self.diagonal.size

    def expanded(self, depth: int) -> np.ndarray:
        """Space-time diagonal: the spatial weight repeated once per time step."""
        return np.tile(self.diagonal, depth)


@dataclass(frozen=True)
class ModeSet:
    """Ordered modes with energies and the metadata needed to interpret them."""

    modes: np.ndarray           # (N d, r)
    energies: np.ndarray        # (r,) nonincreasing, >= 0
    method: str
    n_components: int
    depth: int
    dt: float
    weight: WeightSpec
    embedding: EmbeddingSpec | None = None
    m_used: int | None = None

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=float)
        energies = np.asarray(self.energies, dtype=float)
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        size = self.n_components * self.depth
        if modes.ndim != 2 or modes.shape[0] != size:
            raise ValueError(f"modes must have {size} rows, got shape {modes.shape}")
        if energies.shape != (modes.shape[1],):
            raise ValueError("one energy per mode required")
        if np.any(np.diff(energies) > 0.0):
            raise ValueError("energies must be nonincreasing")
        if energies.size and energies[-1] < 0.0:
            raise ValueError("energies must be nonnegative")
        w = self.weight.expanded(self.depth)
        gram = modes.T @ (w[:, None] * modes)
        if modes.shape[1] and np.max(np.abs(gram - np.eye(modes.shape[1]))) > 1e-10:
            raise ValueError("modes are not W-orthonormal within 1e-10")
        for k in range(modes.shape[1]):
            col = modes[:, k]
            if col[np.argmax(np.abs(col))] < 0.0:
                raise ValueError("mode orientation violates the sign convention")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_modes(self) -> int:
        return self.modes.shape[1]

    @property
    def window(self) -> float:
        return (self.depth - 1) * self.dt


def orient_modes(modes: np.ndarray) -> np.ndarray:
    """Flip each column so its entry of largest magnitude is positive."""
    out = np.array(modes)
    for k in range(out.shape[1]):
        col = out[:, k]
        if col[np.argmax(np.abs(col))] < 0.0:
            out[:, k] = -col
    return out


def canonicalize_modes(modes: np.ndarray, energies: np.ndarray):
    """Apply the deterministic output convention shared by all engines.

    Orients signs, resolves ordering among energies equal to within
    ``DEGENERACY_RTOL`` by decreasing lexicographic mode comparison, and drops
    modes below the ``RANK_REL_FLOOR`` noise floor (reported via a warning).
    Returns (modes, energies).
    """
    energies = np.asarray(energies, dtype=float)
    modes = orient_modes(modes)
    if energies.size == 0:
        return modes, energies
    keep = energies >= RANK_REL_FLOOR * energies[0]
    if not np.all(keep):
        warnings.warn(
            f"dropped {int(np.sum(~keep))} mode(s) below the relative noise floor "
            f"{RANK_REL_FLOOR}",
            stacklevel=2,
        )
        modes, energies = modes[:, keep], energies[keep]
    order = list(range(energies.size))
    start = 0
    while start < len(order):
        stop = start + 1
        while stop < len(order) and energies[start] - energies[stop] <= DEGENERACY_RTOL * max(energies[start], 0.0):
            stop += 1
        if stop - start > 1:
            group = sorted(order[start:stop], key=lambda k: tuple(modes[:, k]), reverse=True)
            order[start:stop] = group
        start = stop
    order = np.asarray(order)
    return modes[:, order], energies[order]


def _resolve_weight(weight, n_components):
    if weight is None:
        return WeightSpec.uniform(n_components)
    if weight.n != n_components:
        raise ValueError(
            f"weight has {weight.n} entries, expected the spatial dimension {n_components}"
        )
    return weight


def weighted_svd_modes(data, weight: WeightSpec | None = None, method: str | None = None) -> ModeSet:
    """Modes and energies from the thin SVD of the weighted, scaled data matrix.

    Parameters
    ----------
    data : DataMatrix or ndarray
        Realizations as columns. A bare N x m array is treated as unembedded
        snapshots (depth 1).
    weight : WeightSpec, optional
        Spatial weight; repeated depth-fold for embedded data. Default uniform.
    method : str, optional
        Method tag recorded on the result; inferred from the embedding when
        omitted.

    Returns
    -------
    ModeSet
        r = min(N d, m) modes (minus any below the noise floor), W-orthonormal,
        energies the squared singular values of (1/sqrt(m)) W^{1/2} Y.
    """
    if isinstance(data, DataMatrix):
        values = data.values
        n_components, depth = data.n_components, data.embedding.d
        dt, embedding = data.dt, data.embedding
        if method is None:
            method = "hankel" if data.embedding.s == 1 else "spaced"
    else:
        values = np.asarray(data, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"data must be 2-D, got shape {values.shape}")
        n_components, depth = values.shape[0], 1
        dt, embedding = 0.0, None
        if method is None:
            method = "space-only"
    m = values.shape[1]
    weight = _resolve_weight(weight, n_components)
    scaled = values / np.sqrt(m)
    if weight.kind == "uniform":
        u, s, _ = np.linalg.svd(scaled, full_matrices=False)
        modes = u
    else:
        root = np.sqrt(weight.expanded(depth))
        u, s, _ = np.linalg.svd(root[:, None] * scaled, full_matrices=False)
        modes = u / root[:, None]
    modes, energies = canonicalize_modes(modes, s**2)
    return ModeSet(modes, energies, method, n_components, depth, dt, weight, embedding, m)


def space_only_pod(series: SnapshotSeries, weight: WeightSpec | None = None) -> ModeSet:
    """Space-only POD of the raw snapshot matrix (every snapshot one realization)."""
    result = weighted_svd_modes(series.values, weight, method="space-only")
    return ModeSet(
        result.modes, result.energies, "space-only", series.n_components, 1,
        series.dt, result.weight, None, series.n_snapshots,
    )


def spacetime_pod(series: SnapshotSeries, d: int, s: int = 1,
                  weight: WeightSpec | None = None) -> ModeSet:
    """Space-time POD over the window T = (d-1) dt via the embedded data matrix.

    s = 1 uses the full block-Hankel matrix; s > 1 keeps every s-th column,
    which shrinks the SVD without changing the window or what the modes
    estimate.
    """
    return weighted_svd_modes(build_embedded(series, d, s), weight)


def modes_from_correlation(corr: SpaceTimeCorrelation, weight: WeightSpec | None = None,
                           r: int | None = None, method: str = "toeplitz",
                           m_used: int | None = None,
                           force_iterative: bool = False) -> ModeSet:
    """Modes from the symmetric eigendecomposition of W^{1/2} C W^{1/2}.

    Negative eigenvalues below -1e-10 times the trace are discarded and the
    remaining tiny negatives clamped to zero, both reported via warnings; no
    other repair is applied to the estimator. Dense decomposition up to
    ``DENSE_EIG_LIMIT`` rows, iterative top-r above that.
    """
    weight = _resolve_weight(weight, corr.n_components)
    size = corr.values.shape[0]
    if r is None:
        r = size
    if not 1 <= r <= size:
        raise ValueError(f"r must be in [1, {size}], got {r}")
    root = np.sqrt(weight.expanded(corr.depth))
    sym = root[:, None] * corr.values * root[None, :]
    if size <= DENSE_EIG_LIMIT and not force_iterative:
        vals, vecs = np.linalg.eigh(sym)
        vals, vecs = vals[::-1], vecs[:, ::-1]
    else:
        k = min(r, size - 1)
        vals, vecs = sparse_linalg.eigsh(sym, k=k, which="LA")
        order = np.argsort(vals)[::-1]
        vals, vecs = vals[order], vecs[:, order]
    floor = -NEGATIVE_TRACE_TOL * max(np.trace(sym), 0.0)
    keep = vals >= floor
    if not np.all(keep):
        warnings.warn(
            f"discarded {int(np.sum(~keep))} eigenvalue(s) below {floor:.3e}", stacklevel=2
        )
        vals, vecs = vals[keep], vecs[:, keep]
    if np.any(vals < 0.0):
        warnings.warn(
            f"clamped {int(np.sum(vals < 0.0))} slightly negative eigenvalue(s) to zero",
            stacklevel=2,
        )
        vals = np.clip(vals, 0.0, None)
    modes = vecs / root[:, None]
    modes, energies = canonicalize_modes(modes, vals)
    modes, energies = modes[:, :r], energies[:r]
    return ModeSet(
        modes, energies, method, corr.n_components, corr.depth, corr.dt,
        weight, EmbeddingSpec(corr.depth, 1) if corr.depth > 1 else None, m_used,
    )


def spacetime_pod_toeplitz(series: SnapshotSeries, d: int,
                           weight: WeightSpec | None = None,
                           r: int | None = None) -> ModeSet:
    """Space-time POD through the block-Toeplitz correlation estimator.

    Averages every product of snapshots at each lag (fully exploiting
    stationarity), assembles the exact block-Toeplitz correlation, and
    eigendecomposes it under the weight.
    """
    lags = lag_correlations(series, d)
    corr = assemble_block_toeplitz(lags)
    return modes_from_correlation(corr, weight, r, "toeplitz", m_used=series.n_snapshots)


# ---------------------------------------------------------------------------
# STPM container
# ---------------------------------------------------------------------------

_STPM_MAGIC = b"STPM"
_STPM_VERSION = 1
_METHOD_CODES = {name: code for code, name in enumerate(_METHODS)}


def save_modes(modes: ModeSet, path) -> None:
    """Write a ModeSet as an STPM file (little-endian, 64-bit floats)."""
    header = _STPM_MAGIC + struct.pack(
        "<IIQQQd",
        _STPM_VERSION,
        _METHOD_CODES[modes.method],
        modes.n_components,
        modes.depth,
        modes.n_modes,
        modes.dt,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(modes.weight.diagonal.astype("<f8").tobytes())
        fh.write(modes.energies.astype("<f8").tobytes())
        fh.write(modes.modes.astype("<f8").tobytes(order="F"))


def load_modes(path) -> ModeSet:
    """Read an STPM file back into a ModeSet.

    The container stores the fields that define the modes (method, N, d, r,
    dt, weight, energies, mode matrix); estimation metadata (column spacing,
    realization count) is not part of the format, so ``embedding`` and
    ``m_used`` are None on the result.
    """
    with open(path, "rb") as fh:
        payload = fh.read()
    head_fmt = "<IIQQQd"
    head_size = 4 + struct.calcsize(head_fmt)
    if len(payload) < head_size or payload[:4] != _STPM_MAGIC:
        raise FormatError(f"{path}: not an STPM file")
    version, method_code, n, d, r, dt = struct.unpack(head_fmt, payload[4:head_size])
    if version != _STPM_VERSION:
        raise FormatError(f"{path}: unsupported STPM version {version}")
    methods = {code: name for name, code in _METHOD_CODES.items()}
    if method_code not in methods:
        raise FormatError(f"{path}: unknown method code {method_code}")
    expected = head_size + 8 * (n + r + n * d * r)
    if len(payload) != expected:
        raise FormatError(f"{path}: size {len(payload)} does not match header ({expected})")
    flat = np.frombuffer(payload, dtype="<f8", offset=head_size)
    diagonal = flat[:n]
    energies = flat[n:n + r]
    modes = flat[n + r:].reshape((n * d, r), order="F")
    return ModeSet(
        modes, energies, methods[method_code], int(n), int(d), dt,
        WeightSpec(diagonal), None, None,
    )
