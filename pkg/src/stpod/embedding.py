"""Delay embedding: block-Hankel data matrices and their column-spaced variants.

Column j of the embedded matrix stacks snapshots q_{1+(j-1)s} .. q_{d+(j-1)s},
so with spacing s=1 the matrix is block Hankel and larger s keeps the same
time window while decorrelating the columns. The embedding metadata (d, s,
dt) is carried along because it gives the rows of a mode their space-time
meaning: the window is T = (d-1) dt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timeseries import SnapshotSeries


@dataclass(frozen=True)
class EmbeddingSpec:
    """Embedding depth d (snapshots per column) and column spacing s."""

    d: int
    s: int = 1

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"embedding depth d must be >= 1, got {self.d}")
        if self.s < 1:
            raise ValueError(f"column spacing s must be >= 1, got {self.s}")

    def window(self, dt: float) -> float:
        """Time window T = (d - 1) dt covered by one column."""
        return (self.d - 1) * dt


@dataclass(frozen=True)
class DataMatrix:
    """(N d) x m matrix of stacked temporal realizations plus its embedding metadata."""

    values: np.ndarray
    embedding: EmbeddingSpec
    dt: float
    n_components: int

    def __post_init__(self):
        values = np.asfortranarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] < 1:
            raise ValueError(f"data matrix must be 2-D with m >= 1, got shape {values.shape}")
        if values.shape[0] != self.n_components * self.embedding.d:
            raise ValueError(
                f"data matrix has {values.shape[0]} rows, expected "
                f"N*d = {self.n_components * self.embedding.d}"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def m(self) -> int:
        """Number of realizations (columns)."""
        return self.values.shape[1]

    @property
    def window(self) -> float:
        return self.embedding.window(self.dt)


def build_embedded(series: SnapshotSeries, d: int, s: int = 1) -> DataMatrix:
    """Stack delay embeddings of ``series`` into an (N d) x m data matrix.

    m = floor((L - d) / s) + 1 columns are produced; leftover tail snapshots
    are dropped so column start times form an exact arithmetic progression.
    With s = 1 this is the full block-Hankel matrix (m = L - d + 1).

    The output is the only allocation of snapshot storage: each of the d block
    rows is a single strided copy out of the source series.
    """
    spec = EmbeddingSpec(d, s)
    n, length = series.n_components, series.n_snapshots
    if length < d:
        raise ValueError(
            f"series shorter than embedding window: L = {length} < d = {d}"
        )
    m = (length - d) // s + 1
    out = np.empty((n * d, m), order="F")
    stop = (m - 1) * s + 1
    for i in range(d):
        out[i * n:(i + 1) * n, :] = series.values[:, i:i + stop:s]
    return DataMatrix(out, spec, series.dt, n)


def reshape_mode(mode: np.ndarray, n_components: int, depth: int) -> np.ndarray:
    """Unstack a length N*d mode into an N x d space-time field (column t = time slice t)."""
    mode = np.asarray(mode)
    if mode.ndim != 1 or mode.size != n_components * depth:
        raise ValueError(
            f"mode has {mode.size} entries, expected N*d = {n_components * depth}"
        )
    return mode.reshape(depth, n_components).T
