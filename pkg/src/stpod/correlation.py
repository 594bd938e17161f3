"""Space-time correlation estimators: Hankel product and block-Toeplitz assembly.

Two estimators of the same (N d) x (N d) correlation: the data-matrix product
(1/m) H H^T, whose same-lag blocks differ on finite data, and the
stationarity-exploiting route that averages every available product at each
lag into blocks C_0 .. C_{d-1} and lays them out in exact block-Toeplitz form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .embedding import DataMatrix
from .timeseries import SnapshotSeries


@dataclass(frozen=True)
class LagCorrelationSet:
    """Per-lag blocks C_i = (1/(L-i)) sum_k q_k q_{k+i}^T for i = 0 .. d-1."""

    blocks: np.ndarray          # (d, N, N)
    counts: np.ndarray          # (d,) products averaged per block, L - i
    dt: float

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise ValueError(f"blocks must be (d, N, N), got {blocks.shape}")
        if counts.shape != (blocks.shape[0],):
            raise ValueError("counts must hold one entry per lag")
        c0 = blocks[0]
        scale = np.linalg.norm(c0)
        if scale > 0.0 and np.max(np.abs(c0 - c0.T)) > 1e-10 * scale:
            raise ValueError("zero-lag block is not symmetric within tolerance")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def depth(self) -> int:
        return self.blocks.shape[0]

    @property
    def n_components(self) -> int:
        return self.blocks.shape[1]


@dataclass(frozen=True)
class SpaceTimeCorrelation:
    """(N d) x (N d) correlation with its estimator kind and block metadata."""

    values: np.ndarray
    kind: str                   # "hankel-product" or "block-toeplitz"
    n_components: int
    depth: int
    dt: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        size = self.n_components * self.depth
        if values.shape != (size, size):
            raise ValueError(f"correlation must be {size}x{size}, got {values.shape}")
        if self.kind not in ("hankel-product", "block-toeplitz"):
            raise ValueError(f"unknown correlation kind {self.kind!r}")
        scale = np.linalg.norm(values)
        if scale > 0.0 and np.max(np.abs(values - values.T)) > 1e-12 * scale:
            raise ValueError("correlation is not symmetric within tolerance")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dt", float(self.dt))

    def block(self, i: int, j: int) -> np.ndarray:
        n = self.n_components
        return self.values[i * n:(i + 1) * n, j * n:(j + 1) * n]


def hankel_correlation(data: DataMatrix) -> SpaceTimeCorrelation:
    """Sample correlation (1/m) Y Y^T of a data matrix."""
    values = (data.values @ data.values.T) / data.m
    return SpaceTimeCorrelation(
        values, "hankel-product", data.n_components, data.embedding.d, data.dt
    )


def lag_correlations(series: SnapshotSeries, d: int) -> LagCorrelationSet:
    """Average every product of snapshots i steps apart, for i = 0 .. d-1.

    Normalization is 1/(L - i), using all L - i available products at each
    lag; the within-lag accumulation order is fixed ascending in k.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    length = series.n_snapshots
    if length < d:
        raise ValueError(f"series shorter than embedding window: L = {length} < d = {d}")
    sums = kernels.lag_product_sums(series.values, d)
    counts = length - np.arange(d, dtype=np.int64)
    blocks = sums / counts[:, None, None]
    return LagCorrelationSet(blocks, counts, series.dt)


def assemble_block_toeplitz(lags: LagCorrelationSet) -> SpaceTimeCorrelation:
    """Lay out the lag blocks as the symmetric block-Toeplitz correlation.

    Block (i, j) is C_{j-i} for j >= i and C_{i-j}^T below the diagonal,
    copied verbatim so equal-lag blocks are bitwise identical.
    """
    d, n = lags.depth, lags.n_components
    out = np.empty((n * d, n * d))
    transposed = lags.blocks.transpose(0, 2, 1)
    for i in range(d):
        for j in range(d):
            src = lags.blocks[j - i] if j >= i else transposed[i - j]
            out[i * n:(i + 1) * n, j * n:(j + 1) * n] = src
    return SpaceTimeCorrelation(out, "block-toeplitz", n, d, lags.dt)


def same_lag_spread(corr: SpaceTimeCorrelation) -> float:
    """Largest entrywise spread between blocks sharing a time lag.

    Exactly zero for a block-Toeplitz assembly; strictly positive for the
    Hankel product on generic finite data.
    """
    d = corr.depth
    worst = 0.0
    for lag in range(d):
        first = corr.block(0, lag)
        for i in range(1, d - lag):
            spread = float(np.max(np.abs(corr.block(i, i + lag) - first)))
            if spread > worst:
                worst = spread
    return worst
