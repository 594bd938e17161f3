"""Spectral POD by Welch blocking and per-frequency weighted SVD.

The series is split into m_b (possibly overlapping) blocks of n_fft snapshots,
each block is windowed and DFT'd, and at every frequency bin the collected
Fourier realizations feed the same weighted-SVD machinery as the time-domain
engines. Window and normalization conventions vary across the literature; the
ones here are pinned so the energy accounting is an exact, testable identity:
forward DFT with no normalization, energies scaled by 1/(n_fft * sum(w_k^2)).
With those choices the energies summed over all bins and ranks equal the
blockwise average of sum_k w_k^2 ||x_k||_W^2 / sum_k w_k^2.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .decomposition import WeightSpec, _resolve_weight
from .timeseries import FormatError, SnapshotSeries

_WINDOWS = ("rectangular", "hann")


@dataclass(frozen=True)
class SpodSpec:
    """Welch blocking parameters: block length, overlap fraction, window."""

    n_fft: int
    overlap: float = 0.0
    window: str = "rectangular"
    one_sided: bool = True

    def __post_init__(self):
        if self.n_fft < 2:
            raise ValueError(f"n_fft must be >= 2, got {self.n_fft}")
        if not 0.0 <= self.overlap < 1.0:
            raise ValueError(f"overlap must lie in [0, 1), got {self.overlap}")
        if self.window not in _WINDOWS:
            raise ValueError(f"window must be one of {_WINDOWS}, got {self.window!r}")

    @property
    def hop(self) -> int:
        """Snapshots between block starts: n_fft minus the rounded overlap length."""
        n_overlap = int(round(self.overlap * self.n_fft))
        return self.n_fft - n_overlap

    def window_samples(self) -> np.ndarray:
        if self.window == "rectangular":
            return np.ones(self.n_fft)
        # periodic Hann, w_k = 0.5 - 0.5 cos(2 pi k / n_fft)
        k = np.arange(self.n_fft)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / self.n_fft)


@dataclass(frozen=True)
class FrequencyModeSet:
    """Per-frequency complex modes and energies on the DFT bin grid."""

    frequencies: np.ndarray     # (n_bins,) angular frequency
    modes: np.ndarray           # (n_bins, N, r) complex
    energies: np.ndarray        # (n_bins, r) real, nonincreasing per bin
    spec: SpodSpec
    weight: WeightSpec
    dt: float
    n_blocks: int

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=complex)
        energies = np.asarray(self.energies, dtype=float)
        frequencies = np.asarray(self.frequencies, dtype=float)
        if modes.ndim != 3:
            raise ValueError(f"modes must be (n_bins, N, r), got shape {modes.shape}")
        n_bins, n, r = modes.shape
        if energies.shape != (n_bins, r) or frequencies.shape != (n_bins,):
            raise ValueError("frequencies, modes and energies disagree on shape")
        if np.any(energies < 0.0) or np.any(np.diff(energies, axis=1) > 0.0):
            raise ValueError("energies must be nonnegative and nonincreasing per bin")
        w = self.weight.diagonal
        for b in range(n_bins):
            gram = modes[b].conj().T @ (w[:, None] * modes[b])
            if np.max(np.abs(gram - np.eye(r))) > 1e-10:
                raise ValueError(f"modes at bin {b} are not W-orthonormal within 1e-10")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "frequencies", frequencies)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_bins(self) -> int:
        return self.modes.shape[0]

    @property
    def total_energy(self) -> float:
        return float(np.sum(self.energies))


def _fix_phases(u: np.ndarray) -> np.ndarray:
    """Rotate each column so its entry of largest magnitude is real positive."""
    out = np.array(u)
    for k in range(out.shape[1]):
        col = out[:, k]
        pivot = col[np.argmax(np.abs(col))]
        mag = abs(pivot)
        if mag > 0.0:
            out[:, k] = col * (pivot.conjugate() / mag)
    return out


def spod(series: SnapshotSeries, spec: SpodSpec, weight: WeightSpec | None = None) -> FrequencyModeSet:
    """Spectral POD of a stationary series.

    Parameters
    ----------
    series : SnapshotSeries
        Input data, used exactly as given (no mean removal).
    spec : SpodSpec
        Blocking, window and sidedness choices.
    weight : WeightSpec, optional
        Spatial weight; default uniform.

    Returns
    -------
    FrequencyModeSet
        min(N, m_b) modes per bin from the thin SVD of the weighted, scaled
        Fourier realizations at that bin. For one-sided output the energies of
        the negative-frequency bins are folded onto their positive partners
        (the modes there are the complex conjugates and carry no extra
        information for real input).
    """
    n, length = series.n_components, series.n_snapshots
    if length < spec.n_fft:
        raise ValueError(f"series shorter than one block: L = {length} < n_fft = {spec.n_fft}")
    weight = _resolve_weight(weight, n)
    hop = spec.hop
    m_b = (length - spec.n_fft) // hop + 1
    win = spec.window_samples()
    blocks = np.empty((m_b, n, spec.n_fft))
    for b in range(m_b):
        blocks[b] = series.values[:, b * hop:b * hop + spec.n_fft] * win[None, :]
    fourier = np.fft.fft(blocks, axis=2)
    scale = 1.0 / (spec.n_fft * np.sum(win**2))
    root = np.sqrt(weight.diagonal)
    r = min(n, m_b)
    modes = np.empty((spec.n_fft, n, r), dtype=complex)
    energies = np.empty((spec.n_fft, r))
    for j in range(spec.n_fft):
        realizations = fourier[:, :, j].T
        u, s, _ = np.linalg.svd(
            root[:, None] * realizations / np.sqrt(m_b), full_matrices=False
        )
        modes[j] = _fix_phases(u[:, :r] / root[:, None])
        energies[j] = (s[:r] ** 2) * scale
    if spec.one_sided:
        n_bins = spec.n_fft // 2 + 1
        folded = energies[:n_bins].copy()
        for j in range(1, (spec.n_fft + 1) // 2):
            folded[j] += energies[spec.n_fft - j]
        modes = modes[:n_bins]
        energies = folded
    else:
        n_bins = spec.n_fft
    frequencies = 2.0 * np.pi * np.arange(n_bins) / (spec.n_fft * series.dt)
    return FrequencyModeSet(frequencies, modes, energies, spec, weight, series.dt, m_b)


# ---------------------------------------------------------------------------
# STPF container
# ---------------------------------------------------------------------------

_STPF_MAGIC = b"STPF"
_STPF_VERSION = 1
_WINDOW_CODES = {name: code for code, name in enumerate(_WINDOWS)}


def save_frequency_modes(fms: FrequencyModeSet, path) -> None:
    """Write a FrequencyModeSet as an STPF file (complex stored as re, im pairs)."""
    n_bins, n, r = fms.modes.shape
    header = _STPF_MAGIC + struct.pack(
        "<IIIQQQQQdd",
        _STPF_VERSION,
        _WINDOW_CODES[fms.spec.window],
        1 if fms.spec.one_sided else 0,
        n,
        n_bins,
        r,
        fms.spec.n_fft,
        fms.n_blocks,
        fms.spec.overlap,
        fms.dt,
    )
    interleaved = np.empty(n_bins * n * r * 2)
    flat = fms.modes.reshape(-1)
    interleaved[0::2] = flat.real
    interleaved[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(fms.weight.diagonal.astype("<f8").tobytes())
        fh.write(fms.frequencies.astype("<f8").tobytes())
        fh.write(fms.energies.astype("<f8").tobytes(order="F"))
        fh.write(interleaved.astype("<f8").tobytes())


def load_frequency_modes(path) -> FrequencyModeSet:
    """Read an STPF file back into a FrequencyModeSet."""
    with open(path, "rb") as fh:
        payload = fh.read()
    head_fmt = "<IIIQQQQQdd"
    head_size = 4 + struct.calcsize(head_fmt)
    if len(payload) < head_size or payload[:4] != _STPF_MAGIC:
        raise FormatError(f"{path}: not an STPF file")
    (version, window_code, one_sided, n, n_bins, r, n_fft, n_blocks,
     overlap, dt) = struct.unpack(head_fmt, payload[4:head_size])
    if version != _STPF_VERSION:
        raise FormatError(f"{path}: unsupported STPF version {version}")
    windows = {code: name for name, code in _WINDOW_CODES.items()}
    if window_code not in windows:
        raise FormatError(f"{path}: unknown window code {window_code}")
    expected = head_size + 8 * (n + n_bins + n_bins * r + 2 * n_bins * n * r)
    if len(payload) != expected:
        raise FormatError(f"{path}: size {len(payload)} does not match header ({expected})")
    flat = np.frombuffer(payload, dtype="<f8", offset=head_size)
    pos = 0
    diagonal = flat[pos:pos + n]; pos += n
    frequencies = flat[pos:pos + n_bins]; pos += n_bins
    energies = flat[pos:pos + n_bins * r].reshape((n_bins, r), order="F"); pos += n_bins * r
    interleaved = flat[pos:]
    modes = (interleaved[0::2] + 1j * interleaved[1::2]).reshape((n_bins, n, r))
    spec = SpodSpec(int(n_fft), overlap, windows[window_code], bool(one_sided))
    return FrequencyModeSet(
        frequencies, modes, energies, spec, WeightSpec(diagonal), dt, int(n_blocks)
    )
