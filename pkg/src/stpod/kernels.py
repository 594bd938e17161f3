"""Hot numerical kernels with numba and pure-numpy implementations.

Three loops dominate the runtime of this package: the linear recursions that
drive the stochastic generators, the Runge-Kutta orbit of the Lorenz system,
and the per-lag product sums behind the block-Toeplitz correlation. Each is
implemented twice, once as a numba ``@njit`` kernel and once in plain numpy,
and dispatched through :func:`stpod.backend.active_backend`.

Accumulation order inside each lag sum is fixed (ascending sample index) so a
given backend is bitwise reproducible run to run. The numpy fallback for the
lag sums uses matrix products, which reorder the same additions; the backends
therefore agree to rounding error, not bitwise (covered by the parity tests).
"""

from __future__ import annotations

import numpy as np
from scipy import signal

from . import backend

if backend.HAS_NUMBA:
    from numba import njit, prange


# ---------------------------------------------------------------------------
# linear recursion  x_k = T x_{k-1} + w_k
# ---------------------------------------------------------------------------

def _linear_recursion_numpy(transition, noise, initial):
    n_dim, n_steps = noise.shape
    if n_dim == 1:
        # scalar AR(1): lfilter runs the identical recursion in C
        a = float(transition[0, 0])
        out, _ = signal.lfilter(
            np.array([1.0]), np.array([1.0, -a]), noise[0], zi=np.array([a * initial[0]])
        )
        return out[np.newaxis, :].copy()
    out = np.empty((n_dim, n_steps))
    x = np.array(initial, dtype=float, copy=True)
    for k in range(n_steps):
        x = transition @ x + noise[:, k]
        out[:, k] = x
    return out


def _linear_recursion_py(transition, noise, initial):
    n_dim, n_steps = noise.shape
    out = np.empty((n_dim, n_steps))
    x = initial.copy()
    for k in range(n_steps):
        for i in range(n_dim):
            acc = noise[i, k]
            for j in range(n_dim):
                acc += transition[i, j] * x[j]
            out[i, k] = acc
        for i in range(n_dim):
            x[i] = out[i, k]
    return out


def _ar1_recursion_numpy(alpha, noise, initial):
    out, _ = signal.lfilter(
        np.array([1.0 + 0j]) if np.iscomplexobj(noise) else np.array([1.0]),
        np.array([1.0, -alpha]),
        noise,
        zi=np.array([alpha * initial]),
    )
    return out


def _ar1_recursion_py(alpha, noise, initial):
    n_steps = noise.shape[0]
    out = np.empty(n_steps, dtype=noise.dtype)
    x = initial
    for k in range(n_steps):
        x = alpha * x + noise[k]
        out[k] = x
    return out


# ---------------------------------------------------------------------------
# Lorenz-63 orbit, classic RK4 with fixed substeps per kept sample
# ---------------------------------------------------------------------------

def _lorenz63_orbit_py(state0, sigma, rho, beta, dt_sub, substeps, n_keep):
    out = np.empty((3, n_keep))
    x = state0[0]
    y = state0[1]
    z = state0[2]
    for k in range(n_keep):
        for _ in range(substeps):
            k1x = sigma * (y - x)
            k1y = x * (rho - z) - y
            k1z = x * y - beta * z
            x2 = x + 0.5 * dt_sub * k1x
            y2 = y + 0.5 * dt_sub * k1y
            z2 = z + 0.5 * dt_sub * k1z
            k2x = sigma * (y2 - x2)
            k2y = x2 * (rho - z2) - y2
            k2z = x2 * y2 - beta * z2
            x3 = x + 0.5 * dt_sub * k2x
            y3 = y + 0.5 * dt_sub * k2y
            z3 = z + 0.5 * dt_sub * k2z
            k3x = sigma * (y3 - x3)
            k3y = x3 * (rho - z3) - y3
            k3z = x3 * y3 - beta * z3
            x4 = x + dt_sub * k3x
            y4 = y + dt_sub * k3y
            z4 = z + dt_sub * k3z
            k4x = sigma * (y4 - x4)
            k4y = x4 * (rho - z4) - y4
            k4z = x4 * y4 - beta * z4
            x = x + dt_sub * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
            y = y + dt_sub * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
            z = z + dt_sub * (k1z + 2.0 * k2z + 2.0 * k3z + k4z) / 6.0
        out[0, k] = x
        out[1, k] = y
        out[2, k] = z
    return out


# ---------------------------------------------------------------------------
# per-lag product sums  S_i = sum_k q_k q_{k+i}^T  for i = 0 .. d-1
# ---------------------------------------------------------------------------

def _lag_product_sums_numpy(values, depth):
    n_dim, n_samp = values.shape
    out = np.empty((depth, n_dim, n_dim))
    for i in range(depth):
        out[i] = values[:, : n_samp - i] @ values[:, i:].T
    return out


def _lag_product_sums_py(values, depth):
    n_dim, n_samp = values.shape
    out = np.zeros((depth, n_dim, n_dim))
    for i in range(depth):
        for k in range(n_samp - i):
            for a in range(n_dim):
                va = values[a, k]
                for b in range(n_dim):
                    out[i, a, b] += va * values[b, k + i]
    return out


if backend.HAS_NUMBA:
    _linear_recursion_nb = njit(cache=True)(_linear_recursion_py)
    _ar1_recursion_nb = njit(cache=True)(_ar1_recursion_py)
    _lorenz63_orbit_nb = njit(cache=True)(_lorenz63_orbit_py)

    @njit(cache=True, parallel=True)
    def _lag_product_sums_nb(values, depth):
        n_dim, n_samp = values.shape
        out = np.zeros((depth, n_dim, n_dim))
        # lags are independent; within a lag the sum order is ascending k
        for i in prange(depth):
            for k in range(n_samp - i):
                for a in range(n_dim):
                    va = values[a, k]
                    for b in range(n_dim):
                        out[i, a, b] += va * values[b, k + i]
        return out


def linear_recursion(transition: np.ndarray, noise: np.ndarray, initial: np.ndarray) -> np.ndarray:
    """Run x_k = transition @ x_{k-1} + noise[:, k] and return all states (N, n)."""
    transition = np.ascontiguousarray(transition, dtype=float)
    noise = np.ascontiguousarray(noise, dtype=float)
    initial = np.ascontiguousarray(initial, dtype=float)
    if backend.active_backend() == "numba":
        return _linear_recursion_nb(transition, noise, initial)
    return _linear_recursion_numpy(transition, noise, initial)


def ar1_recursion(alpha, noise: np.ndarray, initial) -> np.ndarray:
    """Scalar (real or complex) AR(1) scan x_k = alpha x_{k-1} + noise[k]."""
    noise = np.ascontiguousarray(noise)
    if backend.active_backend() == "numba":
        return _ar1_recursion_nb(noise.dtype.type(alpha), noise, noise.dtype.type(initial))
    return _ar1_recursion_numpy(alpha, noise, initial)


def lorenz63_orbit(state0, sigma, rho, beta, dt_sub, substeps, n_keep) -> np.ndarray:
    """Integrate the Lorenz-63 system, keeping every ``substeps``-th RK4 state."""
    state0 = np.ascontiguousarray(state0, dtype=float)
    if backend.active_backend() == "numba":
        return _lorenz63_orbit_nb(state0, float(sigma), float(rho), float(beta), float(dt_sub), int(substeps), int(n_keep))
    return _lorenz63_orbit_py(state0, float(sigma), float(rho), float(beta), float(dt_sub), int(substeps), int(n_keep))


def lag_product_sums(values: np.ndarray, depth: int) -> np.ndarray:
    """Unnormalized lag-product sums S_i = sum_k q_k q_{k+i}^T for i < depth."""
    values = np.ascontiguousarray(values, dtype=float)
    if backend.active_backend() == "numba":
        return _lag_product_sums_nb(values, depth)
    return _lag_product_sums_numpy(values, depth)
