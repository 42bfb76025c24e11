"""Deterministic OTFS transforms between delay-Doppler, time-frequency, and
time domains, for rectangular transmit/receive pulses (G = I).

With the N x M Doppler-by-delay grid convention, the chain is

    X_TF  = F_M @ X_DD.T @ F_N^H          (DD -> TF)
    s     = vec_F(F_M^H @ X_TF)           (TF -> time, slot-major samples)
    Y_TF  = F_M @ devec_F(r)              (time -> TF)
    Y_DD  = (F_M^H @ Y_TF @ F_N).T        (TF -> DD)

where vec_F is column-major flattening, so time sample n*M + m carries slot n,
intra-slot position m. Every step is unitary; the noiseless loopback is the
identity. Plain matrix products are used throughout: at desk-scale grids an
FFT fast path buys nothing.
"""

from __future__ import annotations

import functools

import numpy as np

__all__ = [
    "dft_matrix",
    "isfft",
    "sfft",
    "heisenberg",
    "wigner",
    "add_cp",
    "remove_cp",
]


@functools.lru_cache(maxsize=32)
def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix, entries exp(-2j*pi*p*q/n)/sqrt(n)."""
    p = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(p, p) / n) / np.sqrt(n)


def isfft(x_dd_grid: np.ndarray) -> np.ndarray:
    """Inverse symplectic finite Fourier transform: N x M DD grid -> M x N TF grid.

    DFT along the delay axis, IDFT along the Doppler axis.
    """
    x = np.asarray(x_dd_grid, dtype=np.complex128)
    n, m = x.shape
    f_m = dft_matrix(m)
    f_n = dft_matrix(n)
    return f_m @ x.T @ f_n.conj().T


def sfft(y_tf: np.ndarray) -> np.ndarray:
    """SFFT, exact inverse of isfft: M x N TF grid -> N x M DD grid."""
    y = np.asarray(y_tf, dtype=np.complex128)
    m, n = y.shape
    f_m = dft_matrix(m)
    f_n = dft_matrix(n)
    return (f_m.conj().T @ y @ f_n).T


def heisenberg(x_tf: np.ndarray) -> np.ndarray:
    """TF grid -> length-NM time signal (rectangular pulse, G_tx = I_M)."""
    y = np.asarray(x_tf, dtype=np.complex128)
    m, _ = y.shape
    f_m = dft_matrix(m)
    return (f_m.conj().T @ y).flatten(order="F")


def wigner(r: np.ndarray, n_doppler: int, m_delay: int) -> np.ndarray:
    """Time signal -> M x N TF grid (rectangular pulse, G_rx = I_M)."""
    r = np.asarray(r, dtype=np.complex128).ravel()
    if r.size != n_doppler * m_delay:
        raise ValueError(f"length {r.size} != {n_doppler}*{m_delay}")
    f_m = dft_matrix(m_delay)
    return f_m @ r.reshape((m_delay, n_doppler), order="F")


def add_cp(s: np.ndarray, l_max: int) -> np.ndarray:
    """Prepend the cyclic prefix: the last l_max samples of s."""
    s = np.asarray(s).ravel()
    if l_max == 0:
        return s.copy()
    return np.concatenate([s[-l_max:], s])


def remove_cp(s_cp: np.ndarray, l_max: int) -> np.ndarray:
    """Exact inverse of add_cp."""
    s_cp = np.asarray(s_cp).ravel()
    return s_cp[l_max:].copy()
