"""Random delay-Doppler multipath channels and their matrix forms.

A channel is P paths, each with a complex gain h_i ~ CN(0, 1/P), an integer
delay index l_i in [0, l_max] and an integer Doppler index k_i in
[-k_max, k_max]; (l_i, k_i) pairs are distinct. The time-domain matrix of one
path is a cyclic delay shift times a Doppler phase ramp; the delay-Doppler
matrix is the unitary conjugation of the time-domain matrix by the
grid-to-time map of transforms.py (column-major vectorization, see frame.py).
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelPath",
    "ChannelRealization",
    "NoiseSpec",
    "sample_channel",
    "time_domain_channel_matrix",
    "dd_domain_unitary",
    "dd_domain_channel_matrix",
    "dd_path_templates",
    "dd_matrix_from_paths",
    "transmit",
]


@dataclass(frozen=True)
class ChannelPath:
    gain: complex
    delay_idx: int
    doppler_idx: int


@dataclass(frozen=True)
class ChannelRealization:
    paths: tuple[ChannelPath, ...]

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    def to_dict(self) -> dict:
        return {
            "paths": [
                {
                    "gain_re": p.gain.real,
                    "gain_im": p.gain.imag,
                    "delay_idx": p.delay_idx,
                    "doppler_idx": p.doppler_idx,
                }
                for p in self.paths
            ]
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelRealization":
        return cls(
            paths=tuple(
                ChannelPath(
                    gain=complex(p["gain_re"], p["gain_im"]),
                    delay_idx=int(p["delay_idx"]),
                    doppler_idx=int(p["doppler_idx"]),
                )
                for p in d["paths"]
            )
        )


@dataclass(frozen=True)
class NoiseSpec:
    """Total complex noise variance per time sample (sigma^2 = 10^(-SNR/10)),
    split evenly across the real and imaginary components."""

    sigma2: float

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "NoiseSpec":
        return cls(sigma2=10.0 ** (-snr_db / 10.0))


def sample_channel(rng: np.random.Generator, n_paths: int, k_max: int, l_max: int) -> ChannelRealization:
    """Draw P paths: (l_i, k_i) uniform without replacement over the index grid,
    gains CN(0, 1/P)."""
    grid = (l_max + 1) * (2 * k_max + 1)
    if not 1 <= n_paths <= grid:
        raise ValueError(f"n_paths={n_paths} must be in [1, {grid}] for distinct (l, k) pairs")
    flat = rng.choice(grid, size=n_paths, replace=False)
    delays = flat // (2 * k_max + 1)
    dopplers = flat % (2 * k_max + 1) - k_max
    scale = np.sqrt(1.0 / (2 * n_paths))
    gains = scale * (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths))
    return ChannelRealization(
        paths=tuple(
            ChannelPath(gain=complex(g), delay_idx=int(l), doppler_idx=int(k))
            for g, l, k in zip(gains, delays, dopplers)
        )
    )


def time_domain_channel_matrix(ch: ChannelRealization, n_doppler: int, m_delay: int) -> np.ndarray:
    """NM x NM time-domain matrix: sum over paths of (cyclic left column shift
    by l_i) @ diag(exp(2j*pi*k_i*n/NM)). Row r of a single-path term is
    h_i * exp(2j*pi*k_i*(r - l_i)/NM) at column (r - l_i) mod NM."""
    nm = n_doppler * m_delay
    h = np.zeros((nm, nm), dtype=np.complex128)
    rows = np.arange(nm)
    for p in ch.paths:
        cols = (rows - p.delay_idx) % nm
        phase = np.exp(2j * np.pi * p.doppler_idx * cols / nm)
        h[rows, cols] += p.gain * phase
    return h


@functools.lru_cache(maxsize=8)
def dd_domain_unitary(n_doppler: int, m_delay: int) -> np.ndarray:
    """Unitary map from the time-sample vector to the column-major DD vector:
    row l*N+k applies the N-point DFT across slots at intra-slot position l.
    Its conjugate transpose is the transmit-side map (frame vector -> samples)."""
    nm = n_doppler * m_delay
    f_n = np.exp(
        -2j * np.pi * np.outer(np.arange(n_doppler), np.arange(n_doppler)) / n_doppler
    ) / np.sqrt(n_doppler)
    u = np.zeros((nm, nm), dtype=np.complex128)
    for l in range(m_delay):
        u[l * n_doppler : (l + 1) * n_doppler, l::m_delay] = f_n
    u.setflags(write=False)
    return u


def dd_domain_channel_matrix(h_time: np.ndarray, n_doppler: int, m_delay: int) -> np.ndarray:
    """DD-domain channel matrix in the column-major vectorization:
    U @ H_time @ U^H with U = dd_domain_unitary."""
    nm = n_doppler * m_delay
    if h_time.shape != (nm, nm):
        raise ValueError(f"expected {nm}x{nm} matrix, got {h_time.shape}")
    u = dd_domain_unitary(n_doppler, m_delay)
    return u @ h_time @ u.conj().T


@functools.lru_cache(maxsize=8)
def dd_path_templates(n_doppler: int, m_delay: int, k_max: int, l_max: int) -> dict:
    """Unit-gain DD matrices for every (l, k) on the index grid. The DD matrix
    of any realization on this grid is the gain-weighted sum of templates."""
    out = {}
    for l in range(l_max + 1):
        for k in range(-k_max, k_max + 1):
            ch = ChannelRealization(paths=(ChannelPath(gain=1.0 + 0j, delay_idx=l, doppler_idx=k),))
            t = dd_domain_channel_matrix(time_domain_channel_matrix(ch, n_doppler, m_delay), n_doppler, m_delay)
            t.setflags(write=False)
            out[(l, k)] = t
    return out


def dd_matrix_from_paths(ch: ChannelRealization, n_doppler: int, m_delay: int, k_max: int, l_max: int) -> np.ndarray:
    """DD-domain matrix via the cached per-path templates (equal to
    dd_domain_channel_matrix(time_domain_channel_matrix(...)) by linearity)."""
    templates = dd_path_templates(n_doppler, m_delay, k_max, l_max)
    nm = n_doppler * m_delay
    h = np.zeros((nm, nm), dtype=np.complex128)
    for p in ch.paths:
        h += p.gain * templates[(p.delay_idx, p.doppler_idx)]
    return h


def transmit(s: np.ndarray, h_time: np.ndarray, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """r = H_time @ s + w with w circularly-symmetric complex Gaussian,
    per-sample total variance sigma2."""
    s = np.asarray(s, dtype=np.complex128).ravel()
    if h_time.shape[1] != s.size:
        raise ValueError(f"signal length {s.size} != matrix columns {h_time.shape[1]}")
    r = h_time @ s
    if noise.sigma2 > 0:
        scale = np.sqrt(noise.sigma2 / 2.0)
        r = r + scale * (rng.standard_normal(s.size) + 1j * rng.standard_normal(s.size))
    return r
