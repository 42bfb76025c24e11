"""Delay-Doppler frame construction: pilot/guard/data layout, QAM mapping,
and the bookkeeping between grid cells and vectorized positions.

Grid convention (used everywhere in this package):

    grid[k, l]   k = Doppler row, 0..N-1;  l = delay column, 0..M-1
    vectorize(grid)[l*N + k] == grid[k, l]   (column-major stacking)

A single pilot sits at (k_p, l_p). The inner guard block (rows k_p±k_max,
columns l_p..l_p+l_max) is reserved for channel estimation; the outer guard
ring (rows k_p±2k_max, columns l_p-l_max..l_p+l_max, minus the inner block)
keeps data echoes out of the estimation window. Guards must fit inside the
grid without modular wrap; configs that would wrap are rejected.
"""

from __future__ import annotations

import enum
import functools
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConfigError",
    "OTFSConfig",
    "Region",
    "DDFrame",
    "IndexMaps",
    "build_frame",
    "build_region_map",
    "index_maps",
    "qam_alphabet_1d",
    "qam_modulate",
    "qam_demodulate",
    "slice_to_alphabet",
    "vectorize",
    "devectorize",
]


class ConfigError(ValueError):
    """Invalid frame/campaign configuration."""


@dataclass(frozen=True)
class OTFSConfig:
    """Frame geometry and link parameters.

    n_doppler/m_delay are the grid dimensions N and M; k_max/l_max bound the
    channel's Doppler/delay indices; pilot_power is linear. subcarrier_spacing_hz
    and carrier_hz are informational only (they set the physical resolution but
    never enter the discrete model).
    """

    n_doppler: int = 8
    m_delay: int = 8
    k_p: int = 3
    l_p: int = 3
    pilot_power: float = 1.0
    k_max: int = 1
    l_max: int = 2
    mod_order: int = 16
    snr_db: float = 25.0
    subcarrier_spacing_hz: float = 15e3
    carrier_hz: float = 6e9

    def __post_init__(self):
        n, m = self.n_doppler, self.m_delay
        if n < 1 or m < 1:
            raise ConfigError(f"grid must be at least 1x1, got {n}x{m}")
        if not (0 <= self.k_max <= n // 2):
            raise ConfigError(f"k_max={self.k_max} outside [0, N/2]={n // 2}")
        if not (0 <= self.l_max <= m - 1):
            raise ConfigError(f"l_max={self.l_max} outside [0, M-1]={m - 1}")
        # Guard regions must not wrap around the grid edges.
        if self.k_p - 2 * self.k_max < 0 or self.k_p + 2 * self.k_max > n - 1:
            raise ConfigError(
                f"Doppler guard [k_p-2k_max, k_p+2k_max]=[{self.k_p - 2 * self.k_max},"
                f" {self.k_p + 2 * self.k_max}] does not fit in [0, {n - 1}]"
            )
        if self.l_p - self.l_max < 0 or self.l_p + self.l_max > m - 1:
            raise ConfigError(
                f"delay guard [l_p-l_max, l_p+l_max]=[{self.l_p - self.l_max},"
                f" {self.l_p + self.l_max}] does not fit in [0, {m - 1}]"
            )
        root = np.sqrt(self.mod_order)
        if self.mod_order < 4 or int(root) ** 2 != self.mod_order:
            raise ConfigError(f"mod_order={self.mod_order} is not a perfect square >= 4")
        if self.pilot_power <= 0:
            raise ConfigError("pilot_power must be positive")

    @property
    def grid_size(self) -> int:
        return self.n_doppler * self.m_delay

    @property
    def sigma2(self) -> float:
        """Total complex noise variance per sample, 10^(-SNR/10)."""
        return 10.0 ** (-self.snr_db / 10.0)

    @property
    def n_data_symbols(self) -> int:
        """Complex data symbols per frame (U/2)."""
        return self.grid_size - (2 * self.l_max + 1) * (4 * self.k_max + 1)

    @property
    def n_obs_symbols(self) -> int:
        """Complex observation cells per frame (V/2)."""
        return self.grid_size - (self.l_max + 1) * (2 * self.k_max + 1)

    def to_dict(self) -> dict:
        return {
            "n_doppler": self.n_doppler,
            "m_delay": self.m_delay,
            "k_p": self.k_p,
            "l_p": self.l_p,
            "pilot_power": self.pilot_power,
            "k_max": self.k_max,
            "l_max": self.l_max,
            "mod_order": self.mod_order,
            "snr_db": self.snr_db,
            "subcarrier_spacing_hz": self.subcarrier_spacing_hz,
            "carrier_hz": self.carrier_hz,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OTFSConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str) -> "OTFSConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class Region(enum.IntEnum):
    PILOT = 0
    GUARD1 = 1
    GUARD2 = 2
    DATA = 3


def build_region_map(cfg: OTFSConfig) -> np.ndarray:
    """N x M int array labelling each cell with its Region."""
    n, m = cfg.n_doppler, cfg.m_delay
    rm = np.full((n, m), int(Region.DATA), dtype=np.int8)
    k0, k1 = cfg.k_p - 2 * cfg.k_max, cfg.k_p + 2 * cfg.k_max
    l0, l1 = cfg.l_p - cfg.l_max, cfg.l_p + cfg.l_max
    rm[k0 : k1 + 1, l0 : l1 + 1] = int(Region.GUARD2)
    rm[cfg.k_p - cfg.k_max : cfg.k_p + cfg.k_max + 1, cfg.l_p : cfg.l_p + cfg.l_max + 1] = int(
        Region.GUARD1
    )
    rm[cfg.k_p, cfg.l_p] = int(Region.PILOT)
    return rm


@dataclass(frozen=True)
class IndexMaps:
    """Vectorized positions of the data cells (model columns) and of the cells
    observed by the detector (model rows).

    Observations are every cell outside the estimation window
    {k in [k_p-k_max, k_p+k_max], l in [l_p, l_p+l_max]}, i.e. data plus the
    outer guard ring.
    """

    data_tx_indices: np.ndarray
    rx_obs_indices: np.ndarray


@functools.lru_cache(maxsize=64)
def index_maps(cfg: OTFSConfig) -> IndexMaps:
    rm = build_region_map(cfg)
    n = cfg.n_doppler
    ks, ls = np.nonzero(rm == int(Region.DATA))
    data_idx = np.sort(ls * n + ks)
    in_window = np.zeros_like(rm, dtype=bool)
    in_window[
        cfg.k_p - cfg.k_max : cfg.k_p + cfg.k_max + 1, cfg.l_p : cfg.l_p + cfg.l_max + 1
    ] = True
    ks, ls = np.nonzero(~in_window)
    obs_idx = np.sort(ls * n + ks)
    data_idx.setflags(write=False)
    obs_idx.setflags(write=False)
    maps = IndexMaps(data_tx_indices=data_idx, rx_obs_indices=obs_idx)
    assert maps.data_tx_indices.size == cfg.n_data_symbols
    assert maps.rx_obs_indices.size == cfg.n_obs_symbols
    return maps


@dataclass
class DDFrame:
    """A populated delay-Doppler frame plus its region labels."""

    grid: np.ndarray
    region_map: np.ndarray
    config: OTFSConfig = field(repr=False)


def build_frame(cfg: OTFSConfig, data: np.ndarray, pilot_bit: int = 1) -> DDFrame:
    """Place pilot, guards, and data symbols on the grid.

    data must contain exactly cfg.n_data_symbols complex symbols; they fill the
    data cells in data_tx_indices order. pilot_bit is the BPSK pilot sign.
    """
    if pilot_bit not in (-1, 1):
        raise ValueError(f"pilot_bit must be +1 or -1, got {pilot_bit}")
    data = np.asarray(data, dtype=np.complex128).ravel()
    if data.size != cfg.n_data_symbols:
        raise ValueError(f"expected {cfg.n_data_symbols} data symbols, got {data.size}")
    rm = build_region_map(cfg)
    grid = np.zeros((cfg.n_doppler, cfg.m_delay), dtype=np.complex128)
    grid[cfg.k_p, cfg.l_p] = np.sqrt(cfg.pilot_power) * pilot_bit
    maps = index_maps(cfg)
    x = vectorize(grid)
    x[maps.data_tx_indices] = data
    return DDFrame(grid=devectorize(x, cfg.n_doppler, cfg.m_delay), region_map=rm, config=cfg)


# --- QAM -------------------------------------------------------------------


def _gray_to_index(values: np.ndarray, bits: int) -> np.ndarray:
    """Invert the Gray code g = i ^ (i >> 1): per-axis level index from a bit group."""
    idx = values.copy()
    shift = 1
    while shift < bits:
        idx = idx ^ (idx >> shift)
        shift *= 2
    return idx


def _index_to_gray(idx: np.ndarray) -> np.ndarray:
    return idx ^ (idx >> 1)


def qam_alphabet_1d(mod_order: int) -> np.ndarray:
    """Per-axis PAM levels of the unit-average-power square QAM constellation,
    ascending. 16-QAM gives {-3,-1,+1,+3}/sqrt(10)."""
    side = int(np.sqrt(mod_order))
    if side * side != mod_order or mod_order < 4:
        raise ValueError(f"mod_order={mod_order} is not a perfect square >= 4")
    levels = 2 * np.arange(side) - (side - 1)
    scale = np.sqrt(2.0 * (mod_order - 1) / 3.0)
    return levels / scale


def qam_modulate(bits: np.ndarray, mod_order: int) -> np.ndarray:
    """Gray-mapped square QAM. Each symbol consumes log2(mod_order) bits:
    the first half selects the I level, the second half the Q level
    (per-axis mapping table in docs/constellations.md)."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    bps = int(np.log2(mod_order))
    if 2 ** bps != mod_order:
        raise ValueError(f"mod_order={mod_order} is not a power of two")
    if bits.size % bps != 0:
        raise ValueError(f"bit count {bits.size} not divisible by bits/symbol {bps}")
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise ValueError("bits must be 0/1")
    half = bps // 2
    groups = bits.reshape(-1, bps)
    weights = 1 << np.arange(half - 1, -1, -1)
    vi = groups[:, :half] @ weights
    vq = groups[:, half:] @ weights
    alphabet = qam_alphabet_1d(mod_order)
    return alphabet[_gray_to_index(vi, half)] + 1j * alphabet[_gray_to_index(vq, half)]


def slice_to_alphabet(values: np.ndarray, alphabet: np.ndarray) -> np.ndarray:
    """Nearest-level indices for real values; ties go to the smaller index
    (argmin keeps the first of equal distances)."""
    values = np.atleast_1d(np.asarray(values, dtype=np.float64))
    return np.abs(values[:, None] - alphabet[None, :]).argmin(axis=1)


def qam_demodulate(symbols: np.ndarray, mod_order: int) -> np.ndarray:
    """Hard-decision slicer back to bits; inverse of qam_modulate at zero noise."""
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    alphabet = qam_alphabet_1d(mod_order)
    bps = int(np.log2(mod_order))
    half = bps // 2
    gi = _index_to_gray(slice_to_alphabet(symbols.real, alphabet))
    gq = _index_to_gray(slice_to_alphabet(symbols.imag, alphabet))
    out = np.empty((symbols.size, bps), dtype=np.int64)
    for col in range(half):
        shift = half - 1 - col
        out[:, col] = (gi >> shift) & 1
        out[:, half + col] = (gq >> shift) & 1
    return out.ravel()


# --- vectorization ----------------------------------------------------------


def vectorize(grid) -> np.ndarray:
    """Column-major stacking: grid entry (k, l) lands at vector index l*N + k.
    Accepts a DDFrame or a bare grid array."""
    if isinstance(grid, DDFrame):
        grid = grid.grid
    return np.asarray(grid).flatten(order="F")


def devectorize(vec: np.ndarray, n_doppler: int, m_delay: int) -> np.ndarray:
    vec = np.asarray(vec).ravel()
    if vec.size != n_doppler * m_delay:
        raise ValueError(f"length {vec.size} != {n_doppler}*{m_delay}")
    return vec.reshape((n_doppler, m_delay), order="F")
