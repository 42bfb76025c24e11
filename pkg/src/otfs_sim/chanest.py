"""Pilot-aided channel estimation and the real-valued detection model.

Estimation scans the window {k in [k_p-k_max, k_p+k_max], l in [l_p, l_p+l_max]}
of the received DD grid. Every cell with |y[k,l]| >= eps = 3*sigma is declared a
path at (k_hat, l_hat) = (k - k_p, l - l_p) with gain

    h_hat = y[k,l] / x_p * exp(-2j*pi * l_p * k_hat / (N*M)).

The phase factor was calibrated against the zero-noise single-path pipeline
(tests/test_chanest.py sweeps every window cell); the guard layout guarantees
that, absent noise, each window cell carries at most one path's pilot echo and
no data energy.

The detection model keeps the grid cells outside the estimation window as
observations (data plus outer guard ring) and the data cells as unknowns,
then splits into real/imaginary parts:

    y = H x + n,   H = [[Re A, -Im A], [Im A, Re A]],  A = effective DD matrix,

with per-entry real noise variance sigma2/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelPath, ChannelRealization, dd_matrix_from_paths
from .frame import OTFSConfig, index_maps, qam_alphabet_1d, vectorize

__all__ = [
    "EstimatedChannel",
    "EffectiveModel",
    "RealLinearModel",
    "estimate_channel",
    "effective_from_paths",
    "build_effective_model",
    "realify",
    "complexify",
]


@dataclass(frozen=True)
class EstimatedChannel:
    """Detected paths plus the threshold that produced them. May be empty."""

    paths: tuple[ChannelPath, ...]
    threshold: float

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    def as_realization(self) -> ChannelRealization:
        return ChannelRealization(paths=self.paths)

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, **self.as_realization().to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatedChannel":
        real = ChannelRealization.from_dict(d)
        return cls(paths=real.paths, threshold=float(d["threshold"]))


@dataclass(frozen=True)
class EffectiveModel:
    """Complex detection model: y_obs = h_eff @ x_data + w."""

    y: np.ndarray
    h_eff: np.ndarray
    sigma2: float


@dataclass(frozen=True)
class RealLinearModel:
    """Real-valued equivalent of an EffectiveModel.

    y (V,), h (V x U) with the block Re/Im structure, sigma2 the per-entry
    real noise variance (half the complex variance), constellation_1d the
    per-axis PAM alphabet.
    """

    y: np.ndarray
    h: np.ndarray
    sigma2: float
    constellation_1d: np.ndarray

    @property
    def n_unknowns(self) -> int:
        return self.h.shape[1]

    def column_norms_sq(self) -> np.ndarray:
        return np.sum(self.h * self.h, axis=0)

    def has_zero_column(self) -> bool:
        return bool(np.any(self.column_norms_sq() == 0.0))


def estimate_channel(
    y_dd_grid: np.ndarray, cfg: OTFSConfig, sigma: float, pilot_bit: int = 1
) -> EstimatedChannel:
    """Threshold detector over the pilot window; eps = 3*sigma.

    pilot_bit must match the transmitted pilot sign (the pilot is known at the
    receiver). Returns zero paths when nothing clears the threshold (valid
    output: the frame is then undetectable and every data symbol counts as an
    error).
    """
    eps = 3.0 * sigma
    x_p = np.sqrt(cfg.pilot_power) * pilot_bit
    nm = cfg.grid_size
    paths = []
    for k in range(cfg.k_p - cfg.k_max, cfg.k_p + cfg.k_max + 1):
        for l in range(cfg.l_p, cfg.l_p + cfg.l_max + 1):
            y = y_dd_grid[k, l]
            if np.abs(y) >= eps:
                k_hat = k - cfg.k_p
                l_hat = l - cfg.l_p
                phase = np.exp(-2j * np.pi * cfg.l_p * k_hat / nm)
                paths.append(
                    ChannelPath(gain=complex(y / x_p * phase), delay_idx=l_hat, doppler_idx=k_hat)
                )
    return EstimatedChannel(paths=tuple(paths), threshold=eps)


def effective_from_paths(paths, cfg: OTFSConfig) -> np.ndarray:
    """Effective complex channel matrix (obs rows x data columns) rebuilt from
    a path list (estimated or true)."""
    ch = paths if isinstance(paths, ChannelRealization) else ChannelRealization(paths=tuple(paths))
    maps = index_maps(cfg)
    if ch.n_paths == 0:
        return np.zeros((maps.rx_obs_indices.size, maps.data_tx_indices.size), dtype=np.complex128)
    h_dd = dd_matrix_from_paths(ch, cfg.n_doppler, cfg.m_delay, cfg.k_max, cfg.l_max)
    return h_dd[np.ix_(maps.rx_obs_indices, maps.data_tx_indices)]


def build_effective_model(est: EstimatedChannel, y_dd_grid: np.ndarray, cfg: OTFSConfig) -> EffectiveModel:
    """Pair the observed cells with the channel matrix rebuilt from est."""
    maps = index_maps(cfg)
    y_vec = vectorize(y_dd_grid)[maps.rx_obs_indices]
    h_eff = effective_from_paths(est.paths, cfg)
    return EffectiveModel(y=y_vec, h_eff=h_eff, sigma2=cfg.sigma2)


def realify(model: EffectiveModel, mod_order: int) -> RealLinearModel:
    """Stack real over imaginary; block matrix [[Re, -Im], [Im, Re]]."""
    a = model.h_eff
    h = np.block([[a.real, -a.imag], [a.imag, a.real]])
    y = np.concatenate([model.y.real, model.y.imag])
    return RealLinearModel(
        y=y,
        h=h,
        sigma2=model.sigma2 / 2.0,
        constellation_1d=qam_alphabet_1d(mod_order),
    )


def complexify(model: RealLinearModel) -> EffectiveModel:
    """Inverse of realify (exact on representable values)."""
    v = model.y.size
    u = model.h.shape[1]
    if v % 2 or u % 2:
        raise ValueError("real model dimensions must be even")
    vh, uh = v // 2, u // 2
    y = model.y[:vh] + 1j * model.y[vh:]
    h = model.h[:vh, :uh] + 1j * model.h[vh:, :uh]
    return EffectiveModel(y=y, h_eff=h, sigma2=model.sigma2 * 2.0)
