"""Monte Carlo SER campaigns: detector dispatch, paired trials, reproducible
seeding, and results persistence.

Every frame draws its randomness from counter-based Philox streams keyed by
(base_seed, point_index, frame_index, stream_id), so results are identical for
any worker count and any execution order. Detectors at a campaign point all
consume the same frame/channel/noise/CSI realization (paired comparison); the
untrained-network initializer of each detector kind has its own stream keyed by
a stable per-kind id, so enabling or disabling one detector never changes
another's output.
"""

from __future__ import annotations

import dataclasses
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .bpic import bpic_detect, mmse_init
from .channel import (
    ChannelRealization,
    NoiseSpec,
    dd_domain_unitary,
    sample_channel,
    time_domain_channel_matrix,
    transmit,
)
from .chanest import (
    EstimatedChannel,
    RealLinearModel,
    build_effective_model,
    effective_from_paths,
    estimate_channel,
    realify,
    EffectiveModel,
)
from .frame import (
    ConfigError,
    OTFSConfig,
    build_frame,
    devectorize,
    index_maps,
    qam_modulate,
    slice_to_alphabet,
    vectorize,
)
from .gdunn import StoppingMonitor, default_architecture, gdunn_run

__all__ = [
    "DETECTOR_KINDS",
    "DetectorSpec",
    "CampaignSpec",
    "PointResult",
    "TrialRecord",
    "CampaignResult",
    "detect",
    "run_trial",
    "run_campaign",
    "ser_with_ci",
    "write_results_csv",
    "write_trials_csv",
    "RESULTS_COLUMNS",
]

# Stable ids: they key the per-detector RNG substreams.
DETECTOR_KINDS = {"MMSE": 0, "MMSE-BPIC": 1, "DUNN-BPIC": 2, "GDUNN-BPIC": 3}
_UNN_KINDS = {"DUNN-BPIC": False, "GDUNN-BPIC": True}  # kind -> use_graph
_DEFAULT_WINDOW = {"GDUNN-BPIC": 90, "DUNN-BPIC": 150}

_STREAM_DATA = 0
_STREAM_CHANNEL = 1
_STREAM_NOISE = 2
_STREAM_UNN_BASE = 8


@dataclass(frozen=True)
class DetectorSpec:
    """One detector configuration. window_size defaults to 90 for GDUNN-BPIC
    and 150 for DUNN-BPIC when left unset."""

    kind: str
    t_bpic: int = 10
    window_size: int | None = None
    threshold: float = 1e-3
    lr: float = 0.01
    t_max: int = 1000

    def __post_init__(self):
        if self.kind not in DETECTOR_KINDS:
            raise ConfigError(f"unknown detector kind {self.kind!r}; known: {sorted(DETECTOR_KINDS)}")
        if self.t_bpic < 1:
            raise ConfigError("t_bpic must be >= 1")
        if self.threshold <= 0 or self.lr <= 0 or self.t_max < 1:
            raise ConfigError("threshold, lr must be positive and t_max >= 1")
        if self.window_size is not None and self.window_size < 1:
            raise ConfigError("window_size must be >= 1")

    @property
    def is_unn(self) -> bool:
        return self.kind in _UNN_KINDS

    @property
    def effective_window(self) -> int:
        if self.window_size is not None:
            return self.window_size
        return _DEFAULT_WINDOW.get(self.kind, 90)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "t_bpic": self.t_bpic,
            "window_size": self.effective_window if self.is_unn else None,
            "threshold": self.threshold,
            "lr": self.lr,
            "t_max": self.t_max,
        }


@dataclass(frozen=True)
class CampaignSpec:
    config: OTFSConfig
    snr_list: tuple[float, ...] = (25.0,)
    pilot_power_list: tuple[float, ...] = (1.0,)
    csi_mode: str = "estimated"
    n_frames: int = 1000
    base_seed: int = 0
    detectors: tuple[DetectorSpec, ...] = (
        DetectorSpec("MMSE"),
        DetectorSpec("MMSE-BPIC"),
        DetectorSpec("GDUNN-BPIC"),
    )
    n_paths: int = 4
    max_errors: int | None = None  # per-point early abort; biases SER, smoke tests only

    def __post_init__(self):
        if self.csi_mode not in ("perfect", "estimated"):
            raise ConfigError(f"csi_mode must be 'perfect' or 'estimated', got {self.csi_mode!r}")
        if self.n_frames < 1:
            raise ConfigError("n_frames must be >= 1")
        if not self.snr_list or not self.pilot_power_list:
            raise ConfigError("snr_list and pilot_power_list must be non-empty")
        if not self.detectors:
            raise ConfigError("at least one detector required")
        if len({d.kind for d in self.detectors}) != len(self.detectors):
            raise ConfigError("duplicate detector kinds in campaign")

    def points(self) -> list[tuple[int, float, float]]:
        """(point_index, snr_db, pilot_power), SNR-major order."""
        out = []
        idx = 0
        for snr in self.snr_list:
            for pp in self.pilot_power_list:
                out.append((idx, snr, pp))
                idx += 1
        return out

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "snr_list": list(self.snr_list),
            "pilot_power_list": list(self.pilot_power_list),
            "csi_mode": self.csi_mode,
            "n_frames": self.n_frames,
            "base_seed": self.base_seed,
            "detectors": [d.to_dict() for d in self.detectors],
            "n_paths": self.n_paths,
            "max_errors": self.max_errors,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignSpec":
        d = dict(d)
        cfg = OTFSConfig.from_dict(d.pop("config"))
        dets = []
        for dd in d.pop("detectors", []):
            dd = {k: v for k, v in dd.items() if v is not None}
            dets.append(DetectorSpec(**dd))
        known = {f.name for f in dataclasses.fields(cls)} - {"config", "detectors"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown campaign fields: {sorted(unknown)}")
        for key in ("snr_list", "pilot_power_list"):
            if key in d:
                d[key] = tuple(d[key])
        if dets:
            d["detectors"] = tuple(dets)
        return cls(config=cfg, **d)

    @classmethod
    def from_json(cls, path: str) -> "CampaignSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# --- seeding -----------------------------------------------------------------


def trial_rng(base_seed: int, point_index: int, frame_index: int, stream_id: int) -> np.random.Generator:
    """Counter-based Philox generator for one substream of one trial."""
    seq = np.random.SeedSequence(base_seed, spawn_key=(point_index, frame_index, stream_id))
    return np.random.Generator(np.random.Philox(seq))


# --- detection ---------------------------------------------------------------


def _pair_to_complex(x: np.ndarray) -> np.ndarray:
    half = x.size // 2
    return x[:half] + 1j * x[half:]


def _slice_decisions(x: np.ndarray, alphabet: np.ndarray) -> np.ndarray:
    z = _pair_to_complex(x)
    return alphabet[slice_to_alphabet(z.real, alphabet)] + 1j * alphabet[slice_to_alphabet(z.imag, alphabet)]


def detect(model: RealLinearModel, spec: DetectorSpec, rng: np.random.Generator):
    """Run one detector. Returns (complex symbol decisions, unn_iterations).

    unn_iterations is None for non-UNN detectors, 0 when the model is
    degenerate (zero channel: nothing to fit, decisions come from slicing the
    MMSE output of the regularized zero system).
    """
    alphabet = model.constellation_1d
    if model.has_zero_column():
        # Undetectable frame (typically an empty channel estimate). Slice the
        # regularized LS output; errors are counted honestly upstream.
        x = mmse_init(model)
        return _slice_decisions(x, alphabet), (0 if spec.is_unn else None)
    iters = None
    if spec.kind == "MMSE":
        x = mmse_init(model)
    elif spec.kind == "MMSE-BPIC":
        x = bpic_detect(model, mmse_init(model), spec.t_bpic)
    else:
        arch = default_architecture(model.n_unknowns, _UNN_KINDS[spec.kind], alpha=float(alphabet[-1]))
        monitor = StoppingMonitor(spec.effective_window, spec.threshold, spec.t_max)
        res = gdunn_run(model, arch, monitor, rng, lr=spec.lr)
        iters = res.iterations
        x = bpic_detect(model, res.x_hat, spec.t_bpic)
    return _slice_decisions(x, alphabet), iters


# --- trials ------------------------------------------------------------------


@dataclass
class TrialRecord:
    frame_index: int
    errors: dict
    symbols: int
    unn_iters: dict
    wall: dict


def _symbol_indices(z: np.ndarray, alphabet: np.ndarray) -> np.ndarray:
    return slice_to_alphabet(z.real, alphabet) * alphabet.size + slice_to_alphabet(z.imag, alphabet)


def _build_trial_model(
    cfg: OTFSConfig,
    csi_mode: str,
    n_paths: int,
    base_seed: int,
    point_index: int,
    frame_index: int,
) -> tuple[RealLinearModel, np.ndarray]:
    """Run the transmit/channel/receive/CSI chain for one frame; returns the
    real detection model and the transmitted data symbols."""
    n, m = cfg.n_doppler, cfg.m_delay
    bits_per_symbol = int(np.log2(cfg.mod_order))
    rng_data = trial_rng(base_seed, point_index, frame_index, _STREAM_DATA)
    rng_ch = trial_rng(base_seed, point_index, frame_index, _STREAM_CHANNEL)
    rng_noise = trial_rng(base_seed, point_index, frame_index, _STREAM_NOISE)

    bits = rng_data.integers(0, 2, size=cfg.n_data_symbols * bits_per_symbol)
    data = qam_modulate(bits, cfg.mod_order)
    frame = build_frame(cfg, data)
    ch = sample_channel(rng_ch, n_paths, cfg.k_max, cfg.l_max)

    u_dd = dd_domain_unitary(n, m)
    s = u_dd.conj().T @ vectorize(frame.grid)
    h_time = time_domain_channel_matrix(ch, n, m)
    r = transmit(s, h_time, NoiseSpec(cfg.sigma2), rng_noise)
    y_grid = devectorize(u_dd @ r, n, m)

    if csi_mode == "perfect":
        h_eff = effective_from_paths(ch, cfg)
        y_obs = vectorize(y_grid)[index_maps(cfg).rx_obs_indices]
        model_c = EffectiveModel(y=y_obs, h_eff=h_eff, sigma2=cfg.sigma2)
    else:
        est = estimate_channel(y_grid, cfg, sigma=np.sqrt(cfg.sigma2))
        model_c = build_effective_model(est, y_grid, cfg)
    return realify(model_c, cfg.mod_order), data


def run_trial(
    cfg: OTFSConfig,
    detectors: tuple[DetectorSpec, ...],
    csi_mode: str,
    n_paths: int,
    base_seed: int,
    point_index: int,
    frame_index: int,
) -> TrialRecord:
    """One full chain: bits -> frame -> channel -> noise -> CSI -> every
    detector on the same realization. Deterministic in its arguments."""
    model, data = _build_trial_model(cfg, csi_mode, n_paths, base_seed, point_index, frame_index)
    alphabet = model.constellation_1d
    truth = _symbol_indices(data, alphabet)
    errors = {}
    unn_iters = {}
    wall = {}
    for spec in detectors:
        rng_unn = trial_rng(
            base_seed, point_index, frame_index, _STREAM_UNN_BASE + DETECTOR_KINDS[spec.kind]
        )
        t0 = time.perf_counter()
        decisions, iters = detect(model, spec, rng_unn)
        wall[spec.kind] = time.perf_counter() - t0
        errors[spec.kind] = int(np.count_nonzero(_symbol_indices(decisions, alphabet) != truth))
        if iters is not None:
            unn_iters[spec.kind] = iters
    return TrialRecord(
        frame_index=frame_index,
        errors=errors,
        symbols=cfg.n_data_symbols,
        unn_iters=unn_iters,
        wall=wall,
    )


# --- campaign ----------------------------------------------------------------


@dataclass
class PointResult:
    detector: str
    snr_db: float
    pilot_power: float
    csi_mode: str
    frames: int
    symbols: int
    errors: int
    ser: float
    ci95: float
    mean_unn_iters: float | None
    median_unn_iters: float | None
    wall_ms: float


@dataclass
class CampaignResult:
    spec: CampaignSpec
    points: list[PointResult]
    trials: list[dict] = field(default_factory=list)


def ser_with_ci(errors: int, symbols: int) -> tuple[float, float]:
    """Proportion estimate with a normal-approximation 95% half-width."""
    p = errors / symbols
    ci = 1.96 * np.sqrt(p * (1.0 - p) / symbols)
    return p, float(ci)


def _run_point_frames(args) -> list[TrialRecord]:
    spec_dict, point_index, snr_db, pilot_power, frame_indices = args
    spec = CampaignSpec.from_dict(spec_dict)
    cfg = replace(spec.config, snr_db=snr_db, pilot_power=pilot_power)
    return [
        run_trial(cfg, spec.detectors, spec.csi_mode, spec.n_paths, spec.base_seed, point_index, fi)
        for fi in frame_indices
    ]


def run_campaign(
    spec: CampaignSpec,
    workers: int = 1,
    collect_trials: bool = False,
    progress=None,
    results_path: str | None = None,
) -> CampaignResult:
    """Execute every (snr, pilot_power) point. workers > 1 fans frames out to
    processes; the per-frame seeding contract makes the output identical for
    any worker count. progress, if given, is called as progress(point_index,
    frames_done, frames_total). results_path, if given, is rewritten after
    every completed point so a crash preserves the finished points."""
    result = CampaignResult(spec=spec, points=[])
    spec_dict = spec.to_dict()
    for point_index, snr_db, pilot_power in spec.points():
        frames = list(range(spec.n_frames))
        records: list[TrialRecord] = []
        if workers <= 1:
            cfg = replace(spec.config, snr_db=snr_db, pilot_power=pilot_power)
            running = {d.kind: 0 for d in spec.detectors}
            for fi in frames:
                rec = run_trial(cfg, spec.detectors, spec.csi_mode, spec.n_paths, spec.base_seed, point_index, fi)
                records.append(rec)
                if progress is not None:
                    progress(point_index, len(records), spec.n_frames)
                if spec.max_errors is not None:
                    for kind, errs in rec.errors.items():
                        running[kind] += errs
                    if max(running.values()) >= spec.max_errors:
                        break
        else:
            chunks = [frames[i : i + 64] for i in range(0, len(frames), 64)]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for part in pool.map(
                    _run_point_frames,
                    [(spec_dict, point_index, snr_db, pilot_power, c) for c in chunks],
                ):
                    records.extend(part)
                    if progress is not None:
                        progress(point_index, len(records), spec.n_frames)
        records.sort(key=lambda r: r.frame_index)
        for det in spec.detectors:
            errs = sum(r.errors[det.kind] for r in records)
            symbols = sum(r.symbols for r in records)
            p, ci = ser_with_ci(errs, symbols)
            wall_ms = 1000.0 * sum(r.wall[det.kind] for r in records)
            iters = [r.unn_iters[det.kind] for r in records if det.kind in r.unn_iters]
            mean_it = float(np.sum(iters, dtype=np.int64)) / len(iters) if iters else None
            median_it = float(np.median(np.asarray(iters))) if iters else None
            result.points.append(
                PointResult(
                    detector=det.kind,
                    snr_db=snr_db,
                    pilot_power=pilot_power,
                    csi_mode=spec.csi_mode,
                    frames=len(records),
                    symbols=symbols,
                    errors=errs,
                    ser=p,
                    ci95=ci,
                    mean_unn_iters=mean_it,
                    median_unn_iters=median_it,
                    wall_ms=wall_ms,
                )
            )
        if collect_trials:
            for r in records:
                for det in spec.detectors:
                    result.trials.append(
                        {
                            "detector": det.kind,
                            "snr_db": snr_db,
                            "pilot_power": pilot_power,
                            "csi_mode": spec.csi_mode,
                            "frame_index": r.frame_index,
                            "errors": r.errors[det.kind],
                            "symbols": r.symbols,
                            "unn_iters": r.unn_iters.get(det.kind),
                        }
                    )
        if results_path is not None:
            done = sorted(result.points, key=lambda p: (p.detector, p.snr_db, p.pilot_power, p.csi_mode))
            write_results_csv(done, results_path)
    result.points.sort(key=lambda p: (p.detector, p.snr_db, p.pilot_power, p.csi_mode))
    return result


# --- persistence ---------------------------------------------------------------

RESULTS_COLUMNS = [
    "detector",
    "snr_db",
    "pilot_power",
    "csi_mode",
    "frames",
    "symbols",
    "errors",
    "ser",
    "ci95",
    "mean_unn_iters",
    "median_unn_iters",
    "wall_ms",
]

TRIALS_COLUMNS = [
    "detector",
    "snr_db",
    "pilot_power",
    "csi_mode",
    "frame_index",
    "errors",
    "symbols",
    "unn_iters",
]


def _fmt(value) -> str:
    """Shortest round-trip decimal for floats; empty for None."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def results_csv_text(points: list[PointResult]) -> str:
    lines = [",".join(RESULTS_COLUMNS)]
    for p in points:
        lines.append(",".join(_fmt(getattr(p, c)) for c in RESULTS_COLUMNS))
    return "\n".join(lines) + "\n"


def write_results_csv(points: list[PointResult], path: str) -> None:
    with open(path, "w") as fh:
        fh.write(results_csv_text(points))


def write_trials_csv(trials: list[dict], path: str) -> None:
    rows = sorted(trials, key=lambda t: (t["detector"], t["snr_db"], t["pilot_power"], t["frame_index"]))
    with open(path, "w") as fh:
        fh.write(",".join(TRIALS_COLUMNS) + "\n")
        for t in rows:
            fh.write(",".join(_fmt(t[c]) for c in TRIALS_COLUMNS) + "\n")


def echo_spec_json(spec: CampaignSpec, path: str) -> None:
    payload = {"version": __version__, "campaign": spec.to_dict()}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
