"""Command-line front door.

    simulate --config campaign.json --out results/ [--seed N] [--threads N]
             [--detectors MMSE,MMSE-BPIC,GDUNN-BPIC] [--snr 20,25,30]
             [--pilot-power 1,2,4] [--csi perfect|estimated] [--frames N]
             [--trace]

Exit codes: 0 success, 1 configuration error, 2 runtime error.

The output directory receives results.csv (one row per detector/point, sorted
canonically), campaign.json (the fully resolved spec), and with --trace also
trials.csv (per-frame rows) plus debug_traces.jsonl (per-iteration detector
diagnostics for the first frame of each point).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .bpic import bpic_detect, mmse_init
from .frame import ConfigError
from .harness import (
    CampaignSpec,
    DetectorSpec,
    echo_spec_json,
    run_campaign,
    write_results_csv,
    write_trials_csv,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; bad args are config errors
        raise ConfigError(message)


def build_parser() -> _Parser:
    p = _Parser(prog="simulate", description="Run a Monte Carlo OTFS detection campaign.")
    p.add_argument("--config", required=True, help="campaign spec JSON")
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--seed", type=int, default=None, help="override base_seed")
    p.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--detectors", default=None, help="comma-separated kinds to run")
    p.add_argument("--snr", default=None, help="comma-separated SNR (dB) list override")
    p.add_argument("--pilot-power", default=None, help="comma-separated pilot power list override")
    p.add_argument("--csi", choices=["perfect", "estimated"], default=None)
    p.add_argument("--frames", type=int, default=None, help="frames per point override")
    p.add_argument("--trace", action="store_true", help="also write per-trial records and debug traces")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return p


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}") from exc


def resolve_spec(args) -> CampaignSpec:
    try:
        spec = CampaignSpec.from_json(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read campaign spec {args.config!r}: {exc}") from exc
    if args.seed is not None:
        spec = replace(spec, base_seed=args.seed)
    if args.snr is not None:
        spec = replace(spec, snr_list=_float_list(args.snr))
    if args.pilot_power is not None:
        spec = replace(spec, pilot_power_list=_float_list(args.pilot_power))
    if args.csi is not None:
        spec = replace(spec, csi_mode=args.csi)
    if args.frames is not None:
        spec = replace(spec, n_frames=args.frames)
    if args.detectors is not None:
        kinds = [k.strip() for k in args.detectors.split(",") if k.strip()]
        have = {d.kind: d for d in spec.detectors}
        dets = tuple(have.get(k, DetectorSpec(k)) for k in kinds)
        spec = replace(spec, detectors=dets)
    return spec


def _debug_traces(spec: CampaignSpec, path: str) -> None:
    """Per-iteration diagnostics for frame 0 of each point (sampled debug aid)."""
    from .gdunn import StoppingMonitor, default_architecture, gdunn_run
    from .harness import DETECTOR_KINDS, _STREAM_UNN_BASE, _build_trial_model, trial_rng

    with open(path, "w") as fh:
        for point_index, snr_db, pilot_power in spec.points():
            cfg = replace(spec.config, snr_db=snr_db, pilot_power=pilot_power)
            model = _build_trial_model(cfg, spec.csi_mode, spec.n_paths, spec.base_seed, point_index, 0)[0]
            for det in spec.detectors:
                base = {
                    "detector": det.kind,
                    "snr_db": snr_db,
                    "pilot_power": pilot_power,
                    "frame_index": 0,
                }
                if model.has_zero_column():
                    continue
                if det.is_unn:
                    rng = trial_rng(spec.base_seed, point_index, 0, _STREAM_UNN_BASE + DETECTOR_KINDS[det.kind])
                    arch = default_architecture(
                        model.n_unknowns, det.kind == "GDUNN-BPIC", alpha=float(model.constellation_1d[-1])
                    )
                    res = gdunn_run(model, arch, StoppingMonitor(det.effective_window, det.threshold, det.t_max), rng, lr=det.lr)
                    for i, (lv, vv) in enumerate(zip(res.loss_history, res.variance_history), start=1):
                        row = dict(base, i=i, loss=None if np.isnan(lv) else lv, variance=None if np.isnan(vv) else vv)
                        fh.write(json.dumps(row) + "\n")
                    x0 = res.x_hat
                else:
                    x0 = mmse_init(model)
                if det.kind != "MMSE":
                    trace: list = []
                    bpic_detect(model, x0, det.t_bpic, trace=trace)
                    for row in trace:
                        fh.write(json.dumps(dict(base, **row)) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        spec = resolve_spec(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        os.makedirs(args.out, exist_ok=True)
        echo_spec_json(spec, os.path.join(args.out, "campaign.json"))

        def progress(point_index, done, total):
            if not args.quiet and (done % 200 == 0 or done == total):
                print(f"point {point_index}: {done}/{total} frames", file=sys.stderr)

        results_path = os.path.join(args.out, "results.csv")
        result = run_campaign(
            spec,
            workers=max(1, args.threads),
            collect_trials=args.trace,
            progress=progress,
            results_path=results_path,
        )
        write_results_csv(result.points, results_path)
        if args.trace:
            write_trials_csv(result.trials, os.path.join(args.out, "trials.csv"))
            _debug_traces(spec, os.path.join(args.out, "debug_traces.jsonl"))
        if not args.quiet:
            print(f"wrote {os.path.join(args.out, 'results.csv')}", file=sys.stderr)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
