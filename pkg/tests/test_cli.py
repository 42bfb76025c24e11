import json
import subprocess
import sys

import pytest

from otfs_sim.cli import main


def spec_dict(**overrides):
    base = {
        "config": {"n_doppler": 8, "m_delay": 8, "k_p": 3, "l_p": 3, "pilot_power": 1.0,
                   "k_max": 1, "l_max": 2, "mod_order": 16, "snr_db": 25.0},
        "snr_list": [25.0],
        "pilot_power_list": [1.0],
        "csi_mode": "estimated",
        "n_frames": 3,
        "base_seed": 4,
        "detectors": [
            {"kind": "MMSE"},
            {"kind": "GDUNN-BPIC", "window_size": 8, "t_max": 40},
        ],
    }
    base.update(overrides)
    return base


@pytest.fixture
def spec_file(tmp_path):
    path = tmp_path / "campaign.json"
    path.write_text(json.dumps(spec_dict()))
    return path


class TestSimulateCli:
    def test_happy_path(self, tmp_path, spec_file):
        out = tmp_path / "out"
        rc = main(["--config", str(spec_file), "--out", str(out), "--quiet"])
        assert rc == 0
        results = (out / "results.csv").read_text().strip().split("\n")
        assert results[0].startswith("detector,snr_db,")
        assert len(results) == 3
        echo = json.loads((out / "campaign.json").read_text())
        assert echo["campaign"]["n_frames"] == 3
        assert echo["campaign"]["config"]["snr_db"] == 25.0

    def test_overrides_applied(self, tmp_path, spec_file):
        out = tmp_path / "out"
        rc = main([
            "--config", str(spec_file), "--out", str(out), "--quiet",
            "--frames", "2", "--seed", "99", "--detectors", "MMSE", "--snr", "20",
            "--csi", "perfect",
        ])
        assert rc == 0
        echo = json.loads((out / "campaign.json").read_text())
        assert echo["campaign"]["n_frames"] == 2
        assert echo["campaign"]["base_seed"] == 99
        assert echo["campaign"]["snr_list"] == [20.0]
        assert echo["campaign"]["csi_mode"] == "perfect"
        assert [d["kind"] for d in echo["campaign"]["detectors"]] == ["MMSE"]

    def test_missing_config_is_config_error(self, tmp_path):
        rc = main(["--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o"), "--quiet"])
        assert rc == 1

    def test_invalid_fields_are_config_errors(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(spec_dict(csi_mode="magic")))
        assert main(["--config", str(bad), "--out", str(tmp_path / "o"), "--quiet"]) == 1
        bad.write_text(json.dumps(spec_dict(detectors=[{"kind": "EP"}])))
        assert main(["--config", str(bad), "--out", str(tmp_path / "o"), "--quiet"]) == 1
        assert main(["--out", str(tmp_path / "o")]) == 1  # missing --config

    def test_runtime_error_exit_code(self, tmp_path, spec_file):
        blocker = tmp_path / "blocked"
        blocker.write_text("not a directory")
        rc = main(["--config", str(spec_file), "--out", str(blocker), "--quiet"])
        assert rc == 2

    def test_trace_outputs(self, tmp_path, spec_file):
        out = tmp_path / "traced"
        rc = main(["--config", str(spec_file), "--out", str(out), "--quiet", "--trace"])
        assert rc == 0
        trials = (out / "trials.csv").read_text().strip().split("\n")
        assert trials[0] == "detector,snr_db,pilot_power,csi_mode,frame_index,errors,symbols,unn_iters"
        assert len(trials) == 1 + 3 * 2
        lines = (out / "debug_traces.jsonl").read_text().strip().split("\n")
        rows = [json.loads(l) for l in lines]
        assert any("loss" in r for r in rows)
        assert any("residual_norm" in r for r in rows)

    def test_deterministic_output_bytes(self, tmp_path, spec_file):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["--config", str(spec_file), "--out", str(out1), "--quiet"]) == 0
        assert main(["--config", str(spec_file), "--out", str(out2), "--quiet"]) == 0

        def strip_wall(text):
            return ["," .join(line.split(",")[:-1]) for line in text.strip().split("\n")]

        assert strip_wall((out1 / "results.csv").read_text()) == strip_wall((out2 / "results.csv").read_text())

    def test_console_script_installed(self, tmp_path, spec_file):
        out = tmp_path / "script_out"
        proc = subprocess.run(
            [sys.executable, "-m", "otfs_sim.cli", "--config", str(spec_file), "--out", str(out), "--quiet"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (out / "results.csv").exists()
