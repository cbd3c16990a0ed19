import json
import struct

import numpy as np
import pytest

from modedbm.cli import main
from modedbm.data import load_bitstrings
from modedbm.likelihood import exact_log_z
from modedbm.model import DbmParams


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGenerateData:
    def test_shifting_bar(self, tmp_path, capsys):
        out = tmp_path / "bars.txt"
        code, stdout, _ = run_cli(
            capsys, "generate-data", "--n-v", 4, "--out", out
        )
        assert code == 0
        assert "4 x 4 bits" in stdout
        assert out.read_text() == "1100\n0110\n0011\n1001\n"

    def test_default_output_location(self, tmp_path, capsys):
        code, _, _ = run_cli(
            capsys, "generate-data", "--n-v", 6, "--out-dir", tmp_path
        )
        assert code == 0
        assert len(load_bitstrings(tmp_path / "data.txt")) == 6

    def test_idx_ingestion(self, tmp_path, capsys):
        images = np.array(
            [[[0, 200], [130, 10]], [[255, 0], [0, 255]]], dtype=np.uint8
        )
        idx_path = tmp_path / "images.idx"
        idx_path.write_bytes(
            struct.pack(">iiii", 0x00000803, *images.shape) + images.tobytes()
        )
        out = tmp_path / "bits.txt"
        code, _, _ = run_cli(
            capsys, "generate-data", "--kind", "idx", "--images", idx_path,
            "--out", out,
        )
        assert code == 0
        assert out.read_text() == "0110\n1001\n"

    def test_idx_requires_images(self, tmp_path, capsys):
        code, _, stderr = run_cli(
            capsys, "generate-data", "--kind", "idx", "--out-dir", tmp_path
        )
        assert code == 1
        assert "--images" in stderr


class TestTrain:
    def make_data(self, tmp_path, capsys, n_v=4):
        data = tmp_path / "bars.txt"
        run_cli(capsys, "generate-data", "--n-v", n_v, "--out", data)
        return data

    def test_writes_checkpoint_and_trace(self, tmp_path, capsys):
        data = self.make_data(tmp_path, capsys)
        code, stdout, _ = run_cli(
            capsys, "train", "--data", data, "--shape", "4,3,2",
            "--updates", 40, "--lr-start", 0.2, "--lr-end", 0.01,
            "--out-dir", tmp_path, "--seed", 3,
        )
        assert code == 0
        assert "final avg_ll=" in stdout
        params = DbmParams.load(tmp_path / "model.json")
        assert params.shape.sizes == (4, 3, 2)
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        assert lines[0] == "update,avg_ll,ll_kind,mode_updates_so_far,lr"
        assert lines[1].startswith("40,")

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        data = self.make_data(tmp_path, capsys)
        cfg = tmp_path / "train.json"
        cfg.write_text(json.dumps({
            "data": str(data),
            "shape": [4, 3],
            "updates": 500,
            "lr-start": 0.2,
            "lr-end": 0.01,
            "seed": 9,
        }))
        code, stdout, _ = run_cli(
            capsys, "train", "--config", cfg, "--updates", 25,
            "--out-dir", tmp_path,
        )
        assert code == 0
        assert "trained 25 updates" in stdout

    def test_missing_arguments(self, tmp_path, capsys):
        code, _, stderr = run_cli(capsys, "train", "--out-dir", tmp_path)
        assert code == 1
        assert "--data" in stderr and "--shape" in stderr


class TestEvalAndAis:
    @pytest.fixture
    def checkpoint(self, tmp_path, capsys):
        data = tmp_path / "bars.txt"
        run_cli(capsys, "generate-data", "--n-v", 4, "--out", data)
        run_cli(
            capsys, "train", "--data", data, "--shape", "4,3",
            "--updates", 30, "--lr-start", 0.2, "--lr-end", 0.01,
            "--out-dir", tmp_path, "--seed", 5,
        )
        return tmp_path / "model.json", data

    def test_eval_exact(self, checkpoint, capsys):
        model, data = checkpoint
        code, stdout, _ = run_cli(
            capsys, "eval", "--model", model, "--data", data, "--ll", "exact"
        )
        assert code == 0
        payload = json.loads(stdout)
        assert set(payload) == {"log_z", "exact", "avg_ll", "n_runs", "n_intermediate"}
        assert payload["exact"] is True
        assert payload["n_runs"] == 0
        want = exact_log_z(DbmParams.load(model)).log_z
        assert payload["log_z"] == pytest.approx(want, abs=1e-12)

    def test_eval_without_data(self, checkpoint, capsys):
        model, _ = checkpoint
        code, stdout, _ = run_cli(capsys, "eval", "--model", model)
        payload = json.loads(stdout)
        assert code == 0
        assert payload["avg_ll"] is None

    def test_eval_ais_mode(self, checkpoint, capsys):
        model, data = checkpoint
        code, stdout, _ = run_cli(
            capsys, "eval", "--model", model, "--data", data, "--ll", "ais",
            "--ais-runs", 5, "--ais-intermediate", 20, "--seed", 2,
        )
        payload = json.loads(stdout)
        assert code == 0
        assert payload["exact"] is False
        assert payload["n_runs"] == 5
        assert payload["n_intermediate"] == 20
        want = exact_log_z(DbmParams.load(model)).log_z
        assert abs(payload["log_z"] - want) < 0.5

    def test_ais_reports_spread(self, checkpoint, capsys):
        model, _ = checkpoint
        code, stdout, _ = run_cli(
            capsys, "ais", "--model", model, "--runs", 6,
            "--intermediate", 25, "--seed", 4,
        )
        payload = json.loads(stdout)
        assert code == 0
        assert set(payload) == {
            "log_z", "exact", "n_runs", "n_intermediate", "log_z_stderr"
        }
        assert payload["log_z_stderr"] >= 0.0

    def test_ais_deterministic_in_seed(self, checkpoint, capsys):
        model, _ = checkpoint
        _, out1, _ = run_cli(
            capsys, "ais", "--model", model, "--runs", 4, "--intermediate", 10,
            "--seed", 7,
        )
        _, out2, _ = run_cli(
            capsys, "ais", "--model", model, "--runs", 4, "--intermediate", 10,
            "--seed", 7,
        )
        assert out1 == out2

    def test_eval_requires_model(self, capsys):
        code, _, stderr = run_cli(capsys, "eval")
        assert code == 1
        assert "--model" in stderr


class TestExperiment:
    def config_file(self, tmp_path, **overrides):
        payload = {
            "dataset": {"kind": "shifting-bar", "n_v": 6, "bar_len": 3},
            "method": "CD",
            "n_h_totals": [3, 4],
            "total_updates": 15,
            "lr_start": 0.2,
            "lr_end": 0.01,
            "ensemble_size": 2,
            "seed_base": 1,
        }
        payload.update(overrides)
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps(payload))
        return path

    def test_writes_reports(self, tmp_path, capsys):
        cfg = self.config_file(tmp_path)
        code, stdout, _ = run_cli(
            capsys, "experiment", "--config", cfg, "--out-dir", tmp_path
        )
        assert code == 0
        assert "4 runs (0 failed)" in stdout
        runs = (tmp_path / "runs.csv").read_text().splitlines()
        assert runs[0] == "method,n_v,n_h_total,alpha_topo,seed,final_avg_ll,ll_kind,wall_seconds"
        assert len(runs) == 5
        summary = (tmp_path / "summary.csv").read_text().splitlines()
        assert len(summary) == 3

    def test_rerun_is_reproducible_modulo_wall(self, tmp_path, capsys):
        cfg = self.config_file(tmp_path)
        run_cli(capsys, "experiment", "--config", cfg, "--out-dir", tmp_path / "a")
        run_cli(capsys, "experiment", "--config", cfg, "--out-dir", tmp_path / "b")

        def strip_wall(path):
            lines = path.read_text().splitlines()
            return [",".join(line.split(",")[:-1]) for line in lines]

        assert strip_wall(tmp_path / "a" / "runs.csv") == strip_wall(
            tmp_path / "b" / "runs.csv"
        )
        assert (tmp_path / "a" / "summary.csv").read_bytes() == (
            tmp_path / "b" / "summary.csv"
        ).read_bytes()

    def test_flag_overrides(self, tmp_path, capsys):
        cfg = self.config_file(tmp_path)
        code, stdout, _ = run_cli(
            capsys, "experiment", "--config", cfg, "--out-dir", tmp_path,
            "--ensemble-size", 1, "--method", "RBM-CD", "--updates", 10,
        )
        assert code == 0
        assert "2 runs" in stdout
        rows = (tmp_path / "runs.csv").read_text().splitlines()[1:]
        assert all(r.startswith("RBM-CD,") for r in rows)

    def test_failing_run_sets_exit_code(self, tmp_path, capsys):
        cfg = self.config_file(tmp_path, n_h_totals=[1], ensemble_size=1)
        code, stdout, _ = run_cli(
            capsys, "experiment", "--config", cfg, "--out-dir", tmp_path
        )
        assert code == 1
        assert "1 failed" in stdout
        rows = (tmp_path / "runs.csv").read_text().splitlines()[1:]
        assert rows[0].split(",")[6] == "error"

    def test_requires_config(self, capsys):
        code, _, stderr = run_cli(capsys, "experiment")
        assert code == 1
        assert "--config" in stderr


class TestAggregate:
    def test_rebuilds_summary_byte_identically(self, tmp_path, capsys):
        cfg_path = tmp_path / "experiment.json"
        cfg_path.write_text(json.dumps({
            "dataset": {"kind": "shifting-bar", "n_v": 6},
            "method": "CD",
            "n_h_totals": [4],
            "total_updates": 12,
            "lr_start": 0.2,
            "lr_end": 0.01,
            "ensemble_size": 3,
        }))
        run_cli(capsys, "experiment", "--config", cfg_path, "--out-dir", tmp_path)
        original = (tmp_path / "summary.csv").read_bytes()
        rebuilt_path = tmp_path / "summary2.csv"
        code, stdout, _ = run_cli(
            capsys, "aggregate", "--runs", tmp_path / "runs.csv",
            "--out", rebuilt_path,
        )
        assert code == 0
        assert "aggregated 3 runs" in stdout
        assert rebuilt_path.read_bytes() == original

    def test_missing_runs_file(self, tmp_path, capsys):
        code, _, stderr = run_cli(
            capsys, "aggregate", "--runs", tmp_path / "nope.csv"
        )
        assert code == 1
        assert "error" in stderr
