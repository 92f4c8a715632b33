"""Config schema and CLI subcommand integration (tiny grids for speed)."""

import json
import os

import numpy as np
import pytest

from chandyn import cli, dataset, pipeline
from chandyn.config import default_config, load_config, parse_config_text
from chandyn.errors import ConfigurationError

TINY = """
# tiny experiment
grid.num_subcarriers = 16
grid.num_symbols = 4
grid.num_tx_ports = 2
paths.num_min = 4
paths.num_max = 6
drops.count = 4
drops.slots = 12
dataset.train_fraction = 0.5
model.variant = next_frame
model.arch = unet
model.depth = 2
model.base_channels = 4
model.epochs = 2
model.batch_size = 16
kf.order = 2
kf.window = 8
seed = 5
"""


@pytest.fixture()
def tiny_config(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(TINY)
    return path


class TestConfig:
    def test_defaults_complete(self):
        cfg = default_config()
        assert cfg["grid.num_subcarriers"] == 64
        assert cfg["eval.epsilon"] == 0.1
        cfg.grid_spec()
        cfg.drop_config()

    def test_parse_and_types(self, tiny_config):
        cfg = load_config(tiny_config)
        assert cfg["grid.num_subcarriers"] == 16
        assert cfg["model.arch"] == "unet"
        assert cfg["seed"] == 5

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigurationError, match="grid.bogus"):
            parse_config_text("grid.bogus = 3")

    def test_bad_type_names_key(self):
        with pytest.raises(ConfigurationError, match="drops.count"):
            parse_config_text("drops.count = many")

    def test_bad_choice(self):
        with pytest.raises(ConfigurationError, match="model.arch"):
            parse_config_text("model.arch = resnet")

    def test_none_only_for_optional(self):
        cfg = parse_config_text("paths.rician_k_db = none")
        assert cfg["paths.rician_k_db"] is None
        with pytest.raises(ConfigurationError):
            parse_config_text("drops.count = none")

    def test_cross_field_validation(self):
        with pytest.raises(ConfigurationError, match="num_min"):
            parse_config_text("paths.num_min = 9\npaths.num_max = 4")


def run_cli(*argv):
    return cli.main(list(argv))


@pytest.fixture()
def generated(tmp_path, tiny_config):
    data = tmp_path / "data"
    code = run_cli("generate", "--config", str(tiny_config), "--out", str(data))
    assert code == 0
    return tmp_path, tiny_config, data


class TestGenerate:
    def test_manifest_contents(self, generated):
        _, _, data = generated
        manifest = pipeline.load_manifest(data)
        # window arithmetic: drops * (slots - m) * ports * 2 components
        assert manifest["sample_count"] == 4 * (12 - 4) * 2 * 2
        assert manifest["splits"] == {"train": [0, 1], "val": [2, 3]}
        assert manifest["coherence_time_ms"] == pytest.approx(3.68, abs=0.01)
        assert manifest["grid"] == {"T": 4, "F": 16, "ports": 2}

    def test_window_arithmetic_example(self, tmp_path):
        cfg_path = tmp_path / "c.cfg"
        cfg_path.write_text(
            "grid.num_subcarriers = 16\ngrid.num_symbols = 2\n"
            "paths.num_min = 2\npaths.num_max = 3\n"
            "drops.count = 2\ndrops.slots = 10\ndataset.train_fraction = 0.5\n")
        out = tmp_path / "d"
        assert run_cli("generate", "--config", str(cfg_path), "--out", str(out)) == 0
        manifest = pipeline.load_manifest(out)
        n_t = manifest["grid"]["ports"]
        assert manifest["sample_count"] == 2 * (10 - 5 + 1) * n_t * 2

    def test_byte_identical_rerun(self, generated, tmp_path):
        _, cfg_path, data = generated
        data2 = tmp_path / "data2"
        assert run_cli("generate", "--config", str(cfg_path), "--out", str(data2)) == 0
        for name in ("train.chds", "val.chds", "manifest.json"):
            assert (data / name).read_bytes() == (data2 / name).read_bytes()

    def test_check_mode(self, tmp_path, tiny_config):
        out = tmp_path / "chk"
        assert run_cli("generate", "--config", str(tiny_config),
                       "--out", str(out), "--check") == 0

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("drops.count = -3")
        assert run_cli("generate", "--config", str(bad),
                       "--out", str(tmp_path / "x")) == 1


@pytest.fixture()
def trained(generated):
    tmp_path, cfg_path, data = generated
    ckpt = tmp_path / "model.chmd"
    code = run_cli("train", "--config", str(cfg_path), "--data", str(data),
                   "--out-checkpoint", str(ckpt))
    assert code == 0
    return tmp_path, cfg_path, data, ckpt


class TestTrain:
    def test_writes_checkpoint_and_csv(self, trained):
        tmp_path, _, _, ckpt = trained
        assert ckpt.exists()
        csv_path = tmp_path / "model_training.csv"
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "epoch,train_l1,val_l1"
        assert len(lines) == 3

    def test_epochs_zero_initialized_checkpoint(self, generated):
        tmp_path, cfg_path, data = generated
        ckpt = tmp_path / "init.chmd"
        assert run_cli("train", "--config", str(cfg_path), "--data", str(data),
                       "--out-checkpoint", str(ckpt), "--epochs", "0") == 0
        from chandyn.neuralnet import load_checkpoint, predict

        model, _, extra = load_checkpoint(ckpt)
        assert extra["epochs"] == 0
        w = np.zeros((4, 4, 16), dtype=np.float32)
        assert predict(model, w).shape == (4, 16)

    def test_same_seed_identical_checkpoint(self, generated):
        tmp_path, cfg_path, data = generated
        c1, c2 = tmp_path / "a.chmd", tmp_path / "b.chmd"
        for c in (c1, c2):
            assert run_cli("train", "--config", str(cfg_path), "--data",
                           str(data), "--out-checkpoint", str(c)) == 0
        assert c1.read_bytes() == c2.read_bytes()

    def test_check_mode(self, generated):
        tmp_path, cfg_path, data = generated
        ckpt = tmp_path / "ck.chmd"
        assert run_cli("train", "--config", str(cfg_path), "--data", str(data),
                       "--out-checkpoint", str(ckpt), "--check") == 0


class TestEvaluate:
    def test_reports_written(self, trained):
        tmp_path, cfg_path, data, ckpt = trained
        report_dir = tmp_path / "report"
        code = run_cli("evaluate", "--data", str(data), "--checkpoint", str(ckpt),
                       "--report-dir", str(report_dir), "--check")
        assert code == 0
        mae = (report_dir / "mae_comparison.csv").read_text().splitlines()
        assert mae[0] == "mode,l1,n_windows"
        modes = [line.split(",")[0] for line in mae[1:]]
        assert modes[:2] == ["aged", "kf"]
        assert "model" in modes[2]
        assert (report_dir / "capacity_report.json").exists()
        assert (report_dir / "capacity_cdf_perfect.csv").exists()

    def test_lineage_guard_against_train_split(self, trained):
        tmp_path, _, data, ckpt = trained
        code = run_cli("evaluate", "--data", str(data), "--checkpoint", str(ckpt),
                       "--report-dir", str(tmp_path / "r2"), "--split", "train")
        assert code == 2

    def test_lineage_guard_against_foreign_data(self, trained, tmp_path):
        _, cfg_path, data, ckpt = trained
        other_cfg = tmp_path / "other.cfg"
        other_cfg.write_text(cfg_path.read_text().replace("seed = 5", "seed = 6"))
        other = tmp_path / "other_data"
        assert run_cli("generate", "--config", str(other_cfg),
                       "--out", str(other)) == 0
        code = run_cli("evaluate", "--data", str(other), "--checkpoint", str(ckpt),
                       "--report-dir", str(tmp_path / "r3"))
        assert code == 2

    def test_aged_row_matches_direct_mae(self, trained):
        # aged l1 from the report equals a direct recomputation over the
        # same normalized windows
        tmp_path, _, data, ckpt = trained
        report_dir = tmp_path / "aged_check"
        assert run_cli("evaluate", "--data", str(data), "--checkpoint", str(ckpt),
                       "--report-dir", str(report_dir)) == 0
        manifest = pipeline.load_manifest(data)
        cfg = pipeline.manifest_config(manifest)
        windows = pipeline.collect_windows(cfg, manifest["seed"],
                                           manifest["splits"]["val"])
        m = cfg["dataset.memory"]
        vals = []
        for win in windows:
            for port in range(2):
                for comp in ("real", "imag"):
                    states, _ = win.norm[(port, comp)]
                    vals.append(float(np.mean(np.abs(states[m - 1] - states[m]))))
        expect = float(np.mean(vals))
        lines = (report_dir / "mae_comparison.csv").read_text().splitlines()
        aged = float(lines[1].split(",")[1])
        assert aged == pytest.approx(expect, rel=1e-12)


class TestRollout:
    def test_four_rows_and_step_one_consistency(self, trained):
        tmp_path, _, data, ckpt = trained
        report_dir = tmp_path / "ev"
        assert run_cli("evaluate", "--data", str(data), "--checkpoint", str(ckpt),
                       "--report-dir", str(report_dir)) == 0
        out = tmp_path / "roll.csv"
        assert run_cli("rollout", "--data", str(data), "--checkpoint", str(ckpt),
                       "--steps", "4", "--out", str(out), "--check") == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 5
        step1 = float(lines[1].split(",")[1])
        mae_lines = (report_dir / "mae_comparison.csv").read_text().splitlines()
        model_l1 = float(mae_lines[3].split(",")[1])
        assert step1 == model_l1          # bitwise: same windows, same batching

    def test_oracle_all_steps_zero(self, generated):
        tmp_path, _, data = generated
        out = tmp_path / "oracle.csv"
        assert run_cli("rollout", "--data", str(data), "--steps", "3",
                       "--out", str(out), "--oracle") == 0
        for line in out.read_text().strip().splitlines()[1:]:
            assert float(line.split(",")[1]) == 0.0


class TestOtherCommands:
    def test_kf_baseline(self, tmp_path, tiny_config):
        out = tmp_path / "kf.csv"
        assert run_cli("kf-baseline", "--config", str(tiny_config),
                       "--out", str(out)) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "mode,l1,n_windows"
        assert {l.split(",")[0] for l in lines[1:]} == {"aged", "kf"}

    def test_trace_emulate_ingest_round_trip(self, tmp_path, tiny_config):
        trace_csv = tmp_path / "trace.csv"
        assert run_cli("trace-emulate", "--config", str(tiny_config),
                       "--out", str(trace_csv), "--check") == 0
        out = tmp_path / "trace_data"
        assert run_cli("trace-ingest", "--config", str(tiny_config),
                       "--in", str(trace_csv), "--out", str(out), "--check") == 0
        samples = dataset.read_dataset(out / "trace.chds")
        assert samples[0].states.shape[1] == 1        # single-symbol images

    def test_trace_ingest_bad_file_exit_code(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("snapshot_index,port,subcarrier,real,imag\n0,0,0,x,1\n")
        assert run_cli("trace-ingest", "--in", str(bad)) == 2

    def test_usage_error_exit_code(self):
        assert run_cli("generate") == 1          # missing --out


class TestNoKf:
    def test_evaluate_without_kf(self, trained):
        tmp_path, _, data, ckpt = trained
        report_dir = tmp_path / "nokf"
        assert run_cli("evaluate", "--data", str(data), "--checkpoint", str(ckpt),
                       "--report-dir", str(report_dir), "--no-kf") == 0
        lines = (report_dir / "mae_comparison.csv").read_text().splitlines()
        modes = [l.split(",")[0] for l in lines[1:]]
        assert "kf" not in modes and "aged" in modes
