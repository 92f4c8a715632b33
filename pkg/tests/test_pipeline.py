"""Pipeline orchestration: splits, window enumeration, parallel generation."""

import numpy as np
import pytest

from chandyn import pipeline
from chandyn.config import default_config
from chandyn.errors import DataError, LineageError


def tiny_cfg(**overrides):
    cfg = default_config()
    cfg["grid.num_subcarriers"] = 16
    cfg["grid.num_symbols"] = 2
    cfg["grid.num_tx_ports"] = 2
    cfg["paths.num_min"] = 3
    cfg["paths.num_max"] = 5
    cfg["drops.count"] = 4
    cfg["drops.slots"] = 18
    cfg.update(overrides)
    return cfg


class TestSplits:
    def test_deterministic_split(self):
        cfg = tiny_cfg()
        assert pipeline.split_drop_ids(cfg) == ([0, 1, 2], [3])

    def test_split_always_leaves_validation(self):
        cfg = tiny_cfg()
        cfg["dataset.train_fraction"] = 0.99
        train, val = pipeline.split_drop_ids(cfg)
        assert val == [3]

    def test_single_drop_all_train(self):
        cfg = tiny_cfg()
        cfg["drops.count"] = 1
        assert pipeline.split_drop_ids(cfg) == ([0], [])


class TestParallelGeneration:
    def test_threaded_generation_byte_identical(self, tmp_path):
        # per-drop seeds are seed + drop_index, so parallel and serial
        # generation agree bitwise
        cfg = tiny_cfg()
        a, b = tmp_path / "serial", tmp_path / "threaded"
        pipeline.generate_dataset(cfg, 3, a, threads=1)
        pipeline.generate_dataset(cfg, 3, b, threads=3)
        for name in ("train.chds", "val.chds", "manifest.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestWindows:
    def test_enumeration_and_normalization(self):
        cfg = tiny_cfg()
        windows = pipeline.collect_windows(cfg, 0, [0, 1])
        # slots 18, start max(kf.window=15, m=4) -> predicted slots 15..17
        assert len(windows) == 2 * 3
        win = windows[0]
        states, scale = win.norm[(0, "real")]
        assert states.shape == (5, 2, 16)
        assert np.abs(states).max() == 1.0
        assert scale > 0

    def test_too_few_slots_rejected(self):
        cfg = tiny_cfg()
        cfg["drops.slots"] = 15
        with pytest.raises(DataError):
            pipeline.collect_windows(cfg, 0, [0])

    def test_max_windows_cap(self):
        cfg = tiny_cfg()
        windows = pipeline.collect_windows(cfg, 0, [0, 1], max_windows=4)
        assert len(windows) == 4


class TestLineage:
    def test_hash_sensitive_to_config_and_seed(self):
        cfg = tiny_cfg()
        base = pipeline.lineage_hash(cfg, 1)
        assert pipeline.lineage_hash(cfg, 2) != base
        other = tiny_cfg(**{"drops.count": 5})
        assert pipeline.lineage_hash(other, 1) != base

    def test_check_lineage(self):
        manifest = {"lineage": "abc"}
        pipeline.check_lineage(manifest, {"lineage": "abc",
                                          "trained_split": "train"}, "val")
        with pytest.raises(LineageError):
            pipeline.check_lineage(manifest, {"lineage": "abc",
                                              "trained_split": "val"}, "val")
        with pytest.raises(LineageError):
            pipeline.check_lineage(manifest, {"lineage": "zzz",
                                              "trained_split": "train"}, "val")


class TestEvaluateOrderingSanity:
    def test_oracle_rollout_is_exact(self):
        cfg = tiny_cfg()
        windows = pipeline.collect_windows(cfg, 0, [0])
        rows = pipeline.rollout_per_step_mae(cfg, windows, model=None, steps=2,
                                             oracle=True)
        assert all(row["mean_l1"] == 0.0 for row in rows)


class TestTimePooling:
    def test_time_pooling_path(self):
        cfg = tiny_cfg()
        cfg["eval.pooling"] = "time"
        windows = pipeline.collect_windows(cfg, 0, [0, 1])
        res = pipeline.evaluate_predictors(cfg, windows, models={}, run_kf=True)
        rep = res["report"]
        # one pooled sample per (window, symbol) instead of per (t, f)
        assert rep.num_samples == len(windows) * 2
        assert set(rep.capacities) == {"perfect", "aged", "predicted_kf"}
        assert rep.capacities["aged"] <= rep.capacities["perfect"] + 1e-12
