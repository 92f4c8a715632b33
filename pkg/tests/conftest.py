"""Shared fixtures: the pinned desk-scale testbed and trained models.

The testbed is the empirically calibrated configuration the acceptance
suite runs on: T=8, F=64, 8 ports, 12-20 paths, 15 km/h, 28 drops of 20
slots (8 training drops -> 2048 samples, 20 evaluation drops -> 100
windows with a full 15-slot KF history), seed 42.
"""

import numpy as np
import pytest

from chandyn import dataset, pipeline
from chandyn.config import default_config
from chandyn.neuralnet import (
    ModelSpec,
    TrainConfig,
    build_model,
    samples_to_arrays,
    train,
)

TESTBED_SEED = 42
TRAIN_EPOCHS = 14
BASE_CHANNELS = 8


def testbed_config():
    cfg = default_config()
    cfg["drops.count"] = 28
    cfg["drops.slots"] = 20
    cfg["dataset.train_fraction"] = 0.29       # 8 train / 20 eval drops
    cfg["paths.num_min"] = 12
    cfg["paths.num_max"] = 20
    cfg["seed"] = TESTBED_SEED
    cfg["model.base_channels"] = BASE_CHANNELS
    cfg["model.epochs"] = TRAIN_EPOCHS
    return cfg


@pytest.fixture(scope="session")
def testbed():
    cfg = testbed_config()
    train_ids, val_ids = pipeline.split_drop_ids(cfg)
    train_samples = []
    for d in train_ids:
        train_samples += dataset.build_samples(
            pipeline.drop_slots(cfg, TESTBED_SEED, d), m=4, drop_id=d)
    val_samples = []
    for d in val_ids[:4]:
        val_samples += dataset.build_samples(
            pipeline.drop_slots(cfg, TESTBED_SEED, d), m=4, drop_id=d)
    windows = pipeline.collect_windows(cfg, TESTBED_SEED, val_ids)
    assert len(train_samples) >= 2000
    assert len(windows) >= 100
    return {"cfg": cfg, "train_samples": train_samples,
            "val_samples": val_samples, "windows": windows}


def _train_variant(arch, testbed):
    cfg = testbed["cfg"]
    spec = ModelSpec(variant="next_frame", arch=arch, depth=4,
                     base_channels=BASE_CHANNELS, memory=4, grid=(8, 64))
    model = build_model(spec, seed=TESTBED_SEED)
    x, y, _ = samples_to_arrays(testbed["train_samples"], spec)
    xv, _, bv = samples_to_arrays(testbed["val_samples"], spec)
    tc = TrainConfig(epochs=TRAIN_EPOCHS, batch_size=cfg["model.batch_size"],
                     learning_rate=cfg["model.learning_rate"], seed=TESTBED_SEED)
    report = train(model, x, y, xv, bv, tc)
    return model, report


@pytest.fixture(scope="session")
def trained_models(testbed):
    unet, unet_report = _train_variant("unet", testbed)
    ae, ae_report = _train_variant("ae", testbed)
    return {"unet": (unet, unet_report), "ae": (ae, ae_report)}


@pytest.fixture(scope="session")
def evaluation(testbed, trained_models):
    cfg = testbed["cfg"]
    models = {name: pair[0] for name, pair in trained_models.items()}
    return pipeline.evaluate_predictors(cfg, testbed["windows"], models,
                                        run_kf=True)
