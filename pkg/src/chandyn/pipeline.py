"""End-to-end experiment orchestration shared by the CLI and the tests.

Generation writes a dataset directory: train.chds / val.chds plus a JSON
manifest carrying the canonical config, the per-split drop ids, file
hashes and a lineage hash.  Training stamps the lineage hash and split
into the checkpoint; evaluation refuses to score a checkpoint on the
split it was trained on.

Evaluation regenerates the eval drops' complex slot trajectories
deterministically (per-drop seed = seed + drop_id), then scores every
predicted slot s >= max(kf.window, memory): persistence (aged), the
per-pixel AR/Kalman baseline, and any checkpointed models, both as
normalized-domain MAE and as epsilon-outage capacity under MRT precoding.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import arkalman, chanmodel, dataset, evalsuite
from .config import ExperimentConfig
from .errors import DataError, FormatError, LineageError, UnboundedCoherenceError
from .neuralnet import Model

MANIFEST_NAME = "manifest.json"
SPLIT_FILES = {"train": "train.chds", "val": "val.chds"}


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def lineage_hash(cfg: ExperimentConfig, seed: int) -> str:
    payload = json.dumps({"config": cfg.canonical(), "seed": seed}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def split_drop_ids(cfg: ExperimentConfig):
    count = cfg["drops.count"]
    n_train = int(round(count * cfg["dataset.train_fraction"]))
    if count >= 2:
        n_train = min(max(n_train, 1), count - 1)
    else:
        n_train = 1
    return list(range(n_train)), list(range(n_train, count))


def drop_slots(cfg: ExperimentConfig, seed: int, drop_id: int,
               num_slots: int | None = None) -> np.ndarray:
    """(num_slots, ports, T, F) complex trajectory of one drop."""
    drop = chanmodel.sample_drop(cfg.drop_config(), seed + drop_id)
    return chanmodel.generate_slots(drop, num_slots or cfg["drops.slots"])


def generate_dataset(cfg: ExperimentConfig, seed: int, out_dir,
                     threads: int = 1) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    train_ids, val_ids = split_drop_ids(cfg)
    m = cfg["dataset.memory"]

    def synth(drop_id):
        return dataset.build_samples(drop_slots(cfg, seed, drop_id), m=m,
                                     drop_id=drop_id)

    def synth_many(ids):
        if threads > 1 and len(ids) > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(synth, ids))
        else:
            parts = [synth(i) for i in ids]
        return [s for part in parts for s in part]

    samples_by_split = {"train": synth_many(train_ids), "val": synth_many(val_ids)}
    files = {}
    for split, samples in samples_by_split.items():
        if not samples:
            continue
        path = os.path.join(out_dir, SPLIT_FILES[split])
        dataset.write_dataset(samples, path)
        files[split] = {"file": SPLIT_FILES[split], "sha256": _sha256(path),
                        "sample_count": len(samples)}

    grid = cfg.grid_spec()
    try:
        coh_ms = 1e3 * chanmodel.coherence_time(cfg["speed_mps"],
                                                grid.carrier_frequency)
    except UnboundedCoherenceError:
        coh_ms = None

    manifest = {
        "kind": "chandyn-dataset",
        "schema_version": 1,
        "config": cfg.canonical(),
        "seed": seed,
        "lineage": lineage_hash(cfg, seed),
        "splits": {"train": train_ids, "val": val_ids},
        "files": files,
        "memory": m,
        "grid": {"T": grid.num_symbols, "F": grid.num_subcarriers,
                 "ports": grid.num_tx_ports},
        "sample_count": sum(f["sample_count"] for f in files.values()),
        "coherence_time_ms": coh_ms,
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_manifest(data_dir) -> dict:
    path = os.path.join(data_dir, MANIFEST_NAME)
    if not os.path.exists(path):
        raise FormatError(f"no {MANIFEST_NAME} in {data_dir}")
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("kind") != "chandyn-dataset":
        raise FormatError(f"manifest kind {manifest.get('kind')!r} is not a dataset")
    return manifest


def manifest_config(manifest: dict) -> ExperimentConfig:
    from .config import default_config

    cfg = default_config()
    for key, value in manifest["config"].items():
        if key in cfg:
            cfg[key] = value
    return cfg


def read_split(data_dir, manifest: dict, split: str):
    info = manifest["files"].get(split)
    if info is None:
        raise DataError(f"dataset has no {split!r} split")
    path = os.path.join(data_dir, info["file"])
    if _sha256(path) != info["sha256"]:
        raise FormatError(f"{info['file']} hash does not match the manifest")
    return dataset.read_dataset(path)


def check_lineage(manifest: dict, checkpoint_extra: dict, eval_split: str) -> None:
    ck_lineage = checkpoint_extra.get("lineage")
    if ck_lineage != manifest["lineage"]:
        raise LineageError(
            "checkpoint was trained on a different dataset lineage "
            f"({ck_lineage} != {manifest['lineage']})"
        )
    trained_split = checkpoint_extra.get("trained_split")
    if trained_split == eval_split:
        raise LineageError(
            f"refusing to evaluate on split {eval_split!r}: the checkpoint "
            "was trained on it (window overlap leaks)"
        )


def eval_start_slot(cfg: ExperimentConfig) -> int:
    return max(cfg["kf.window"], cfg["dataset.memory"])


@dataclass
class EvalWindow:
    drop_id: int
    target_slot: int
    slots: np.ndarray                 # (num_slots, ports, T, F) of the drop
    norm: dict = field(default_factory=dict)  # (port, comp) -> (states, scale)


def collect_windows(cfg: ExperimentConfig, seed: int, drop_ids,
                    max_windows: int | None = None) -> list[EvalWindow]:
    m = cfg["dataset.memory"]
    start = eval_start_slot(cfg)
    num_slots = cfg["drops.slots"]
    if num_slots <= start:
        raise DataError(
            f"drops.slots={num_slots} leaves no evaluation window "
            f"(first predicted slot is {start})"
        )
    windows = []
    for drop_id in drop_ids:
        slots = drop_slots(cfg, seed, drop_id)
        for s in range(start, num_slots):
            win = EvalWindow(drop_id=drop_id, target_slot=s, slots=slots)
            for port in range(slots.shape[1]):
                for comp in ("real", "imag"):
                    raw = slots[s - m:s + 1, port]
                    raw = raw.real if comp == "real" else raw.imag
                    sample = dataset.normalize(raw)
                    win.norm[(port, comp)] = (sample.states, sample.scale)
            windows.append(win)
            if max_windows is not None and len(windows) >= max_windows:
                return windows
    return windows


def _batched_predict_blocks(model: Model, windows: list[EvalWindow]) -> np.ndarray:
    """Predicted blocks for every (window, port, comp), normalized domain."""
    ports = windows[0].slots.shape[1]
    inputs = []
    for win in windows:
        for port in range(ports):
            for comp in ("real", "imag"):
                states, _ = win.norm[(port, comp)]
                inputs.append(model.prepare_input(states[:model.spec.memory])[0])
    x = np.stack(inputs)
    outs = []
    for i in range(0, x.shape[0], 64):
        out = model.forward(x[i:i + 64], training=False)
        outs.append(model.predicted_block(out))
    return np.concatenate(outs, axis=0)


def evaluate_predictors(cfg: ExperimentConfig, windows: list[EvalWindow],
                        models: dict[str, Model] | None = None,
                        run_kf: bool = True, threads: int = 1) -> dict:
    """Normalized-domain MAE and capacity report over evaluation windows.

    Returns {"mae": {mode: l1}, "report": CapacityReport,
    "capacity_samples": {mode: array}, "n_windows": int}.
    """
    models = models or {}
    m = cfg["dataset.memory"]
    ports = windows[0].slots.shape[1]
    comps = ("real", "imag")

    aged_err, model_err = [], {name: [] for name in models}
    kf_err = []
    c_true_rows, c_aged_rows, c_kf_rows = [], [], []
    c_dl_rows = {name: [] for name in models}

    block_preds = {name: _batched_predict_blocks(model, windows)
                   for name, model in models.items()}

    for w_idx, win in enumerate(windows):
        s = win.target_slot
        truth = win.slots[s]                    # (P, T, F) complex
        aged = win.slots[s - 1]
        if run_kf:
            kf_grid = arkalman.kf_predict_grid(
                win.slots[s - cfg["kf.window"]:s], p=cfg["kf.order"],
                measurement_noise=cfg["kf.measurement_noise"],
                window=cfg["kf.window"], threads=threads)

        dl_complex = {name: np.zeros_like(truth) for name in models}
        for port in range(ports):
            parts = {}
            for c_idx, comp in enumerate(comps):
                states, scale = win.norm[(port, comp)]
                target_n = states[m]
                aged_n = states[m - 1]
                aged_err.append(float(np.mean(np.abs(aged_n - target_n))))
                if run_kf:
                    kf_comp = kf_grid[port].real if comp == "real" else kf_grid[port].imag
                    kf_err.append(float(np.mean(np.abs(kf_comp / scale - target_n))))
                for name in models:
                    flat = (w_idx * ports + port) * 2 + c_idx
                    pred_n = block_preds[name][flat]
                    model_err[name].append(float(np.mean(np.abs(pred_n - target_n))))
                    parts.setdefault(name, {})[comp] = pred_n * scale
            for name in models:
                dl_complex[name][port] = parts[name]["real"] + 1j * parts[name]["imag"]

        c_true_rows.append(truth.reshape(ports, -1).T)
        c_aged_rows.append(aged.reshape(ports, -1).T)
        if run_kf:
            c_kf_rows.append(kf_grid.reshape(ports, -1).T)
        for name in models:
            c_dl_rows[name].append(dl_complex[name].reshape(ports, -1).T)

    mae = {"aged": float(np.mean(aged_err))}
    if run_kf:
        mae["kf"] = float(np.mean(kf_err))
    for name in models:
        mae[name] = float(np.mean(model_err[name]))

    c_true = np.concatenate(c_true_rows)
    csi = {"aged": np.concatenate(c_aged_rows)}
    if run_kf:
        csi["predicted_kf"] = np.concatenate(c_kf_rows)
    for name in models:
        csi[f"predicted_dl:{name}"] = np.concatenate(c_dl_rows[name])

    rho = 10.0 ** (cfg["eval.rho_db"] / 10.0)
    eps = cfg["eval.epsilon"]
    if cfg["eval.pooling"] == "time":
        t_dim = windows[0].slots.shape[2]
        f_dim = windows[0].slots.shape[3]

        def pool_time(c):      # average capacity over frequency per symbol
            caps = evalsuite.capacity_samples(c_true, c, rho)
            return caps.reshape(-1, t_dim, f_dim).mean(axis=2).ravel()

        samples = {"perfect": pool_time(c_true)}
        samples.update({mode: pool_time(c) for mode, c in csi.items()})
        capacities = {mode: evalsuite.outage_capacity(vals, eps)
                      for mode, vals in samples.items()}
        report = evalsuite.CapacityReport(capacities=capacities, rho=rho,
                                          epsilon=eps,
                                          num_samples=samples["perfect"].size)
    else:
        samples = {"perfect": evalsuite.capacity_samples(c_true, c_true, rho)}
        samples.update({mode: evalsuite.capacity_samples(c_true, c, rho)
                        for mode, c in csi.items()})
        report = evalsuite.compare_csi_modes(c_true, csi, rho, eps)

    return {"mae": mae, "report": report, "capacity_samples": samples,
            "n_windows": len(windows)}


def rollout_per_step_mae(cfg: ExperimentConfig, windows: list[EvalWindow],
                         model: Model | None, steps: int,
                         oracle: bool = False) -> list[dict]:
    """Mean normalized MAE per rollout step.

    Later steps are averaged over the windows whose trajectory still
    covers them.  Step-1 predictions are produced with the same batching,
    target normalization and reduction order as evaluate_predictors, so
    the step-1 mean equals the evaluation MAE bitwise on identical
    windows.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    m = cfg["dataset.memory"]
    ports = windows[0].slots.shape[1]
    num_slots = windows[0].slots.shape[0]
    comps = ("real", "imag")

    items = [(win, port, comp) for win in windows for port in range(ports)
             for comp in comps]
    buffers = np.stack([win.norm[(port, comp)][0][:m]
                        for win, port, comp in items])

    def truth_at(win, port, comp, slot):
        raw = win.slots[slot, port]
        raw = (raw.real if comp == "real" else raw.imag).astype(np.float32)
        return raw / np.float32(win.norm[(port, comp)][1])

    per_step = [[] for _ in range(steps)]
    for step in range(steps):
        if oracle:
            preds = np.stack([
                truth_at(win, port, comp, min(win.target_slot + step, num_slots - 1))
                for win, port, comp in items])
        else:
            inputs = np.stack([model.prepare_input(buf)[0] for buf in buffers])
            outs = []
            for i in range(0, inputs.shape[0], 64):
                out = model.forward(inputs[i:i + 64], training=False)
                outs.append(model.predicted_block(out))
            preds = np.concatenate(outs, axis=0)
        for idx, (win, port, comp) in enumerate(items):
            target_slot = win.target_slot + step
            if target_slot >= num_slots:
                continue
            truth_n = truth_at(win, port, comp, target_slot)
            per_step[step].append(float(np.mean(np.abs(preds[idx] - truth_n))))
        buffers = np.concatenate([buffers[:, 1:], preds[:, None]], axis=1)
    return [{"step": i + 1, "mean_l1": float(np.mean(errs)), "n_windows": len(errs)}
            for i, errs in enumerate(per_step) if errs]
