"""Adam training loop for the prediction models.

Everything is deterministic given the seed: epoch shuffles and dropout
masks come from dedicated child streams of one SeedSequence, batches are
visited in shuffle order, and gradients are reduced in fixed layer order.
Loss is the mean absolute error over the full network output; the
reported validation metric is the MAE of the predicted T x F block so the
three variants stay directly comparable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import tensorops as ops
from .builder import Model
from ..errors import ShapeError, TrainingError


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 16
    learning_rate: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0


@dataclass
class EpochRow:
    epoch: int
    train_l1: float
    val_l1: float


@dataclass
class TrainingReport:
    rows: list[EpochRow] = field(default_factory=list)

    @property
    def final_train_l1(self) -> float:
        return self.rows[-1].train_l1 if self.rows else float("nan")

    @property
    def final_val_l1(self) -> float:
        return self.rows[-1].val_l1 if self.rows else float("nan")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_l1", "val_l1"])
            for row in self.rows:
                writer.writerow([row.epoch, repr(row.train_l1), repr(row.val_l1)])


class AdamState:
    """First/second moment accumulators, one pair per parameter tensor."""

    def __init__(self, params: list[np.ndarray], cfg: TrainConfig):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.step_count = 0
        self.cfg = cfg

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        c = self.cfg
        self.step_count += 1
        b1t = 1.0 - c.beta1 ** self.step_count
        b2t = 1.0 - c.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / b1t) / (np.sqrt(v / b2t) + c.adam_epsilon)


def _batched_eval(model: Model, x: np.ndarray, batch: int = 64) -> np.ndarray:
    outs = []
    for i in range(0, x.shape[0], batch):
        outs.append(model.forward(x[i:i + batch], training=False))
    return np.concatenate(outs, axis=0)


def evaluate_block_l1(model: Model, x: np.ndarray, target_block: np.ndarray) -> float:
    """Inference-mode MAE of the predicted T x F block."""
    out = _batched_eval(model, x)
    pred = model.predicted_block(out)
    return float(np.mean(np.abs(pred - target_block)))


def train(
    model: Model,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val_block: np.ndarray,
    cfg: TrainConfig,
    optimizer: AdamState | None = None,
) -> TrainingReport:
    """Minimize MAE over (x_train, y_train); report per-epoch train/val MAE.

    ``y_train`` matches the full network output layout; ``y_val_block``
    holds the T x F prediction targets for the validation inputs.
    Trailing batches of size one are folded into the previous batch
    (batch norm needs >= 2 rows).  A non-finite loss aborts with a
    TrainingError carrying the epoch.
    """
    if x_train.shape[0] == 0:
        raise TrainingError("empty training dataset", epoch=0)
    seq = np.random.SeedSequence(cfg.seed)
    shuffle_rng, dropout_rng = [np.random.default_rng(s) for s in seq.spawn(2)]
    params = model.network.params()
    opt = optimizer if optimizer is not None else AdamState(params, cfg)
    report = TrainingReport()

    n = x_train.shape[0]
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        starts = list(range(0, n, cfg.batch_size))
        if len(starts) > 1 and n - starts[-1] == 1:
            starts.pop()                       # fold a lone trailing row in
        losses = []
        for si, start in enumerate(starts):
            stop = starts[si + 1] if si + 1 < len(starts) else n
            idx = order[start:stop]
            xb, yb = x_train[idx], y_train[idx]
            out = model.forward(xb, training=True, rng=dropout_rng)
            loss, gy = ops.mae_loss(out, yb)
            if not np.isfinite(loss):
                raise TrainingError(f"training diverged (loss={loss})", epoch=epoch)
            losses.append(loss)
            model.network.zero_grads()
            model.backward(gy)
            opt.step(params, model.network.grads())
        val = evaluate_block_l1(model, x_val, y_val_block) if x_val.size else float("nan")
        report.rows.append(EpochRow(epoch=epoch, train_l1=float(np.mean(losses)),
                                    val_l1=val))
    model._optimizer = opt  # kept for checkpointing
    return report


def samples_to_arrays(samples, spec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(inputs, full targets, block targets) for a list of dataset samples."""
    m = spec.memory
    t, f = spec.grid
    xs, ys, blocks = [], [], []
    for s in samples:
        states = s.states
        if states.shape != (m + 1, t, f):
            raise ShapeError(
                f"sample shape {states.shape} does not match model grid "
                f"{(m + 1, t, f)}"
            )
        window, target = states[:m], states[m]
        if spec.variant == "next_frame":
            xs.append(window)
            ys.append(target[None])
        elif spec.variant == "baseline":
            xs.append(window.reshape(1, m * t, f))
            ys.append(target.reshape(1, t, f))
        else:
            full = states.reshape(1, (m + 1) * t, f)
            x = full.copy()
            x[0, m * t:, :] = 0.0
            xs.append(x)
            ys.append(full)
        blocks.append(target)
    return (np.stack(xs).astype(np.float32),
            np.stack(ys).astype(np.float32),
            np.stack(blocks).astype(np.float32))
