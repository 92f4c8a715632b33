# %% [markdown]
"""
# Training the convolutional predictors

Three input/output pairings share one encoder-decoder trunk:

- `baseline`: the m past slots stacked into one tall image, shrunk to the
  next slot by two extra input layers (asymmetric; "partial unet").
- `image_completion`: the full (m+1)-slot stack with the future block
  zeroed in the input; the network repaints the whole stack.
- `next_frame`: the m past slots as parallel input channels.

Each builds as a plain autoencoder (`ae`) or with skip connections
(`unet`) at matched parameter count. This demo trains small next-frame
models for a few epochs and shows why the skips matter.
"""

# %% Imports

import os
import time

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from chandyn import chanmodel as cm
from chandyn import dataset as ds
from chandyn.neuralnet import (
    ModelSpec,
    TrainConfig,
    build_model,
    parameter_count,
    predict,
    rollout,
    samples_to_arrays,
    train,
)

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)
KMH = 1 / 3.6

# %% Parameter parity across the menu

for variant in ("baseline", "image_completion", "next_frame"):
    counts = {arch: parameter_count(ModelSpec(variant=variant, arch=arch,
                                              depth=4, base_channels=16,
                                              memory=4, grid=(8, 64)))
              for arch in ("ae", "unet")}
    print(f"{variant:18s} ae={counts['ae']:7d}  unet={counts['unet']:7d}")

# %% Build a small dataset (4 drops, 16 windows each)

grid = cm.GridSpec(num_subcarriers=32)
config = cm.DropConfig(grid=grid, num_paths=(12, 20), speed=15 * KMH)
train_samples, val_samples = [], []
for i in range(5):
    slots = cm.generate_slots(cm.sample_drop(config, 100 + i), 20)
    bucket = train_samples if i < 4 else val_samples
    bucket += ds.build_samples(slots, m=4, drop_id=i)
print(f"{len(train_samples)} train / {len(val_samples)} val samples")

# %% Train ae and unet next-frame models

curves = {}
for arch in ("unet", "ae"):
    spec = ModelSpec(variant="next_frame", arch=arch, depth=3, base_channels=8,
                     memory=4, grid=(8, 32))
    model = build_model(spec, seed=0)
    x, y, _ = samples_to_arrays(train_samples, spec)
    xv, _, bv = samples_to_arrays(val_samples, spec)
    t0 = time.time()
    rep = train(model, x, y, xv, bv, TrainConfig(epochs=8, seed=0))
    curves[arch] = (model, rep)
    print(f"{arch}: {model.num_parameters} params, {time.time() - t0:.0f}s, "
          f"final val l1 {rep.final_val_l1:.4f}")

fig, ax = plt.subplots(figsize=(6, 4))
for arch, (_, rep) in curves.items():
    ax.semilogy([r.val_l1 for r in rep.rows], "o-", label=f"{arch} val l1")
ax.set_xlabel("epoch")
ax.set_ylabel("l1 (normalized pixels)")
ax.legend()
ax.grid(alpha=0.3)
fig.savefig(os.path.join(OUT, "04_val_curves.png"), dpi=120,
            bbox_inches="tight")
plt.close(fig)

# %% [markdown]
"""
## Looking at a prediction and rolling forward

Prediction happens in the normalized sample domain; the stored scale maps
back to physical units. Multi-step forecasts feed each output back as the
newest memory slot.
"""

# %% Predict and roll out

model, _ = curves["unet"]
sample = val_samples[0]
window, target = sample.states[:4], sample.states[4]
pred = predict(model, window)
print(f"one-step l1 on a val sample: {np.mean(np.abs(pred - target)):.4f} "
      f"(aged: {np.mean(np.abs(sample.states[3] - target)):.4f})")

steps = rollout(model, window, steps=4)
print("4-step rollout shapes:", [s.shape for s in steps])

fig, axes = plt.subplots(1, 3, figsize=(12, 3))
for ax, (img, title) in zip(axes, ((target, "truth h_{k+1}"),
                                   (pred, "unet prediction"),
                                   (sample.states[3], "aged h_k"))):
    im = ax.imshow(img, aspect="auto", cmap="RdBu", vmin=-1, vmax=1)
    ax.set_title(title)
fig.colorbar(im, ax=axes, shrink=0.8)
fig.savefig(os.path.join(OUT, "04_prediction.png"), dpi=120,
            bbox_inches="tight")
plt.close(fig)

print("figures written to", OUT)
