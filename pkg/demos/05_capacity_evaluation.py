# %% [markdown]
"""
# What stale CSI costs: MRT precoding and outage capacity

A rank-1 MISO transmitter beamforms with w = c^H/||c|| computed from
whatever CSI it has. The received rate log2(1 + rho |c_true . w|^2)
always scores against the true channel, so aged or imperfectly predicted
CSI loses beamforming gain. The epsilon-outage capacity (lower empirical
quantile over all resource elements) summarizes the tail.

This demo compares perfect / aged / Kalman-predicted CSI on a fresh
synthetic trajectory; swap in a trained checkpoint for the full
comparison (the CLI `evaluate` subcommand automates all four modes).
"""

# %% Imports

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from chandyn import arkalman as ak
from chandyn import chanmodel as cm
from chandyn import evalsuite as ev

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)
KMH = 1 / 3.6

# %% MRT anatomy

rng = np.random.default_rng(0)
c = rng.standard_normal(8) + 1j * rng.standard_normal(8)
w = ev.mrt_precoder(c)
print(f"||w|| = {np.linalg.norm(w):.12f}")
print(f"MRT gain |c.w|^2 = {abs(np.dot(c, w)) ** 2:.4f} = ||c||^2 = "
      f"{np.linalg.norm(c) ** 2:.4f}")
alt = rng.standard_normal((2000, 8)) + 1j * rng.standard_normal((2000, 8))
alt /= np.linalg.norm(alt, axis=1, keepdims=True)
print("random precoders beating MRT:", int((np.abs(alt @ c) ** 2
                                            > abs(np.dot(c, w)) ** 2).sum()))

# %% Collect CSI modes over a trajectory

config = cm.DropConfig(grid=cm.GridSpec(), num_paths=(12, 20), speed=15 * KMH)
c_true_rows, c_aged_rows, c_kf_rows = [], [], []
for drop_seed in range(8):
    drop = cm.sample_drop(config, 300 + drop_seed)
    slots = cm.generate_slots(drop, 20)
    ports = slots.shape[1]
    for s in range(15, 20):
        c_true_rows.append(slots[s].reshape(ports, -1).T)
        c_aged_rows.append(slots[s - 1].reshape(ports, -1).T)
        kf = ak.kf_predict_grid(slots[s - 15:s], p=4)
        c_kf_rows.append(kf.reshape(ports, -1).T)
c_true = np.concatenate(c_true_rows)
csi = {"aged": np.concatenate(c_aged_rows),
       "predicted_kf": np.concatenate(c_kf_rows)}
print(f"pooled resource elements: {c_true.shape[0]}")

# %% Outage capacity report at rho = 10 dB, eps = 0.1

report = ev.compare_csi_modes(c_true, csi, rho=10.0, epsilon=0.1)
for row in report.rows():
    print(f"{row['mode']:>14s}: C_eps = {row['c_eps_bits']:.4f} b/s/Hz, "
          f"loss {row['loss_pct']:.2f}%, reduction {row['reduction_pct']:.1f}%")

# %% Capacity CDFs

fig, ax = plt.subplots(figsize=(7, 4))
for mode, csi_mat in [("perfect", c_true)] + list(csi.items()):
    caps = np.sort(ev.capacity_samples(c_true, csi_mat, rho=10.0))
    ax.plot(caps, np.arange(1, caps.size + 1) / caps.size, label=mode)
ax.axhline(0.1, color="k", linestyle=":", label="eps = 0.1")
ax.set_xlabel("instantaneous capacity (b/s/Hz)")
ax.set_ylabel("empirical CDF")
ax.legend()
ax.grid(alpha=0.3)
ax.set_ylim(0, 0.5)
fig.savefig(os.path.join(OUT, "05_capacity_cdf.png"), dpi=120,
            bbox_inches="tight")
plt.close(fig)
print("figures written to", OUT)
