# %% [markdown]
"""
# From channel grids to training samples

Prediction samples hold m+1 consecutive slots of one port's real or
imaginary component, jointly normalized into [-1, 1]. This script walks
the full data path: windowing, normalization, the binary dataset file,
and the SRS-style single-symbol trace that stands in for measured data.
"""

# %% Imports

import os
import tempfile

import numpy as np

from chandyn import chanmodel as cm
from chandyn import dataset as ds

KMH = 1 / 3.6

# %% Build samples from a drop

config = cm.DropConfig(grid=cm.GridSpec(), num_paths=(12, 20), speed=15 * KMH)
drop = cm.sample_drop(config, seed=11)
slots = cm.generate_slots(drop, 12)

samples = ds.build_samples(slots, m=4, drop_id=0)
print(f"{slots.shape[0]} slots x {slots.shape[1]} ports -> {len(samples)} samples")
s = samples[0]
print(f"sample states {s.states.shape}, scale {s.scale:.4f}, "
      f"meta {s.meta}")
print(f"pixel range [{s.states.min():.3f}, {s.states.max():.3f}], "
      f"max |pixel| = {np.abs(s.states).max()}")

# %% [markdown]
"""
## Round-tripping the binary format

The dataset file is a flat little-endian layout: "CHDS" magic, header,
then per sample an f32 scale and the (m+1)*T*F f32 pixels. Reading back
is bitwise.
"""

# %% Write and re-read

with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "demo.chds")
    ds.write_dataset(samples, path)
    size = os.path.getsize(path)
    back = ds.read_dataset(path)
    bitwise = all(np.array_equal(a.states, b.states) for a, b in zip(samples, back))
    print(f"wrote {len(samples)} samples ({size / 1024:.1f} KiB), "
          f"bitwise round trip: {bitwise}")

# %% [markdown]
"""
## SRS traces

Measured channels arrive as periodic single-symbol snapshots on a
subcarrier comb (every 4th subcarrier, 5 ms period, ~30 dB SNR). The
emulator samples the same drop machinery that way; the CSV schema is the
exchange format for real captures, and `trace_to_samples` turns either
into T=1 training images.
"""

# %% Emulate, export, ingest

trace = ds.emulate_srs_trace(drop, num_snapshots=32, period=5e-3, stride=4,
                             snr_db=30.0)
print("trace snapshots:", trace.snapshots.shape)

clean = ds.emulate_srs_trace(drop, num_snapshots=32, period=5e-3, stride=4,
                             snr_db=None)
noise = trace.snapshots - clean.snapshots
snr_db = 10 * np.log10(np.mean(np.abs(clean.snapshots) ** 2)
                       / np.mean(np.abs(noise) ** 2))
print(f"empirical SNR: {snr_db:.2f} dB")

with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "trace.csv")
    ds.export_trace_csv(trace, path)
    back = ds.ingest_trace_csv(path)
    print("csv round trip equal:", np.allclose(back.snapshots, trace.snapshots,
                                               rtol=0, atol=0))

trace_samples = ds.trace_to_samples(clean, m=4)
print(f"trace -> {len(trace_samples)} samples of shape "
      f"{trace_samples[0].states.shape} (T=1 images)")
