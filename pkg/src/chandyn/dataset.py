"""Prediction-sample assembly, normalization, serialization and SRS traces.

A sample holds m+1 consecutive real-valued channel images (one component
-- real or imaginary -- of one port), jointly normalized by the maximum
absolute value so every pixel lies in [-1, 1]; the scale is kept so
predictions can be mapped back to physical units.

Binary dataset layout (little-endian, bit-exact):

    magic "CHDS" | u32 version=1 | u32 m | u32 T | u32 F | u64 sample_count
    then per sample: f32 scale, (m+1)*T*F f32 pixels (state-major, row-major)

Samples are ordered window-major, then port, then component (real, imag).
Per-sample meta (drop id, port, component) is not part of the binary
layout; pipeline-level lineage lives in the JSON manifest written by the
CLI.

Trace CSV schema: header ``snapshot_index,port,subcarrier,real,imag``
preceded by optional ``# key=value`` comment lines carrying period /
stride / SNR metadata; rows must densely cover every
(snapshot, port, subcarrier) cell.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass

import numpy as np

from .chanmodel import DropParams, transfer_matrix
from .errors import DataError, FormatError, TraceParseError

MAGIC = b"CHDS"
VERSION = 1


@dataclass(frozen=True)
class SampleMeta:
    drop_id: int
    port: int
    component: str       # "real" | "imag"
    target_slot: int     # slot index of h_{k+1}


@dataclass
class Sample:
    """(m+1) normalized T x F images plus the pre-normalization scale."""

    states: np.ndarray           # (m+1, T, F) float32 in [-1, 1]
    scale: float
    meta: SampleMeta | None = None

    @property
    def memory(self) -> int:
        return self.states.shape[0] - 1


def normalize(raw_states: np.ndarray) -> Sample:
    """Jointly scale m+1 images by their max absolute value.

    All-zero input keeps scale 1 and zero pixels.  NaN/Inf pixels are a
    data error.
    """
    states = np.asarray(raw_states, dtype=np.float32)
    if states.size == 0:
        raise ValueError("normalize needs at least one pixel")
    if not np.isfinite(states).all():
        raise DataError("non-finite pixel in sample")
    scale = float(np.max(np.abs(states)))
    if scale == 0.0:
        return Sample(states=states.copy(), scale=1.0)
    return Sample(states=states / np.float32(scale), scale=scale)


def denormalize(sample: Sample) -> np.ndarray:
    return sample.states * np.float32(sample.scale)


def build_samples(slots, m: int = 4, drop_id: int = 0) -> list[Sample]:
    """Sliding-window samples from a per-port slot sequence.

    ``slots`` is array-like of shape (num_slots, n_ports, T, F), complex.
    Every window of m+1 consecutive slots yields one sample per port and
    per component (real and imaginary parts are independent samples).
    """
    arr = np.asarray(slots)
    if arr.ndim != 4:
        raise ValueError(f"slots must be (num_slots, ports, T, F), got {arr.shape}")
    num_slots, n_ports = arr.shape[:2]
    if num_slots < m + 1:
        raise ValueError(f"need at least m+1={m + 1} slots, got {num_slots}")

    out = []
    for w in range(num_slots - m):
        window = arr[w:w + m + 1]
        for port in range(n_ports):
            for component in ("real", "imag"):
                raw = window[:, port].real if component == "real" else window[:, port].imag
                sample = normalize(raw)
                sample.meta = SampleMeta(
                    drop_id=drop_id, port=port, component=component, target_slot=w + m
                )
                out.append(sample)
    return out


def write_dataset(samples: list[Sample], path) -> None:
    if not samples:
        raise ValueError("cannot write an empty dataset")
    m = samples[0].memory
    _, t_dim, f_dim = samples[0].states.shape
    for i, s in enumerate(samples):
        if s.states.shape != (m + 1, t_dim, f_dim):
            raise FormatError(
                f"sample {i} shape {s.states.shape} != {(m + 1, t_dim, f_dim)}"
            )
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIIIQ", VERSION, m, t_dim, f_dim, len(samples)))
        for s in samples:
            fh.write(struct.pack("<f", s.scale))
            fh.write(s.states.astype("<f4", copy=False).tobytes())


def read_dataset(path) -> list[Sample]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if len(blob) < 4 + 20:
        raise FormatError("truncated header")
    version, m, t_dim, f_dim, count = struct.unpack_from("<IIIIQ", blob, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, expected {VERSION}")
    pixels = (m + 1) * t_dim * f_dim
    expected = 28 + count * (4 + 4 * pixels)
    if len(blob) != expected:
        raise FormatError(
            f"payload length {len(blob)} != expected {expected} "
            f"(sample_count={count}, pixels/sample={pixels})"
        )
    samples = []
    offset = 28
    for _ in range(count):
        (scale,) = struct.unpack_from("<f", blob, offset)
        offset += 4
        states = np.frombuffer(blob, dtype="<f4", count=pixels, offset=offset)
        offset += 4 * pixels
        samples.append(Sample(states=states.reshape(m + 1, t_dim, f_dim).copy(),
                              scale=float(scale)))
    return samples


@dataclass
class SrsTrace:
    """Periodic single-symbol channel snapshots on a strided subcarrier comb."""

    snapshots: np.ndarray        # (num_snapshots, n_ports, F') complex
    period: float = 5e-3
    subcarrier_stride: int = 4
    noise_snr_db: float | None = 30.0

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be > 0")
        if self.snapshots.ndim != 3:
            raise ValueError("snapshots must be (num_snapshots, ports, F')")


def emulate_srs_trace(
    drop: DropParams,
    num_snapshots: int,
    period: float = 5e-3,
    stride: int = 4,
    snr_db: float | None = 30.0,
    seed: int | None = None,
) -> SrsTrace:
    """Sample the channel at t = j*period on every stride-th subcarrier.

    ``snr_db=None`` (or +inf) disables noise, in which case the snapshots
    are an exact subsampling of single-symbol slot grids.  Noise is
    circularly-symmetric complex Gaussian at the given per-element SNR
    (variance = mean signal power / 10^(snr/10)).
    """
    if num_snapshots < 1:
        raise ValueError("num_snapshots must be >= 1")
    if stride < 1:
        raise ValueError("subcarrier stride must be >= 1")
    grid = drop.grid
    f_all = grid.subcarrier_offsets()

    # Per-snapshot full-band evaluation then comb slicing keeps this
    # bitwise identical to generate_slot output at T=1 with
    # slot_period = period (same GEMM shapes, same time arithmetic).
    rows = []
    for j in range(num_snapshots):
        t = np.array([j * period], dtype=np.float64)
        full = np.stack([transfer_matrix(drop, port, f_all, t)[0]
                         for port in range(grid.num_tx_ports)])   # (P, F)
        rows.append(full[:, ::stride])
    snapshots = np.stack(rows)                                    # (S, P, F')

    if snr_db is not None and not math.isinf(snr_db):
        rng = np.random.default_rng(drop.rng_seed + 0x5125 if seed is None else seed)
        power = float(np.mean(np.abs(snapshots) ** 2))
        sigma2 = power / 10.0 ** (snr_db / 10.0)
        noise = math.sqrt(sigma2 / 2.0) * (
            rng.standard_normal(snapshots.shape) + 1j * rng.standard_normal(snapshots.shape)
        )
        snapshots = snapshots + noise

    return SrsTrace(snapshots=snapshots, period=period,
                    subcarrier_stride=stride, noise_snr_db=snr_db)


def trace_to_samples(trace: SrsTrace, m: int = 4, drop_id: int = 0) -> list[Sample]:
    """Sliding-window samples over trace snapshots (T=1 images)."""
    snaps = trace.snapshots[:, :, None, :]        # (S, P, 1, F')
    return build_samples(snaps, m=m, drop_id=drop_id)


def export_trace_csv(trace: SrsTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# period_s={trace.period!r}\n")
        fh.write(f"# subcarrier_stride={trace.subcarrier_stride}\n")
        if trace.noise_snr_db is not None:
            fh.write(f"# noise_snr_db={trace.noise_snr_db!r}\n")
        writer = csv.writer(fh)
        writer.writerow(["snapshot_index", "port", "subcarrier", "real", "imag"])
        n_snap, n_port, n_sc = trace.snapshots.shape
        for s in range(n_snap):
            for p in range(n_port):
                for k in range(n_sc):
                    v = trace.snapshots[s, p, k]
                    writer.writerow([s, p, k, repr(float(v.real)), repr(float(v.imag))])


def ingest_trace_csv(path) -> SrsTrace:
    """Parse a trace CSV; rejects ragged rows, bad numbers and missing cells."""
    meta = {"period_s": 5e-3, "subcarrier_stride": 4, "noise_snr_db": None}
    cells: dict[tuple[int, int, int], complex] = {}
    with open(path, newline="") as fh:
        header_seen = False
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                body = stripped.lstrip("#").strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    key = key.strip()
                    if key in meta:
                        try:
                            meta[key] = float(value) if key != "subcarrier_stride" else int(value)
                        except ValueError:
                            raise TraceParseError(f"row {lineno}: bad metadata value {value!r}")
                continue
            fields = next(csv.reader([stripped]))
            if not header_seen:
                expected = ["snapshot_index", "port", "subcarrier", "real", "imag"]
                if [f.strip() for f in fields] != expected:
                    raise TraceParseError(f"row {lineno}: bad header {fields!r}")
                header_seen = True
                continue
            if len(fields) != 5:
                raise TraceParseError(f"row {lineno}: expected 5 columns, got {len(fields)}")
            try:
                s, p, k = int(fields[0]), int(fields[1]), int(fields[2])
                re, im = float(fields[3]), float(fields[4])
            except ValueError:
                raise TraceParseError(f"row {lineno}: non-numeric field in {fields!r}")
            if s < 0 or p < 0 or k < 0:
                raise TraceParseError(f"row {lineno}: negative index in {fields!r}")
            if (s, p, k) in cells:
                raise TraceParseError(f"row {lineno}: duplicate cell ({s},{p},{k})")
            cells[(s, p, k)] = complex(re, im)
    if not header_seen:
        raise TraceParseError("row 1: missing header")
    if not cells:
        raise TraceParseError("row 2: no data rows")

    n_snap = max(s for s, _, _ in cells) + 1
    n_port = max(p for _, p, _ in cells) + 1
    n_sc = max(k for _, _, k in cells) + 1
    snapshots = np.zeros((n_snap, n_port, n_sc), dtype=complex)
    for s in range(n_snap):
        for p in range(n_port):
            for k in range(n_sc):
                if (s, p, k) not in cells:
                    raise TraceParseError(
                        f"missing cell (snapshot={s}, port={p}, subcarrier={k})"
                    )
                snapshots[s, p, k] = cells[(s, p, k)]
    return SrsTrace(
        snapshots=snapshots,
        period=meta["period_s"],
        subcarrier_stride=int(meta["subcarrier_stride"]),
        noise_snr_db=meta["noise_snr_db"],
    )
