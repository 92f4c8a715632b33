"""Bitwise-round-trip model checkpoints.

Layout (little-endian):

    magic "CHMD" | u32 version=1
    u32 variant | u32 arch | u32 depth | u32 base_channels | u32 memory
    u32 T | u32 F | i64 parameter_budget (-1 = none)
    f64 leaky_slope | f64 dropout_rate
    u32 extra_json_len | extra_json (utf-8, lineage metadata)
    u64 n_param_floats  | f32 blob (parameters, fixed layer order)
    u64 n_state_floats  | f32 blob (batch-norm running stats)
    u8 has_optimizer [ | u64 step | f64 lr,beta1,beta2,eps | f32 m blob | f32 v blob ]
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .builder import ARCHS, VARIANTS, Model, ModelSpec, build_model
from .training import AdamState, TrainConfig
from ..errors import FormatError

MAGIC = b"CHMD"
VERSION = 1


def _pack_blob(arrays: list[np.ndarray]) -> bytes:
    if not arrays:
        return struct.pack("<Q", 0)
    flat = np.concatenate([a.ravel() for a in arrays]).astype("<f4")
    return struct.pack("<Q", flat.size) + flat.tobytes()


def _unpack_blob(blob: bytes, offset: int, arrays: list[np.ndarray]):
    (count,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    need = sum(a.size for a in arrays)
    if count != need:
        raise FormatError(f"blob holds {count} floats, model needs {need}")
    flat = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
    offset += 4 * count
    pos = 0
    for a in arrays:
        a[...] = flat[pos:pos + a.size].reshape(a.shape)
        pos += a.size
    return offset


def save_checkpoint(model: Model, path, optimizer: AdamState | None = None,
                    extra: dict | None = None) -> None:
    spec = model.spec
    extra_json = json.dumps(extra or {}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack(
            "<IIIIIIIq",
            VARIANTS.index(spec.variant), ARCHS.index(spec.arch),
            spec.depth, spec.base_channels, spec.memory,
            spec.grid[0], spec.grid[1],
            -1 if spec.parameter_budget is None else spec.parameter_budget,
        ))
        fh.write(struct.pack("<dd", spec.leaky_slope, spec.dropout_rate))
        fh.write(struct.pack("<I", len(extra_json)))
        fh.write(extra_json)
        fh.write(_pack_blob(model.network.params()))
        fh.write(_pack_blob(model.network.state()))
        if optimizer is None:
            fh.write(struct.pack("<B", 0))
        else:
            c = optimizer.cfg
            fh.write(struct.pack("<B", 1))
            fh.write(struct.pack("<Q", optimizer.step_count))
            fh.write(struct.pack("<dddd", c.learning_rate, c.beta1, c.beta2,
                                 c.adam_epsilon))
            fh.write(_pack_blob(optimizer.m))
            fh.write(_pack_blob(optimizer.v))


def load_checkpoint(path):
    """Returns (model, optimizer_or_None, extra_dict)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    fields = struct.unpack_from("<IIIIIIIq", blob, 8)
    offset = 8 + struct.calcsize("<IIIIIIIq")
    leaky, drop = struct.unpack_from("<dd", blob, offset)
    offset += 16
    (extra_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    extra = json.loads(blob[offset:offset + extra_len].decode())
    offset += extra_len

    variant_i, arch_i, depth, base, memory, t_dim, f_dim, budget = fields
    if variant_i >= len(VARIANTS) or arch_i >= len(ARCHS):
        raise FormatError("unknown variant/arch code in header")
    spec = ModelSpec(
        variant=VARIANTS[variant_i], arch=ARCHS[arch_i], depth=depth,
        base_channels=base, memory=memory, grid=(t_dim, f_dim),
        parameter_budget=None if budget < 0 else budget,
        leaky_slope=leaky, dropout_rate=drop,
    )
    model = build_model(spec, seed=0)
    offset = _unpack_blob(blob, offset, model.network.params())
    offset = _unpack_blob(blob, offset, model.network.state())

    (has_opt,) = struct.unpack_from("<B", blob, offset)
    offset += 1
    optimizer = None
    if has_opt:
        (step_count,) = struct.unpack_from("<Q", blob, offset)
        offset += 8
        lr, b1, b2, eps = struct.unpack_from("<dddd", blob, offset)
        offset += 32
        cfg = TrainConfig(learning_rate=lr, beta1=b1, beta2=b2, adam_epsilon=eps)
        optimizer = AdamState(model.network.params(), cfg)
        optimizer.step_count = step_count
        offset = _unpack_blob(blob, offset, optimizer.m)
        offset = _unpack_blob(blob, offset, optimizer.v)
    if offset != len(blob):
        raise FormatError(
            f"trailing bytes: file has {len(blob)}, parsed {offset}"
        )
    return model, optimizer, extra
