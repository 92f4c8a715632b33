"""Plain-text key=value experiment configuration.

One ``key = value`` assignment per line, ``#`` comments, dotted keys as
sections.  Every key is validated against the schema below; unknown keys
are rejected with the offending key path.  ``none`` clears an optional
value.  Flags on the command line override file values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

from .chanmodel import DropConfig, GridSpec
from .errors import ConfigurationError


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text}")


@dataclass(frozen=True)
class _Key:
    type: type
    default: Any
    optional: bool = False
    choices: tuple | None = None


SCHEMA: dict[str, _Key] = {
    "grid.num_subcarriers": _Key(int, 64),
    "grid.num_symbols": _Key(int, 8),
    "grid.subcarrier_spacing_hz": _Key(float, 15e3),
    "grid.slot_duration_s": _Key(float, 1e-3),
    "grid.slot_period_s": _Key(float, None, optional=True),
    "grid.carrier_frequency_hz": _Key(float, 3.5e9),
    "grid.num_tx_ports": _Key(int, 8),
    "paths.num_min": _Key(int, 8),
    "paths.num_max": _Key(int, 24),
    "paths.delay_spread_s": _Key(float, 300e-9),
    "paths.rician_k_db": _Key(float, None, optional=True),
    "paths.antenna_gain": _Key(float, 1.0),
    "paths.arrival_geometry": _Key(str, "horizontal", choices=("horizontal", "sphere")),
    "speed_mps": _Key(float, 15.0 / 3.6),
    "seed": _Key(int, 0),
    "drops.count": _Key(int, 20),
    "drops.slots": _Key(int, 20),
    "dataset.memory": _Key(int, 4),
    "dataset.train_fraction": _Key(float, 0.8),
    "model.variant": _Key(str, "next_frame",
                          choices=("baseline", "image_completion", "next_frame")),
    "model.arch": _Key(str, "unet", choices=("ae", "unet")),
    "model.depth": _Key(int, 4),
    "model.base_channels": _Key(int, 16),
    "model.parameter_budget": _Key(int, None, optional=True),
    "model.epochs": _Key(int, 200),
    "model.batch_size": _Key(int, 16),
    "model.learning_rate": _Key(float, 2e-4),
    "model.beta1": _Key(float, 0.9),
    "model.beta2": _Key(float, 0.999),
    "model.adam_epsilon": _Key(float, 1e-8),
    "model.dropout_rate": _Key(float, 0.5),
    "model.leaky_slope": _Key(float, 0.2),
    "kf.order": _Key(int, 4),
    "kf.window": _Key(int, 15),
    "kf.measurement_noise": _Key(float, 0.0),
    "eval.rho_db": _Key(float, 10.0),
    "eval.epsilon": _Key(float, 0.1),
    "eval.pooling": _Key(str, "time_freq", choices=("time_freq", "time")),
    "trace.snapshots": _Key(int, 64),
    "trace.period_s": _Key(float, 5e-3),
    "trace.stride": _Key(int, 4),
    "trace.snr_db": _Key(float, 30.0, optional=True),
}


class ExperimentConfig(dict):
    """Validated flat mapping of dotted keys to typed values."""

    def grid_spec(self) -> GridSpec:
        return GridSpec(
            num_subcarriers=self["grid.num_subcarriers"],
            num_symbols=self["grid.num_symbols"],
            subcarrier_spacing=self["grid.subcarrier_spacing_hz"],
            slot_duration=self["grid.slot_duration_s"],
            carrier_frequency=self["grid.carrier_frequency_hz"],
            num_tx_ports=self["grid.num_tx_ports"],
            slot_period=self["grid.slot_period_s"],
        )

    def drop_config(self) -> DropConfig:
        return DropConfig(
            grid=self.grid_spec(),
            num_paths=(self["paths.num_min"], self["paths.num_max"]),
            delay_spread=self["paths.delay_spread_s"],
            speed=self["speed_mps"],
            rician_k_db=self["paths.rician_k_db"],
            antenna_gain=self["paths.antenna_gain"],
            arrival_geometry=self["paths.arrival_geometry"],
        )

    def canonical(self) -> dict:
        """JSON-stable view (sorted keys, non-finite floats as strings)."""
        out = {}
        for key in sorted(self):
            v = self[key]
            if isinstance(v, float) and not math.isfinite(v):
                v = repr(v)
            out[key] = v
        return out


def default_config() -> ExperimentConfig:
    return ExperimentConfig({k: spec.default for k, spec in SCHEMA.items()})


def _coerce(key: str, raw: str) -> Any:
    spec = SCHEMA[key]
    if raw.lower() == "none":
        if not spec.optional:
            raise ConfigurationError(f"{key}: value may not be none")
        return None
    try:
        if spec.type is bool:
            value = _bool(raw)
        elif spec.type is int:
            value = int(raw)
        elif spec.type is float:
            value = float(raw)
        else:
            value = raw
    except ValueError:
        raise ConfigurationError(
            f"{key}: cannot parse {raw!r} as {spec.type.__name__}"
        )
    if spec.choices is not None and value not in spec.choices:
        raise ConfigurationError(f"{key}: {value!r} not in {spec.choices}")
    return value


def parse_config_text(text: str) -> ExperimentConfig:
    cfg = default_config()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in SCHEMA:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        cfg[key] = _coerce(key, raw)
    validate_config(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg["paths.num_min"] > cfg["paths.num_max"]:
        raise ConfigurationError("paths.num_min exceeds paths.num_max")
    if not (0.0 < cfg["dataset.train_fraction"] < 1.0):
        raise ConfigurationError("dataset.train_fraction must lie in (0, 1)")
    if cfg["drops.count"] < 1 or cfg["drops.slots"] < 1:
        raise ConfigurationError("drops.count and drops.slots must be >= 1")
    if cfg["drops.slots"] < cfg["dataset.memory"] + 1:
        raise ConfigurationError(
            "drops.slots must cover at least memory+1 slots per window"
        )
    if not (0.0 < cfg["eval.epsilon"] < 1.0):
        raise ConfigurationError("eval.epsilon must lie in (0, 1)")
    if cfg["kf.window"] < cfg["kf.order"] + 1:
        raise ConfigurationError("kf.window must be >= kf.order + 1")
    # Constructing the typed objects runs their own invariant checks.
    cfg.drop_config()
