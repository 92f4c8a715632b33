"""Prediction-model builders: three input/output pairings x (ae | unet).

Variants (m past states of a T x F grid predicting the next one):

  baseline          one (m*T) x F image in, T x F out; two extra
                    time-shrinking input convs feed a symmetric trunk;
                    "partial unet" skips attach only where mirrored
                    spatial dims match (never to the input stage).
  image_completion  ((m+1)*T) x F in and out; the final T x F block of
                    the input is zeroed and the network reconstructs the
                    whole stack including the missing slot.
  next_frame        m parallel input channels of T x F, one channel out.

Both archs share the encoder/decoder trunk: kernel 4 convs with
LeakyReLU(0.2) down, transposed convs with ReLU (tanh on the last layer)
up, batch norm on every layer except the first and last, dropout on the
first three decoder layers.  Frequency halves every layer (F must divide
by 2^depth); the time axis halves only while it is >= 4 and even.
Channel width doubles per layer, capped at 8x base.  UNet decoder widths
are thinned by a searched factor so ae and unet parameter counts stay
within a few percent at equal (depth, base_channels).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import layers as L
from ..errors import ConfigurationError, ShapeError

VARIANTS = ("baseline", "image_completion", "next_frame")
ARCHS = ("ae", "unet")
KERNEL = (4, 4)
CHANNEL_CAP_FACTOR = 8
DROPOUT_DECODER_LAYERS = 3


@dataclass(frozen=True)
class ModelSpec:
    variant: str = "next_frame"
    arch: str = "unet"
    depth: int = 4
    base_channels: int = 16
    memory: int = 4
    grid: tuple[int, int] = (8, 64)      # (T, F)
    parameter_budget: int | None = None
    leaky_slope: float = 0.2
    dropout_rate: float = 0.5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"variant must be one of {VARIANTS}")
        if self.arch not in ARCHS:
            raise ConfigurationError(f"arch must be one of {ARCHS}")
        if self.depth < 1:
            raise ConfigurationError("depth must be >= 1")
        if self.base_channels < 1:
            raise ConfigurationError("base_channels must be >= 1")
        if self.memory < 1:
            raise ConfigurationError("memory must be >= 1")

    def io_shapes(self):
        """((in_ch, in_h, in_w), (out_ch, out_h, out_w))."""
        t, f = self.grid
        m = self.memory
        if self.variant == "baseline":
            return (1, m * t, f), (1, t, f)
        if self.variant == "image_completion":
            return (1, (m + 1) * t, f), (1, (m + 1) * t, f)
        return (m, t, f), (1, t, f)


def _axis_stride(dim: int, axis: str) -> int:
    if axis == "freq":
        return 2
    return 2 if (dim >= 4 and dim % 2 == 0) else 1


def _pad_for(dim: int, stride: int):
    """Kernel-4 paddings: (1,1) halves an even dim at stride 2, (1,2) keeps it."""
    if stride == 2:
        if dim % 2 != 0:
            raise ConfigurationError(f"stride-2 axis dim {dim} is not even")
        return (1, 1)
    return (1, 2)


@dataclass
class _ConvPlan:
    in_ch: int
    out_ch: int
    stride: tuple[int, int]
    padding: tuple[int, int, int, int]
    in_hw: tuple[int, int]
    out_hw: tuple[int, int]
    batch_norm: bool
    activation: str                       # "leaky" | "relu" | "tanh"
    dropout: bool = False
    skip_source_block: int | None = None  # encoder block index feeding a concat


@dataclass
class _Plan:
    stage: list[_ConvPlan] = field(default_factory=list)
    encoder: list[_ConvPlan] = field(default_factory=list)
    decoder: list[_ConvPlan] = field(default_factory=list)

    def parameter_count(self) -> int:
        total = 0
        for blk in self.stage + self.encoder + self.decoder:
            in_ch = blk.in_ch
            if blk.skip_source_block is not None:
                in_ch += self.encoder[blk.skip_source_block].out_ch
            total += in_ch * blk.out_ch * KERNEL[0] * KERNEL[1] + blk.out_ch
            if blk.batch_norm:
                total += 2 * blk.out_ch
        return total


def _shrink(hw, stride):
    return (hw[0] // stride[0], hw[1] // stride[1])


def _plan_trunk(spec: ModelSpec, dec_widths: list[int] | None = None) -> _Plan:
    (in_ch, in_h, in_w), (out_ch, _, _) = spec.io_shapes()
    plan = _Plan()
    t, f = in_h, in_w

    if spec.variant == "baseline":
        # Two input layers shrink the stacked time axis m*T -> T.
        if spec.memory not in (1, 2, 4):
            raise ConfigurationError(
                "baseline variant input stage supports memory in {1, 2, 4}"
            )
        s1 = 2 if spec.memory >= 2 else 1
        s2 = 2 if spec.memory == 4 else 1
        ch = spec.base_channels
        cur = in_ch
        for i, st in enumerate((s1, s2)):
            pad_t = _pad_for(t, st)
            pad_f = _pad_for(f, 1)
            out_hw = (t // st, f)
            plan.stage.append(_ConvPlan(
                in_ch=cur, out_ch=ch, stride=(st, 1),
                padding=(*pad_t, *pad_f), in_hw=(t, f), out_hw=out_hw,
                batch_norm=(i > 0), activation="leaky",
            ))
            cur, t = ch, t // st
        in_ch = cur

    if f % (2 ** spec.depth) != 0:
        max_depth = 0
        ftmp = f
        while ftmp % 2 == 0:
            max_depth += 1
            ftmp //= 2
        raise ConfigurationError(
            f"frequency dim {f} does not support depth {spec.depth} "
            f"(must divide by 2^depth); try depth <= {max_depth}"
        )

    cap = spec.base_channels * CHANNEL_CAP_FACTOR
    enc_ch = [min(spec.base_channels * 2 ** i, cap) for i in range(spec.depth)]

    cur_ch, cur_hw = in_ch, (t, f)
    first_trunk_is_input = not plan.stage
    for i in range(spec.depth):
        st = (_axis_stride(cur_hw[0], "time"), 2)
        pad = (*_pad_for(cur_hw[0], st[0]), *_pad_for(cur_hw[1], 2))
        out_hw = _shrink(cur_hw, st)
        plan.encoder.append(_ConvPlan(
            in_ch=cur_ch, out_ch=enc_ch[i], stride=st, padding=pad,
            in_hw=cur_hw, out_hw=out_hw,
            batch_norm=not (first_trunk_is_input and i == 0),
            activation="leaky",
        ))
        cur_ch, cur_hw = enc_ch[i], out_hw

    if dec_widths is None:
        dec_widths = [plan.encoder[j].out_ch for j in range(spec.depth - 2, -1, -1)]
    dec_out = dec_widths + [out_ch]

    for j in range(spec.depth):
        mirror = plan.encoder[spec.depth - 1 - j]
        skip = None
        if spec.arch == "unet" and j >= 1:
            cand = spec.depth - 1 - j            # encoder block with mirrored dims
            if plan.encoder[cand].out_hw == mirror.out_hw:
                skip = cand
        plan.decoder.append(_ConvPlan(
            in_ch=cur_ch, out_ch=dec_out[j], stride=mirror.stride,
            padding=mirror.padding, in_hw=mirror.out_hw, out_hw=mirror.in_hw,
            batch_norm=(j < spec.depth - 1), activation=("tanh" if j == spec.depth - 1
                                                         else "relu"),
            dropout=(j < DROPOUT_DECODER_LAYERS and j < spec.depth - 1),
            skip_source_block=skip,
        ))
        cur_ch = dec_out[j]
    return plan


def _plan_model(spec: ModelSpec) -> _Plan:
    if spec.arch == "ae":
        return _plan_trunk(spec)
    # UNet: thin the decoder widths so the count tracks the ae build.
    ae_plan = _plan_trunk(replace(spec, arch="ae"))
    target = ae_plan.parameter_count()
    ae_dec = [blk.out_ch for blk in ae_plan.decoder[:-1]]
    best_plan, best_err = None, None
    for factor in np.linspace(0.4, 1.0, 61):
        widths = [max(1, round(w * factor)) for w in ae_dec]
        plan = _plan_trunk(spec, dec_widths=widths)
        err = abs(plan.parameter_count() - target)
        if best_err is None or err < best_err:
            best_plan, best_err = plan, err
    return best_plan


def parameter_count(spec: ModelSpec) -> int:
    return _plan_model(spec).parameter_count()


def resolve_budget(spec: ModelSpec) -> ModelSpec:
    """Pick base_channels to approach parameter_budget (largest not above)."""
    if spec.parameter_budget is None:
        return spec
    best = None
    for width in range(1, 513):
        cand = replace(spec, base_channels=width)
        if parameter_count(cand) <= spec.parameter_budget:
            best = cand
        else:
            break
    if best is None:
        raise ConfigurationError(
            f"parameter budget {spec.parameter_budget} below the smallest model"
        )
    return best


class Model:
    """A built prediction network plus its spec and shape metadata."""

    def __init__(self, spec: ModelSpec, network: L.Network, plan: _Plan):
        self.spec = spec
        self.network = network
        self.plan = plan
        self.in_shape, self.out_shape = spec.io_shapes()

    @property
    def num_parameters(self) -> int:
        return sum(p.size for p in self.network.params())

    def forward(self, x, training: bool = False, rng=None):
        if x.shape[1:] != self.in_shape:
            raise ShapeError(f"input shape {x.shape[1:]} != expected {self.in_shape}")
        return self.network.forward(x, L.Context(training=training, rng=rng))

    def backward(self, gy):
        return self.network.backward(gy)

    def predicted_block(self, output: np.ndarray) -> np.ndarray:
        """The T x F block holding the next-state prediction, per variant."""
        t, f = self.spec.grid
        if self.spec.variant == "image_completion":
            return output[:, 0, self.spec.memory * t:, :]
        return output[:, 0]

    def prepare_input(self, window: np.ndarray) -> np.ndarray:
        """Map an (m, T, F) memory window to the variant's network input."""
        m, (t, f) = self.spec.memory, self.spec.grid
        if window.shape != (m, t, f):
            raise ShapeError(f"window shape {window.shape} != {(m, t, f)}")
        if self.spec.variant == "next_frame":
            return window[None]
        if self.spec.variant == "baseline":
            return window.reshape(1, 1, m * t, f)
        full = np.zeros((1, 1, (m + 1) * t, f), dtype=window.dtype)
        full[0, 0, :m * t] = window.reshape(m * t, f)
        return full


def build_model(spec: ModelSpec, seed: int) -> Model:
    """Deterministically initialize the network described by ``spec``."""
    spec = resolve_budget(spec)
    plan = _plan_model(spec)
    rng = np.random.default_rng(seed)
    net_layers: list[L.Layer] = []
    enc_block_out: list[int] = []       # layer index of each encoder block output

    def emit_conv(blk: _ConvPlan, transposed: bool):
        in_ch = blk.in_ch
        if blk.skip_source_block is not None:
            src = enc_block_out[blk.skip_source_block]
            net_layers.append(L.ConcatSkip(source=src))
            in_ch += _enc_out_ch[blk.skip_source_block]
        if transposed:
            net_layers.append(L.TConv(in_ch, blk.out_ch, KERNEL, blk.stride,
                                      blk.padding, blk.out_hw, rng))
        else:
            net_layers.append(L.Conv(in_ch, blk.out_ch, KERNEL, blk.stride,
                                     blk.padding, rng))
        if blk.batch_norm:
            net_layers.append(L.BatchNorm(blk.out_ch))
        if blk.activation == "leaky":
            net_layers.append(L.LeakyReLU(spec.leaky_slope))
        elif blk.activation == "relu":
            net_layers.append(L.ReLU())
        else:
            net_layers.append(L.Tanh())
        if blk.dropout and spec.dropout_rate > 0:
            net_layers.append(L.Dropout(spec.dropout_rate))

    _enc_out_ch = [b.out_ch for b in plan.encoder]
    for blk in plan.stage:
        emit_conv(blk, transposed=False)
    for blk in plan.encoder:
        emit_conv(blk, transposed=False)
        enc_block_out.append(len(net_layers) - 1)
    for blk in plan.decoder:
        emit_conv(blk, transposed=True)

    return Model(spec, L.Network(net_layers), plan)


def predict(model: Model, window: np.ndarray) -> np.ndarray:
    """Inference-mode next-state image from an (m, T, F) memory window."""
    x = model.prepare_input(np.asarray(window, dtype=np.float32))
    out = model.forward(x, training=False)
    return model.predicted_block(out)[0]


def rollout(model: Model, window: np.ndarray, steps: int) -> list[np.ndarray]:
    """Autoregressive multi-step prediction: feed each output back in."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    buf = np.asarray(window, dtype=np.float32).copy()
    out = []
    for _ in range(steps):
        nxt = predict(model, buf)
        out.append(nxt)
        buf = np.concatenate([buf[1:], nxt[None]], axis=0)
    return out
