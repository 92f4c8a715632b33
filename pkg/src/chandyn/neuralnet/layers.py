"""Layer objects wiring tensorops into a trainable network.

Each layer owns its parameters and gradient buffers and caches whatever
its backward pass needs.  The Network container runs a layer list whose
ConcatSkip entries reference earlier layer outputs by index (a DAG, not a
plain chain); backward accumulates gradients into both branches.
"""

from __future__ import annotations

import numpy as np

from . import tensorops as ops
from ..errors import ShapeError


class Context:
    """Per-forward-pass state: train/infer mode and the dropout stream."""

    def __init__(self, training: bool = False, rng: np.random.Generator | None = None):
        self.training = training
        self.rng = rng if rng is not None else np.random.default_rng(0)


class Layer:
    kind = "base"

    def params(self) -> list[np.ndarray]:
        return []

    def grads(self) -> list[np.ndarray]:
        return []

    def state(self) -> list[np.ndarray]:
        """Non-trained buffers that checkpoints must persist (BN stats)."""
        return []

    def forward(self, x, ctx: Context):
        raise NotImplementedError

    def backward(self, gy):
        raise NotImplementedError

    def zero_grads(self):
        for g in self.grads():
            g[...] = 0


class Conv(Layer):
    kind = "conv"

    def __init__(self, in_ch, out_ch, kernel, stride, padding, rng, dtype=np.float32):
        fan_in = in_ch * kernel[0] * kernel[1]
        self.w = (rng.standard_normal((out_ch, in_ch, *kernel))
                  * np.sqrt(2.0 / fan_in)).astype(dtype)
        self.b = np.zeros(out_ch, dtype=dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self.stride, self.padding = stride, padding
        self._cache = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]

    def forward(self, x, ctx):
        y, col = ops.conv2d(x, self.w, self.b, self.stride, self.padding,
                            return_col=True)
        self._cache = (col, x.shape)
        return y

    def backward(self, gy):
        col, x_shape = self._cache
        gw, gb = ops.conv2d_weight_bias_grad(gy, col, self.w.shape)
        self.gw += gw
        self.gb += gb
        return ops.conv2d_input_grad(gy, self.w, x_shape[2:], self.stride, self.padding)


class TConv(Layer):
    kind = "transposed_conv"

    def __init__(self, in_ch, out_ch, kernel, stride, padding, out_hw, rng,
                 dtype=np.float32):
        fan_in = in_ch * kernel[0] * kernel[1]
        self.w = (rng.standard_normal((in_ch, out_ch, *kernel))
                  * np.sqrt(2.0 / fan_in)).astype(dtype)
        self.b = np.zeros(out_ch, dtype=dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self.stride, self.padding, self.out_hw = stride, padding, out_hw
        self._cache = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]

    def forward(self, x, ctx):
        self._cache = x
        return ops.tconv2d(x, self.w, self.b, self.stride, self.padding, self.out_hw)

    def backward(self, gy):
        x = self._cache
        gw, gb = ops.tconv2d_weight_bias_grad(gy, x, self.w.shape,
                                              self.stride, self.padding)
        self.gw += gw
        self.gb += gb
        return ops.tconv2d_input_grad(gy, self.w, self.stride, self.padding)


class BatchNorm(Layer):
    kind = "batch_norm"

    def __init__(self, channels, momentum=0.9, eps=1e-5, dtype=np.float32):
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.ggamma = np.zeros_like(self.gamma)
        self.gbeta = np.zeros_like(self.beta)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum, self.eps = momentum, eps
        self._cache = None

    def params(self):
        return [self.gamma, self.beta]

    def grads(self):
        return [self.ggamma, self.gbeta]

    def state(self):
        return [self.running_mean, self.running_var]

    def forward(self, x, ctx):
        y, cache, rm, rv = ops.batch_norm_forward(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            ctx.training, self.momentum, self.eps)
        if ctx.training:
            self.running_mean = rm.astype(self.running_mean.dtype)
            self.running_var = rv.astype(self.running_var.dtype)
        self._cache = cache
        return y

    def backward(self, gy):
        gx, ggamma, gbeta = ops.batch_norm_backward(gy, self._cache)
        self.ggamma += ggamma
        self.gbeta += gbeta
        return gx


class LeakyReLU(Layer):
    kind = "leaky_relu"

    def __init__(self, slope=0.2):
        self.slope = slope
        self._x = None

    def forward(self, x, ctx):
        self._x = x
        return ops.leaky_relu(x, self.slope)

    def backward(self, gy):
        return ops.leaky_relu_grad(gy, self._x, self.slope)


class ReLU(Layer):
    kind = "relu"

    def __init__(self):
        self._x = None

    def forward(self, x, ctx):
        self._x = x
        return ops.relu(x)

    def backward(self, gy):
        return ops.relu_grad(gy, self._x)


class Tanh(Layer):
    kind = "tanh"

    def __init__(self):
        self._y = None

    def forward(self, x, ctx):
        self._y = ops.tanh(x)
        return self._y

    def backward(self, gy):
        return ops.tanh_grad(gy, self._y)


class Dropout(Layer):
    kind = "dropout"

    def __init__(self, rate=0.5):
        if not (0.0 <= rate < 1.0):
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = rate
        self._mask = None

    def forward(self, x, ctx):
        if not ctx.training or self.rate == 0.0:
            self._mask = None
            return x
        self._mask = ops.dropout_mask(x.shape, self.rate, ctx.rng, x.dtype.type)
        return x * self._mask

    def backward(self, gy):
        if self._mask is None:
            return gy
        return gy * self._mask


class ConcatSkip(Layer):
    """Concatenate the output of an earlier layer along channels."""

    kind = "concat_skip"

    def __init__(self, source: int):
        self.source = source
        self._split = None

    def forward_pair(self, x, skip):
        if x.shape[2:] != skip.shape[2:]:
            raise ShapeError(
                f"skip spatial dims {skip.shape[2:]} != input {x.shape[2:]}"
            )
        self._split = x.shape[1]
        return np.concatenate([x, skip], axis=1)

    def forward(self, x, ctx):  # pragma: no cover - wired via forward_pair
        raise RuntimeError("ConcatSkip is applied through Network.forward")

    def backward(self, gy):
        return gy[:, :self._split], gy[:, self._split:]


class Network:
    """Layer list with skip wiring; layer i reads layer i-1 (the input for i=0)."""

    def __init__(self, layers: list[Layer]):
        self.layers = layers
        self._outputs = None

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def grads(self):
        out = []
        for layer in self.layers:
            out.extend(layer.grads())
        return out

    def state(self):
        out = []
        for layer in self.layers:
            out.extend(layer.state())
        return out

    def zero_grads(self):
        for layer in self.layers:
            layer.zero_grads()

    def forward(self, x, ctx: Context):
        outputs = [None] * len(self.layers)
        cur = x
        for i, layer in enumerate(self.layers):
            if isinstance(layer, ConcatSkip):
                cur = layer.forward_pair(cur, outputs[layer.source])
            else:
                cur = layer.forward(cur, ctx)
            outputs[i] = cur
        self._outputs = outputs
        return cur

    def backward(self, gy):
        pending = [None] * (len(self.layers) + 1)
        pending[len(self.layers)] = gy

        def add(slot, g):
            if pending[slot] is None:
                pending[slot] = g
            else:
                pending[slot] = pending[slot] + g

        for i in range(len(self.layers) - 1, -1, -1):
            g = pending[i + 1]
            layer = self.layers[i]
            if isinstance(layer, ConcatSkip):
                g_main, g_skip = layer.backward(g)
                add(i, g_main)
                add(layer.source + 1, g_skip)
            else:
                add(i, layer.backward(g))
        return pending[0]
