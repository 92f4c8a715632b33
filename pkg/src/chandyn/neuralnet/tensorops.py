"""Exact forward/backward primitives for the convolutional engine.

Convolution uses cross-correlation semantics on NCHW tensors with
per-axis strides and possibly asymmetric padding (pt, pb, pl, pr).
Transposed convolution is implemented as the exact adjoint of a
convolution with the same geometry, so <conv(x), y> == <x, tconv(y)>
holds to machine precision and tconv's forward shape map inverts conv's.

The heavy lifting is two shared kernels: an im2col gather-matmul
(forward / weight gradient) and a kernel-position scatter (input
gradient / tconv forward) that loops over the k*k kernel offsets with a
strided slice accumulate, keeping everything on BLAS matmuls.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError


def conv_out_shape(in_hw, kernel, stride, padding):
    h, w = in_hw
    kh, kw = kernel
    sh, sw = stride
    pt, pb, pl, pr = padding
    hp, wp = h + pt + pb, w + pl + pr
    if hp < kh or wp < kw:
        raise ShapeError(f"padded input {(hp, wp)} smaller than kernel {(kh, kw)}")
    return (hp - kh) // sh + 1, (wp - kw) // sw + 1


def _im2col(xp: np.ndarray, kernel, stride):
    kh, kw = kernel
    sh, sw = stride
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    b, ci, ho, wo = win.shape[:4]
    col = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5))
    return col.reshape(b * ho * wo, ci * kh * kw), (ho, wo)


def conv2d(x, w, b, stride, padding, return_col: bool = False):
    """y[b,o] = sum_{i,u,v} x[b,i,sh*oh+u-pt, sw*ow+v-pl] * w[o,i,u,v] + b[o]."""
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d expects 4-d tensors, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"input channels {x.shape[1]} != weight channels {w.shape[1]}")
    pt, pb, pl, pr = padding
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    col, (ho, wo) = _im2col(xp, w.shape[2:], stride)
    out = col @ w.reshape(w.shape[0], -1).T
    if b is not None:
        out += b
    y = out.reshape(x.shape[0], ho, wo, w.shape[0]).transpose(0, 3, 1, 2)
    y = np.ascontiguousarray(y)
    if return_col:
        return y, col
    return y


def conv2d_weight_bias_grad(gy, col, w_shape):
    """Gradients w.r.t. weights and bias given the cached im2col matrix."""
    co = w_shape[0]
    gy_mat = gy.transpose(0, 2, 3, 1).reshape(-1, co)
    gw = (gy_mat.T @ col).reshape(w_shape)
    gb = gy.sum(axis=(0, 2, 3))
    return gw, gb


def conv2d_input_grad(gy, w, in_hw, stride, padding):
    """Gradient w.r.t. the conv input (also the tconv forward kernel)."""
    b, co, ho, wo = gy.shape
    ci, (kh, kw) = w.shape[1], w.shape[2:]
    sh, sw = stride
    pt, pb, pl, pr = padding
    h, wd = in_hw
    hp, wp = h + pt + pb, wd + pl + pr
    gxp = np.zeros((b, ci, hp, wp), dtype=gy.dtype)
    gy_mat = gy.transpose(0, 2, 3, 1).reshape(-1, co)
    for u in range(kh):
        for v in range(kw):
            contrib = gy_mat @ w[:, :, u, v]
            contrib = contrib.reshape(b, ho, wo, ci).transpose(0, 3, 1, 2)
            gxp[:, :, u:u + sh * ho:sh, v:v + sw * wo:sw] += contrib
    return np.ascontiguousarray(gxp[:, :, pt:hp - pb, pl:wp - pr])


def tconv2d(x, w, b, stride, padding, out_hw):
    """Transposed convolution: the adjoint of conv2d with this geometry.

    ``w`` has shape (C_in, C_out, kh, kw); the virtual convolution maps a
    (C_out, *out_hw) image to the (C_in, ...) shape of ``x``.
    """
    expect = conv_out_shape(out_hw, w.shape[2:], stride, padding)
    if x.shape[2:] != expect:
        raise ShapeError(
            f"tconv input spatial {x.shape[2:]} incompatible with output "
            f"{out_hw} under this geometry (expected {expect})"
        )
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"input channels {x.shape[1]} != weight channels {w.shape[0]}")
    y = conv2d_input_grad(x, w, out_hw, stride, padding)
    if b is not None:
        y += b[None, :, None, None]
    return y


def tconv2d_input_grad(gy, w, stride, padding):
    return conv2d(gy, w, None, stride, padding)


def tconv2d_weight_bias_grad(gy, x, w_shape, stride, padding):
    """gy is the output-side gradient (big image), x the tconv input."""
    pt, pb, pl, pr = padding
    gyp = np.pad(gy, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    col, _ = _im2col(gyp, w_shape[2:], stride)
    x_mat = x.transpose(0, 2, 3, 1).reshape(-1, w_shape[0])
    gw = (x_mat.T @ col).reshape(w_shape)
    gb = gy.sum(axis=(0, 2, 3))
    return gw, gb


def batch_norm_forward(x, gamma, beta, running_mean, running_var,
                       training, momentum=0.9, eps=1e-5):
    """Per-channel batch normalization; returns (y, cache, new running stats)."""
    if training:
        if x.shape[0] < 2:
            raise ValueError("batch norm in training mode needs batch size >= 2")
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        new_rm = momentum * running_mean + (1.0 - momentum) * mean
        new_rv = momentum * running_var + (1.0 - momentum) * var
    else:
        mean, var = running_mean, running_var
        new_rm, new_rv = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    y = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    cache = (xhat, inv_std, gamma, training)
    return y, cache, new_rm, new_rv


def batch_norm_backward(gy, cache):
    xhat, inv_std, gamma, training = cache
    ggamma = (gy * xhat).sum(axis=(0, 2, 3))
    gbeta = gy.sum(axis=(0, 2, 3))
    gxhat = gy * gamma[None, :, None, None]
    if not training:
        gx = gxhat * inv_std[None, :, None, None]
        return gx, ggamma, gbeta
    n = gy.shape[0] * gy.shape[2] * gy.shape[3]
    sum_g = gxhat.sum(axis=(0, 2, 3))[None, :, None, None]
    sum_gx = (gxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None]
    gx = (inv_std[None, :, None, None] / n) * (n * gxhat - sum_g - xhat * sum_gx)
    return gx, ggamma, gbeta


def leaky_relu(x, slope):
    return np.where(x >= 0, x, slope * x)


def leaky_relu_grad(gy, x, slope):
    return np.where(x >= 0, gy, slope * gy)


def relu(x):
    return np.maximum(x, 0)


def relu_grad(gy, x):
    return np.where(x >= 0, gy, 0)


def tanh(x):
    return np.tanh(x)


def tanh_grad(gy, y):
    return gy * (1.0 - y * y)


def dropout_mask(shape, rate, rng, dtype):
    """Inverted-dropout mask: zeros with prob rate, else 1/(1-rate)."""
    if not (0.0 <= rate < 1.0):
        raise ValueError("dropout rate must be in [0, 1)")
    if rate == 0.0:
        return np.ones(shape, dtype=dtype)
    keep = (rng.random(shape) >= rate).astype(dtype)
    return keep / dtype(1.0 - rate)


def mae_loss(pred, target):
    """Mean absolute error over all elements; subgradient 0 at exact ties."""
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    loss = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / diff.size
    return loss, grad.astype(pred.dtype, copy=False)
