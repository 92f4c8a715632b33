"""Classical per-pixel channel predictor: complex AR(p) + Kalman filter.

AR coefficients come from the Yule-Walker equations solved by the complex
(Hermitian-Toeplitz) Levinson-Durbin recursion on a circular
autocovariance estimate of a short sliding window (15 observations by
default).  Prediction wraps the AR model in a companion-form Kalman
filter and returns the a-priori estimate one step past the window.

Windows whose Yule-Walker system degenerates (reflection magnitude at 1,
e.g. a constant series) fall back to persistence with a status flag so a
single bad pixel never aborts a grid evaluation.  The sample mean is
deliberately not removed before the autocovariance: 15-sample windows are
too short for a stable mean estimate and channel pixels are near
zero-mean (set ``remove_mean=True`` to override).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateModelError, ShapeError

DEFAULT_WINDOW = 15
_REFLECTION_TOL = 1e-12


@dataclass(frozen=True)
class ARModel:
    """Complex AR(p): x_k = sum_i a_i x_{k-i} + e_k, var(e) = sigma2."""

    order: int
    coefficients: np.ndarray      # (p,) complex
    innovation_variance: float
    stable: bool                  # all companion eigenvalues inside unit circle

    def companion(self) -> np.ndarray:
        p = self.order
        a = np.zeros((p, p), dtype=complex)
        a[0, :] = self.coefficients
        if p > 1:
            a[1:, :-1] = np.eye(p - 1)
        return a

    def predict_next(self, recent: np.ndarray) -> complex:
        """Pure AR one-step prediction from the most-recent-first state."""
        return complex(np.dot(self.coefficients, recent))


@dataclass
class KalmanState:
    """Companion-form filter state for one pixel series."""

    x: np.ndarray            # (p,) complex, most recent first
    P: np.ndarray            # (p, p) Hermitian PSD
    A: np.ndarray            # companion transition
    Q: np.ndarray            # process noise, sigma2 in top-left
    R: float                 # measurement noise


class KfPrediction(NamedTuple):
    value: complex
    used_fallback: bool
    model: ARModel | None


def autocovariance(series, max_lag: int) -> np.ndarray:
    """Circular autocovariance gamma(l) = (1/N) sum_k x[(k+l) mod N] conj(x[k]).

    The circular form keeps the Toeplitz system positive semi-definite
    (it is a principal submatrix of a PSD circulant), guarantees
    gamma(0) >= |gamma(l)| and makes a constant series exactly
    flat-covariance (hence degenerate under Yule-Walker).
    """
    x = np.asarray(series, dtype=complex)
    if x.ndim != 1:
        raise ValueError("series must be one-dimensional")
    n = x.size
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    if max_lag >= n:
        raise ValueError(f"max_lag {max_lag} must be < series length {n}")
    out = np.empty(max_lag + 1, dtype=complex)
    for lag in range(max_lag + 1):
        out[lag] = np.mean(np.roll(x, -lag) * np.conj(x))
    out[0] = out[0].real
    return out


def yule_walker(gamma, p: int) -> ARModel:
    """Solve the order-p Yule-Walker system by Levinson-Durbin.

    Raises DegenerateModelError when gamma(0) <= 0 or any reflection
    coefficient reaches unit magnitude (within 1e-12).
    """
    g = np.asarray(gamma, dtype=complex)
    if p < 1:
        raise ValueError("order p must be >= 1")
    if g.size < p + 1:
        raise ValueError(f"need {p + 1} autocovariances for order {p}, got {g.size}")
    g0 = g[0].real
    if g0 <= 0:
        raise DegenerateModelError(f"gamma(0) = {g0} is not positive")

    a = np.zeros(p, dtype=complex)
    err = g0
    for i in range(1, p + 1):
        acc = g[i] - np.dot(a[:i - 1], g[i - 1:0:-1])
        k = acc / err
        if abs(k) >= 1.0 - _REFLECTION_TOL:
            raise DegenerateModelError(
                f"reflection coefficient |k_{i}| = {abs(k):.12f} >= 1"
            )
        a[:i - 1] = a[:i - 1] - k * np.conj(a[:i - 1][::-1])
        a[i - 1] = k
        err = err * (1.0 - abs(k) ** 2)

    model = ARModel(order=p, coefficients=a, innovation_variance=float(err.real),
                    stable=False)
    eigs = np.linalg.eigvals(model.companion())
    return ARModel(order=p, coefficients=a, innovation_variance=float(err.real),
                   stable=bool(np.all(np.abs(eigs) < 1.0)))


def kalman_one_step(history, model: ARModel, measurement_noise: float = 0.0) -> complex:
    """A-priori prediction for step W+1 given a known AR model.

    The state is seeded with the first p observations (P = sigma2 * I),
    the filter runs predict/update over the remaining window, and the
    final transition yields the prediction.  Covariance updates use the
    Joseph form to preserve positive semi-definiteness.
    """
    h = np.asarray(history, dtype=complex)
    p = model.order
    if h.size < p + 1:
        raise ValueError(f"window must hold at least p+1 = {p + 1} observations")
    a = model.companion()
    q = np.zeros((p, p), dtype=complex)
    q[0, 0] = model.innovation_variance
    r = float(measurement_noise)

    x = h[p - 1::-1].copy()                      # most recent first
    cov = model.innovation_variance * np.eye(p, dtype=complex)
    eye = np.eye(p, dtype=complex)

    for k in range(p, h.size):
        x = a @ x
        cov = a @ cov @ a.conj().T + q
        s = cov[0, 0].real + r
        if s > 1e-300:
            gain = cov[:, 0] / s
            x = x + gain * (h[k] - x[0])
            j = eye.copy()
            j[:, 0] -= gain
            cov = j @ cov @ j.conj().T + r * np.outer(gain, gain.conj())
        cov = 0.5 * (cov + cov.conj().T)
    return complex((a @ x)[0])


def kalman_predict_series(
    history, p: int = 4, measurement_noise: float = 0.0
) -> KfPrediction:
    """Fit AR(p) on the window and predict one step ahead.

    Degenerate fits fall back to persistence (last observation) with
    ``used_fallback=True``.
    """
    h = np.asarray(history, dtype=complex)
    if h.size < p + 1:
        raise ValueError(f"window length {h.size} must be >= p+1 = {p + 1}")
    try:
        gamma = autocovariance(h, p)
        model = yule_walker(gamma, p)
    except DegenerateModelError:
        return KfPrediction(value=complex(h[-1]), used_fallback=True, model=None)
    value = kalman_one_step(h, model, measurement_noise)
    if not np.isfinite(value):
        return KfPrediction(value=complex(h[-1]), used_fallback=True, model=model)
    return KfPrediction(value=value, used_fallback=False, model=model)


# -- batched grid path ------------------------------------------------------

def _batched_autocov(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Circular autocovariance per row; x is (B, N)."""
    n = x.shape[1]
    out = np.empty((x.shape[0], max_lag + 1), dtype=complex)
    conj = np.conj(x)
    for lag in range(max_lag + 1):
        out[:, lag] = np.mean(np.roll(x, -lag, axis=1) * conj, axis=1)
    out[:, 0] = out[:, 0].real
    return out


def _batched_levinson(gamma: np.ndarray, p: int):
    """Vectorized Levinson-Durbin; returns (coeffs, sigma2, degenerate mask)."""
    b = gamma.shape[0]
    a = np.zeros((b, p), dtype=complex)
    err = gamma[:, 0].real.copy()
    bad = err <= 0
    err = np.where(bad, 1.0, err)
    for i in range(1, p + 1):
        acc = gamma[:, i].copy()
        if i > 1:
            acc -= np.einsum("bj,bj->b", a[:, :i - 1], gamma[:, i - 1:0:-1])
        k = acc / err
        bad |= np.abs(k) >= 1.0 - _REFLECTION_TOL
        k = np.where(bad, 0.0, k)
        a[:, :i - 1] = a[:, :i - 1] - k[:, None] * np.conj(a[:, :i - 1][:, ::-1])
        a[:, i - 1] = k
        err = err * (1.0 - np.abs(k) ** 2)
    return a, err, bad


def _batched_kalman(h: np.ndarray, coeffs: np.ndarray, sigma2: np.ndarray,
                    r: float) -> np.ndarray:
    """Vectorized kalman_one_step over rows of h (B, N)."""
    b, n = h.shape
    p = coeffs.shape[1]
    a = np.zeros((b, p, p), dtype=complex)
    a[:, 0, :] = coeffs
    if p > 1:
        idx = np.arange(p - 1)
        a[:, idx + 1, idx] = 1.0

    x = h[:, p - 1::-1].copy()
    cov = sigma2[:, None, None] * np.eye(p, dtype=complex)
    eye = np.eye(p, dtype=complex)

    for k in range(p, n):
        x = np.einsum("bij,bj->bi", a, x)
        cov = a @ cov @ np.conj(np.swapaxes(a, 1, 2))
        cov[:, 0, 0] += sigma2
        s = cov[:, 0, 0].real + r
        safe = s > 1e-300
        s = np.where(safe, s, 1.0)
        gain = np.where(safe[:, None], cov[:, :, 0] / s[:, None], 0.0)
        x = x + gain * (h[:, k] - x[:, 0])[:, None]
        j = np.broadcast_to(eye, (b, p, p)).copy()
        j[:, :, 0] -= gain
        cov = j @ cov @ np.conj(np.swapaxes(j, 1, 2))
        cov += r * gain[:, :, None] * np.conj(gain[:, None, :])
        cov = 0.5 * (cov + np.conj(np.swapaxes(cov, 1, 2)))
    return np.einsum("bj,bj->b", coeffs, x)


def kf_predict_grid(
    history,
    p: int = 4,
    measurement_noise: float = 0.0,
    window: int = DEFAULT_WINDOW,
    with_status: bool = False,
    threads: int = 1,
):
    """One-step-ahead prediction for every (port, t, f) pixel series.

    ``history`` is complex, shaped (K, T, F) or (K, ports, T, F) with
    K >= window >= p+1; the last ``window`` slots are used.  Each pixel is
    predicted independently (vectorized; ``threads`` > 1 fans pixel blocks
    out across a thread pool with identical results).  Degenerate pixels
    fall back to persistence; ``with_status=True`` also returns the
    boolean fallback mask.
    """
    arr = np.asarray(history, dtype=complex)
    if arr.ndim not in (3, 4):
        raise ShapeError(f"history must be (K,T,F) or (K,P,T,F), got {arr.shape}")
    k_len = arr.shape[0]
    if window < p + 1:
        raise ValueError(f"window {window} must be >= p+1 = {p + 1}")
    if k_len < window:
        raise ValueError(f"history length {k_len} < window {window}")

    tail = arr[k_len - window:]
    pixel_shape = tail.shape[1:]
    flat = tail.reshape(window, -1).T            # (B, window)

    def predict_block(block: np.ndarray):
        gamma = _batched_autocov(block, p)
        coeffs, sigma2, bad = _batched_levinson(gamma, p)
        pred = _batched_kalman(block, coeffs, sigma2, measurement_noise)
        bad |= ~np.isfinite(pred)
        pred = np.where(bad, block[:, -1], pred)
        return pred, bad

    if threads <= 1:
        pred, bad = predict_block(flat)
    else:
        from concurrent.futures import ThreadPoolExecutor

        chunks = np.array_split(np.arange(flat.shape[0]), threads)
        pred = np.empty(flat.shape[0], dtype=complex)
        bad = np.empty(flat.shape[0], dtype=bool)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda ix: predict_block(flat[ix]), chunks))
        for ix, (pr, bd) in zip(chunks, results):
            pred[ix] = pr
            bad[ix] = bd

    grid = pred.reshape(pixel_shape)
    if with_status:
        return grid, bad.reshape(pixel_shape)
    return grid
