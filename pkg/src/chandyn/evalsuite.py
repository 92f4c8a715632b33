"""Prediction-quality metrics and downstream precoding impact.

Capacity scoring always measures the beamforming gain of a precoder
against the *true* channel vector: w is computed from whichever CSI a
mode provides (perfect = true next state, aged = stale last state,
predicted = a predictor's output), but |c_true . w|^2 is what enters
log2(1 + rho |c w|^2).  The epsilon-outage capacity is the lower
empirical epsilon-quantile of the pooled per-element capacities.

MRT here is unit-norm (w = c^H / ||c||): an unnormalized conjugate
precoder would conflate beamforming gain with transmit power and make the
cross-CSI comparison meaningless; the direction is unchanged.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateChannelError, ShapeError

CSI_MODES = ("perfect", "aged", "predicted_kf", "predicted_dl")


def mae_report(pred, true) -> float:
    """Scalar l1: mean absolute error over all pixels of all samples."""
    p = np.asarray(pred)
    t = np.asarray(true)
    if p.shape != t.shape:
        raise ShapeError(f"pred shape {p.shape} != true shape {t.shape}")
    return float(np.mean(np.abs(p - t)))


def assemble_csi_vector(real_grids, imag_grids, scales_real, scales_imag,
                        t: int, f: int) -> np.ndarray:
    """Complex channel vector across ports at grid element (t, f).

    Per-port normalized component grids are de-normalized by their stored
    scales: c_p = real_p[t,f]*s_re_p + j * imag_p[t,f]*s_im_p.
    """
    real_grids = np.asarray(real_grids, dtype=np.float64)
    imag_grids = np.asarray(imag_grids, dtype=np.float64)
    if real_grids.shape != imag_grids.shape or real_grids.ndim != 3:
        raise DataError(
            f"need matching (ports, T, F) component stacks, got "
            f"{real_grids.shape} and {imag_grids.shape}"
        )
    s_re = np.asarray(scales_real, dtype=np.float64)
    s_im = np.asarray(scales_imag, dtype=np.float64)
    if s_re.shape != (real_grids.shape[0],) or s_im.shape != (imag_grids.shape[0],):
        raise DataError("one scale per port and component required")
    return real_grids[:, t, f] * s_re + 1j * imag_grids[:, t, f] * s_im


def mrt_precoder(c) -> np.ndarray:
    """Unit-norm maximum-ratio precoder w = c^H / ||c|| (column vector)."""
    c = np.asarray(c, dtype=complex).ravel()
    norm = np.linalg.norm(c)
    if norm == 0:
        raise DegenerateChannelError("zero channel vector cannot be precoded")
    return np.conj(c) / norm


def instantaneous_capacity(c_true, w, rho: float) -> float:
    """log2(1 + rho * |c_true . w|^2) for a unit-norm precoder."""
    if rho <= 0:
        raise ValueError("rho must be > 0")
    c = np.asarray(c_true, dtype=complex).ravel()
    wv = np.asarray(w, dtype=complex).ravel()
    if c.shape != wv.shape:
        raise ShapeError(f"channel {c.shape} and precoder {wv.shape} differ")
    if abs(np.linalg.norm(wv) - 1.0) > 1e-8:
        raise ValueError(f"precoder norm {np.linalg.norm(wv)} is not 1")
    gain = abs(np.dot(c, wv)) ** 2
    return math.log2(1.0 + rho * gain)


def capacity_samples(c_true: np.ndarray, c_csi: np.ndarray, rho: float) -> np.ndarray:
    """Vectorized per-element capacities; rows are (element, port) vectors.

    Elements whose CSI vector is exactly zero get the aligned-with-nothing
    capacity log2(1) = 0 rather than an error (an all-zero estimate cannot
    beamform).
    """
    c_true = np.asarray(c_true, dtype=complex)
    c_csi = np.asarray(c_csi, dtype=complex)
    if c_true.shape != c_csi.shape or c_true.ndim != 2:
        raise ShapeError(
            f"need matching (elements, ports) arrays, got {c_true.shape} "
            f"and {c_csi.shape}"
        )
    norms = np.linalg.norm(c_csi, axis=1)
    safe = norms > 0
    gain = np.zeros(c_true.shape[0])
    inner = np.einsum("ij,ij->i", c_true[safe], np.conj(c_csi[safe]))
    gain[safe] = (np.abs(inner) / norms[safe]) ** 2
    return np.log2(1.0 + rho * gain)


def outage_capacity(samples, epsilon: float) -> float:
    """Lower empirical epsilon-quantile: sorted[ceil(eps*n) - 1]."""
    arr = np.sort(np.asarray(samples, dtype=float).ravel())
    if arr.size == 0:
        raise ValueError("capacity sample set is empty")
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must lie in (0, 1)")
    idx = max(math.ceil(epsilon * arr.size) - 1, 0)
    return float(arr[idx])


@dataclass(frozen=True)
class CapacityReport:
    """Per-mode epsilon-outage capacities; percentages are derived on read."""

    capacities: dict[str, float]      # mode -> C_eps (bits/s/Hz)
    rho: float                        # linear SNR
    epsilon: float
    num_samples: int

    def __post_init__(self):
        if self.num_samples < 1.0 / self.epsilon:
            raise ValueError(
                f"{self.num_samples} samples cannot resolve the "
                f"epsilon={self.epsilon} quantile (need >= {1.0 / self.epsilon:.0f})"
            )
        if "perfect" not in self.capacities or "aged" not in self.capacities:
            raise ValueError("report needs at least 'perfect' and 'aged' modes")

    def loss_vs_perfect(self, mode: str) -> float:
        c_perfect = self.capacities["perfect"]
        if c_perfect == 0:
            return float("nan")
        return (c_perfect - self.capacities[mode]) / c_perfect

    def reduction_vs_aged(self, mode: str) -> float:
        c_perfect, c_aged = self.capacities["perfect"], self.capacities["aged"]
        gap = c_perfect - c_aged
        if gap == 0:
            return float("nan")
        return (self.capacities[mode] - c_aged) / gap

    def rows(self) -> list[dict]:
        out = []
        for mode, c_eps in self.capacities.items():
            out.append({
                "mode": mode,
                "epsilon": self.epsilon,
                "rho_db": 10.0 * math.log10(self.rho),
                "c_eps_bits": c_eps,
                "loss_pct": 100.0 * self.loss_vs_perfect(mode),
                "reduction_pct": 100.0 * self.reduction_vs_aged(mode),
                "n_samples": self.num_samples,
            })
        return out

    def to_csv(self, path) -> None:
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"rows": self.rows()}, fh, indent=2, sort_keys=True)
            fh.write("\n")


def compare_csi_modes(c_true: np.ndarray, csi_by_mode: dict[str, np.ndarray],
                      rho: float, epsilon: float) -> CapacityReport:
    """Pooled epsilon-outage capacity per CSI mode over shared (t,f) elements.

    ``c_true`` is (elements, ports); every mode's CSI array must cover the
    same element population.  The 'perfect' mode is implicit (CSI = truth)
    and may be omitted from the dict.
    """
    c_true = np.asarray(c_true, dtype=complex)
    capacities = {"perfect": outage_capacity(
        capacity_samples(c_true, c_true, rho), epsilon)}
    for mode, csi in csi_by_mode.items():
        csi = np.asarray(csi, dtype=complex)
        if csi.shape != c_true.shape:
            raise ValueError(
                f"mode {mode!r} covers {csi.shape} elements, truth covers "
                f"{c_true.shape}"
            )
        capacities[mode] = outage_capacity(capacity_samples(c_true, csi, rho), epsilon)
    return CapacityReport(capacities=capacities, rho=rho, epsilon=epsilon,
                          num_samples=c_true.shape[0])


def dump_capacity_cdf(samples, path) -> None:
    """Plot-ready (value, empirical CDF) CSV, ascending."""
    arr = np.sort(np.asarray(samples, dtype=float).ravel())
    n = arr.size
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "cdf"])
        for i, v in enumerate(arr):
            writer.writerow([repr(float(v)), repr((i + 1) / n)])
