"""Differentiable readout of the angle-delay map.

Instead of reporting the argmax cell, the estimator softmaxes a small
window around it (roughly one classical resolution cell) and returns
probability-weighted angle/range averages. The window location comes
from the argmax and is treated as fixed; everything after it is smooth
in the dictionary spacings, which is what training differentiates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import arrays
from .admap import AngleDelayMap
from .config import SPEED_OF_LIGHT, ScenarioConfig
from .errors import InvalidBatchError

__all__ = [
    "ResolutionWindow", "SoftEstimate", "resolution_window", "window_slices",
    "stable_softmax", "soft_estimate", "loss_supervised", "loss_unsupervised",
]


@dataclass(frozen=True)
class ResolutionWindow:
    d_theta: int  # half-width in angle cells
    d_range: int  # half-width in range cells


@dataclass(frozen=True)
class SoftEstimate:
    detected: bool
    peak: float
    rows: np.ndarray | None = None           # window row indices kept
    cols: np.ndarray | None = None           # window column indices kept
    probabilities: np.ndarray | None = None  # window-shaped, sums to 1
    angle: float | None = None
    range_m: float | None = None
    position: np.ndarray | None = None


def resolution_window(cfg: ScenarioConfig, sector: tuple[float, float] | None = None,
                      use_sector_spans: bool = False) -> ResolutionWindow:
    """Window half-widths from the classical resolutions 2/K rad and c/(2 S df).

    Cell counts are measured against the dictionary grid spans (pi and the
    range prior width). `use_sector_spans` switches the angle denominator
    to the sector width instead, kept for comparison experiments.
    """
    angle_span = np.pi
    lo, hi = cfg.target_range_prior
    range_span = hi - lo
    if use_sector_spans:
        slo, shi = sector if sector is not None else cfg.target_angle_prior
        angle_span = shi - slo
    if angle_span <= 0 or range_span <= 0:
        raise ValueError("grid spans must be positive")
    angle_res = 2.0 / cfg.n_antennas
    range_res = SPEED_OF_LIGHT / (2.0 * cfg.n_subcarriers * cfg.subcarrier_spacing_hz)
    return ResolutionWindow(
        d_theta=int(np.floor(angle_res * cfg.n_angle_grid / angle_span)),
        d_range=int(np.floor(range_res * cfg.n_range_grid / range_span)),
    )


def window_slices(i: int, j: int, shape: tuple[int, int],
                  window: ResolutionWindow) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays for the window around (i, j); out-of-range rows/columns
    are dropped, not clamped."""
    rows = np.arange(i - window.d_theta, i + window.d_theta + 1)
    cols = np.arange(j - window.d_range, j + window.d_range + 1)
    return rows[(rows >= 0) & (rows < shape[0])], cols[(cols >= 0) & (cols < shape[1])]


def stable_softmax(values: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Softmax over all entries, shift-invariant to avoid overflow."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = (values - values.max()) / temperature
    e = np.exp(z)
    return e / e.sum()


def soft_estimate(map_: AngleDelayMap, threshold: float | None,
                  window: ResolutionWindow, temperature: float = 1.0,
                  hard: bool = False) -> SoftEstimate:
    """Windowed softmax estimate from a sector map.

    `threshold=None` bypasses detection (training mode); `hard=True`
    replaces the softmax with a one-hot at the argmax, which reproduces
    the baseline readout exactly.
    """
    if threshold is not None and threshold < 0:
        raise ValueError(f"threshold must be non-negative, got {threshold}")
    values = map_.values
    flat = int(np.argmax(values))
    i, j = np.unravel_index(flat, values.shape)
    peak = float(values[i, j])
    if threshold is not None and peak <= threshold:
        return SoftEstimate(detected=False, peak=peak)

    rows, cols = window_slices(int(i), int(j), values.shape, window)
    patch = values[np.ix_(rows, cols)]
    if hard:
        probs = np.zeros_like(patch)
        probs[int(np.flatnonzero(rows == i)[0]), int(np.flatnonzero(cols == j)[0])] = 1.0
    else:
        probs = stable_softmax(patch, temperature)
    angle = float(probs.sum(axis=1) @ map_.angles[rows])
    range_m = float(probs.sum(axis=0) @ map_.ranges[cols])
    return SoftEstimate(
        detected=True, peak=peak, rows=rows, cols=cols, probabilities=probs,
        angle=angle, range_m=range_m,
        position=arrays.position_from_polar(angle, range_m),
    )


def loss_supervised(estimates, true_positions) -> float:
    """Mean squared position error over a presence-conditioned batch."""
    if len(estimates) == 0:
        raise InvalidBatchError("supervised loss needs a non-empty batch")
    if len(estimates) != len(true_positions):
        raise InvalidBatchError("estimates and truths differ in length")
    total = 0.0
    for est, p in zip(estimates, true_positions):
        if p is None:
            raise InvalidBatchError("supervised batches must contain only present targets")
        if not est.detected or est.position is None:
            raise InvalidBatchError("supervised batches require an estimate per episode")
        diff = est.position - np.asarray(p, dtype=float)
        total += float(diff @ diff)
    return total / len(estimates)


def loss_unsupervised(maps) -> float:
    """Negative map peak, averaged over the batch."""
    if isinstance(maps, AngleDelayMap):
        maps = [maps]
    if len(maps) == 0:
        raise InvalidBatchError("unsupervised loss needs a non-empty batch")
    return float(np.mean([-float(np.max(m.values)) for m in maps]))
