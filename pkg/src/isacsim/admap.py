"""Angle-delay map, threshold test, and false-alarm calibration.

The map correlates the filtered observation against steering and delay
dictionaries; detection compares its peak against a threshold calibrated
on target-free episodes. Baseline estimation reads the argmax cell. All
argmax ties resolve to the lowest row-major linear index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import arrays, channel
from .config import ScenarioConfig
from .errors import CalibrationUnderpoweredError

__all__ = [
    "AngleDelayMap", "DetectionResult", "ThresholdCalibration", "SectorGrids",
    "angle_delay_map", "batch_map_values", "sector_grids", "maprt_detect",
    "h0_peaks", "calibrate_threshold",
]


@dataclass(frozen=True)
class AngleDelayMap:
    values: np.ndarray  # (n_angles, n_delays) nonnegative
    angles: np.ndarray  # radians
    delays: np.ndarray  # seconds

    @property
    def ranges(self) -> np.ndarray:
        return np.asarray(arrays.delay_to_range(self.delays))


@dataclass(frozen=True)
class DetectionResult:
    detected: bool
    peak: float
    angle: float | None = None
    range_m: float | None = None
    position: np.ndarray | None = None


@dataclass(frozen=True)
class ThresholdCalibration:
    target_pfa: float
    threshold: float
    n_samples: int
    empirical_pfa: float


@dataclass(frozen=True)
class SectorGrids:
    """Dictionary grids restricted to a target prior sector."""

    angle_indices: np.ndarray
    angles: np.ndarray
    delays: np.ndarray

    @property
    def ranges(self) -> np.ndarray:
        return np.asarray(arrays.delay_to_range(self.delays))


def sector_grids(cfg: ScenarioConfig, sector: tuple[float, float] | None = None) -> SectorGrids:
    """Restrict the global angle grid to the sector; the delay grid already
    spans exactly the range prior, so it is kept whole."""
    lo, hi = sector if sector is not None else cfg.target_angle_prior
    grid = arrays.angle_grid(cfg)
    idx = arrays.sector_indices(grid, lo, hi)
    return SectorGrids(angle_indices=idx, angles=grid[idx], delays=arrays.delay_grid(cfg))


def batch_map_values(filtered: np.ndarray, steering_dict: np.ndarray,
                     delay_dict: np.ndarray) -> np.ndarray:
    """|Phi^H Ytilde conj(Phi_d)| for a batch: (b, K, S) -> (b, n_angles, n_delays)."""
    filtered = np.asarray(filtered)
    squeeze = filtered.ndim == 2
    if squeeze:
        filtered = filtered[np.newaxis]
    if filtered.shape[1:] != (steering_dict.shape[0], delay_dict.shape[0]):
        raise ValueError(
            f"observation shape {filtered.shape[1:]} does not match dictionaries "
            f"({steering_dict.shape[0]}, {delay_dict.shape[0]})"
        )
    correlated = filtered @ np.conj(delay_dict)            # (b, K, n_delays)
    values = np.abs(np.conj(steering_dict.T) @ correlated)  # (b, n_angles, n_delays)
    return values[0] if squeeze else values


def angle_delay_map(filtered: np.ndarray, spacings: np.ndarray,
                    angles: np.ndarray, delays: np.ndarray,
                    cfg: ScenarioConfig) -> AngleDelayMap:
    """Map of one observation over explicit angle/delay grids."""
    phi = arrays.steering_matrix(angles, spacings, cfg)
    phi_d = arrays.delay_matrix(delays, cfg)
    values = batch_map_values(filtered, phi, phi_d)
    return AngleDelayMap(values=values, angles=np.atleast_1d(angles),
                         delays=np.atleast_1d(delays))


def sector_map(filtered: np.ndarray, spacings: np.ndarray, cfg: ScenarioConfig,
               sector: tuple[float, float] | None = None) -> AngleDelayMap:
    grids = sector_grids(cfg, sector)
    return angle_delay_map(filtered, spacings, grids.angles, grids.delays, cfg)


def maprt_detect(map_: AngleDelayMap, threshold: float) -> DetectionResult:
    """Peak-over-threshold detection with argmax angle/range readout."""
    if threshold < 0:
        raise ValueError(f"threshold must be non-negative, got {threshold}")
    flat = int(np.argmax(map_.values))
    i, j = np.unravel_index(flat, map_.values.shape)
    peak = float(map_.values[i, j])
    if peak <= threshold:
        return DetectionResult(detected=False, peak=peak)
    angle = float(map_.angles[i])
    range_m = float(arrays.delay_to_range(map_.delays[j]))
    return DetectionResult(detected=True, peak=peak, angle=angle, range_m=range_m,
                           position=arrays.position_from_polar(angle, range_m))


def h0_peaks(cfg: ScenarioConfig, spacings_dict: np.ndarray, f: np.ndarray,
             n_samples: int, purpose: str = "calibration",
             sector: tuple[float, float] | None = None,
             chunk: int = 2048) -> np.ndarray:
    """Map peaks of target-free episodes, in episode order.

    Under H0 the observation is filtered noise alone, so the peak law does
    not depend on the true impairment; the nominal array stands in for it.
    """
    grids = sector_grids(cfg, sector)
    phi = arrays.steering_matrix(grids.angles, spacings_dict, cfg)
    phi_d = arrays.delay_matrix(grids.delays, cfg)
    d_placeholder = arrays.nominal_spacings(cfg)
    peaks = np.empty(n_samples)
    for start in range(0, n_samples, chunk):
        ids = np.arange(start, min(start + chunk, n_samples))
        batch = channel.sample_episode_batch(cfg, d_placeholder, ids, purpose,
                                             sector=sector, force_present=False)
        filtered = channel.filtered_observations(batch, f, cfg)
        values = batch_map_values(filtered, phi, phi_d)
        peaks[ids] = values.reshape(len(ids), -1).max(axis=1)
    return peaks


def calibrate_threshold(target_pfa: float, n_samples: int, cfg: ScenarioConfig,
                        spacings_dict: np.ndarray, f: np.ndarray,
                        purpose: str = "calibration",
                        sector: tuple[float, float] | None = None) -> ThresholdCalibration:
    """Empirical (1 - target_pfa) peak quantile over target-free episodes."""
    if not (0 < target_pfa <= 1):
        raise ValueError(f"target_pfa must lie in (0, 1], got {target_pfa}")
    if target_pfa < 1 and n_samples < 100 / target_pfa:
        raise CalibrationUnderpoweredError(
            f"{n_samples} samples cannot place a {target_pfa:g} false-alarm "
            f"quantile; need at least {int(np.ceil(100 / target_pfa))}"
        )
    peaks = h0_peaks(cfg, spacings_dict, f, n_samples, purpose=purpose, sector=sector)
    if target_pfa >= 1:
        # Detection uses a strict comparison, so any positive peak clears 0.
        threshold = 0.0
    else:
        threshold = float(np.quantile(peaks, 1.0 - target_pfa))
    return ThresholdCalibration(
        target_pfa=target_pfa, threshold=threshold, n_samples=n_samples,
        empirical_pfa=float(np.mean(peaks > threshold)),
    )
