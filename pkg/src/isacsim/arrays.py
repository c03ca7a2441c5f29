"""Array responses, delay responses, dictionary grids, and polar geometry.

The uniform linear array is centered on its phase reference: element k
sits at offset (k - (K-1)/2) spacings from the array center, so the
nominal response is conjugate-symmetric in the angle.
"""

from __future__ import annotations

import numpy as np

from .config import SPEED_OF_LIGHT, ScenarioConfig

__all__ = [
    "element_offsets", "nominal_spacings", "steering_nominal", "steering_perturbed",
    "steering_matrix", "phase_slopes", "delay_response", "delay_matrix",
    "angle_grid", "range_grid", "delay_grid", "range_to_delay", "delay_to_range",
    "position_from_polar", "polar_from_position", "sector_indices",
]


def element_offsets(n_antennas: int) -> np.ndarray:
    """Signed element indices k - (K-1)/2 for a centered array."""
    return np.arange(n_antennas, dtype=float) - (n_antennas - 1) / 2.0


def nominal_spacings(cfg: ScenarioConfig) -> np.ndarray:
    """The unperturbed spacing vector, lambda/2 in every entry."""
    return np.full(cfg.n_antennas, cfg.nominal_spacing)


def _check_angle(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("angle must be finite")
    if np.any(np.abs(theta) > np.pi / 2 + 1e-12):
        raise ValueError("angle must lie within [-pi/2, pi/2]")
    return theta


def steering_perturbed(theta, spacings: np.ndarray, cfg: ScenarioConfig) -> np.ndarray:
    """Array response with per-element spacings.

    Entry k is exp(-j 2*pi (k-(K-1)/2) d_k sin(theta) / lambda). Returns
    shape (K,) for scalar theta, (K, n) for a vector of angles.
    """
    theta = _check_angle(theta)
    spacings = np.asarray(spacings, dtype=float)
    if spacings.shape != (cfg.n_antennas,):
        raise ValueError(
            f"spacings must have shape ({cfg.n_antennas},), got {spacings.shape}"
        )
    offsets = element_offsets(cfg.n_antennas)
    # phase slope per element: (2 pi / lambda) * offset_k * d_k
    slope = (2 * np.pi / cfg.wavelength) * offsets * spacings
    phase = np.multiply.outer(slope, np.sin(theta))
    return np.exp(-1j * phase)


def steering_nominal(theta, cfg: ScenarioConfig) -> np.ndarray:
    """Array response of the ideal half-wavelength array."""
    return steering_perturbed(theta, nominal_spacings(cfg), cfg)


def steering_matrix(thetas: np.ndarray, spacings: np.ndarray, cfg: ScenarioConfig) -> np.ndarray:
    """K x n matrix whose columns are steering vectors on the given angles."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    return steering_perturbed(thetas, spacings, cfg)


def phase_slopes(thetas: np.ndarray, cfg: ScenarioConfig) -> np.ndarray:
    """Coefficients c[k, i] = (2 pi / lambda) (k-(K-1)/2) sin(theta_i).

    The response satisfies d/d(d_k) [Phi]_{k,i} = -j c[k,i] [Phi]_{k,i},
    which is the only place spacings enter the model; gradient code hangs
    off these slopes.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    offsets = element_offsets(cfg.n_antennas)
    return (2 * np.pi / cfg.wavelength) * np.multiply.outer(offsets, np.sin(thetas))


def delay_response(tau, cfg: ScenarioConfig) -> np.ndarray:
    """Per-subcarrier phase ramp exp(-j 2*pi s df tau), shape (S,) or (S, n)."""
    tau = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(tau)):
        raise ValueError("delay must be finite")
    if np.any(tau < 0):
        raise ValueError("delay must be non-negative")
    s = np.arange(cfg.n_subcarriers, dtype=float)
    phase = 2 * np.pi * cfg.subcarrier_spacing_hz * np.multiply.outer(s, tau)
    return np.exp(-1j * phase)


def delay_matrix(taus: np.ndarray, cfg: ScenarioConfig) -> np.ndarray:
    """S x n matrix of delay responses."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    return delay_response(taus, cfg)


def angle_grid(cfg: ScenarioConfig) -> np.ndarray:
    """Dictionary angle grid: uniform, endpoint-inclusive over [-pi/2, pi/2]."""
    return np.linspace(-np.pi / 2, np.pi / 2, cfg.n_angle_grid)


def range_grid(cfg: ScenarioConfig) -> np.ndarray:
    """Dictionary range grid: uniform, endpoint-inclusive over the range prior."""
    lo, hi = cfg.target_range_prior
    return np.linspace(lo, hi, cfg.n_range_grid)


def range_to_delay(range_m) -> np.ndarray | float:
    """Round-trip delay of a monostatic echo."""
    return 2.0 * np.asarray(range_m, dtype=float) / SPEED_OF_LIGHT


def delay_to_range(tau) -> np.ndarray | float:
    return np.asarray(tau, dtype=float) * SPEED_OF_LIGHT / 2.0


def delay_grid(cfg: ScenarioConfig) -> np.ndarray:
    """Dictionary delay grid paired 1:1 with the range grid."""
    return np.asarray(range_to_delay(range_grid(cfg)))


def position_from_polar(theta: float, range_m: float) -> np.ndarray:
    """Cartesian position [R cos(theta), R sin(theta)] in meters."""
    if range_m < 0:
        raise ValueError("range must be non-negative")
    return np.array([range_m * np.cos(theta), range_m * np.sin(theta)])


def polar_from_position(p: np.ndarray) -> tuple[float, float]:
    """Inverse of position_from_polar for R > 0, theta in (-pi/2, pi/2)."""
    p = np.asarray(p, dtype=float)
    r = float(np.hypot(p[0], p[1]))
    theta = float(np.arctan2(p[1], p[0]))
    return theta, r


def sector_indices(grid: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Indices of grid points falling inside [lo, hi] (inclusive)."""
    if lo > hi:
        raise ValueError(f"empty interval: [{lo}, {hi}]")
    idx = np.flatnonzero((grid >= lo) & (grid <= hi))
    if idx.size == 0:
        raise ValueError(f"no grid points inside [{lo}, {hi}]")
    return idx
