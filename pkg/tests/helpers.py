"""Builders and bounds shared across test modules."""

import numpy as np

from isacsim import arrays


def rank_one_filtered(theta, range_m, d_true, f, cfg, gain=1.0):
    """Filtered observation of a noise-free present target."""
    a = arrays.steering_perturbed(theta, d_true, cfg)
    rho = arrays.delay_response(arrays.range_to_delay(range_m), cfg)
    amp = gain / np.sqrt(cfg.n_subcarriers) * (a @ f)
    return amp * np.outer(a, rho)


def unit_precoder(cfg, seed=0):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(cfg.n_antennas) + 1j * rng.standard_normal(cfg.n_antennas)
    return f / np.linalg.norm(f)


def angle_cell(cfg):
    return np.pi / (cfg.n_angle_grid - 1)


def range_cell(cfg):
    lo, hi = cfg.target_range_prior
    return (hi - lo) / (cfg.n_range_grid - 1)


def cell_diagonal(cfg):
    """Worst-case position shift from moving one grid cell at max range."""
    hi = cfg.target_range_prior[1]
    return float(np.hypot(hi * angle_cell(cfg), range_cell(cfg)))


def binomial_se(p, n):
    p = min(max(p, 1.0 / max(n, 1)), 1.0 - 1.0 / max(n, 1))
    return float(np.sqrt(p * (1.0 - p) / n))
