"""Transmit beamforming: sector beampattern synthesis and the two-beam combiner.

The beamformer is the exact least-squares fit of the array response to a
flat-top sector pattern over the dictionary angle grid, solved through
the normal equations. Rank deficiency is a hard error by design: with
many more grid points than antennas it only happens on degenerate grids,
and silently regularizing would change the optimum everyone else tests
against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import arrays
from .config import ScenarioConfig
from .errors import DegenerateCombinationError, SingularSystemError

__all__ = [
    "BeamSpec", "Precoder", "IsacKnobs", "LsSolve",
    "desired_beampattern", "ls_solve", "ls_beamformer", "isac_combine",
    "build_sector_precoders",
]


@dataclass(frozen=True)
class BeamSpec:
    """Flat-top target pattern: gain K inside the interval, 0 outside."""

    interval: tuple[float, float]
    desired: np.ndarray  # length-Ntheta nonnegative reals


@dataclass(frozen=True)
class Precoder:
    weights: np.ndarray
    kind: str  # "sensing" | "communication" | "isac"


@dataclass(frozen=True)
class IsacKnobs:
    """Trade-off knobs: power share eta for sensing, combiner phase phi_c."""

    eta: float
    phi_c: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.eta <= 1.0):
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")


@dataclass(frozen=True)
class LsSolve:
    """LS beamformer plus the factorization reused by the gradient engine."""

    weights: np.ndarray       # raw LS solution, un-normalized
    cho_factor: tuple         # Cholesky of the Gram matrix
    residual: np.ndarray      # b - A^T f


def desired_beampattern(interval: tuple[float, float], grid: np.ndarray,
                        n_antennas: int) -> BeamSpec:
    lo, hi = interval
    if not (lo <= hi):
        raise ValueError(f"empty beam interval: [{lo}, {hi}]")
    inside = (grid >= lo) & (grid <= hi)
    return BeamSpec(interval=(float(lo), float(hi)),
                    desired=np.where(inside, float(n_antennas), 0.0))


def ls_solve(steering: np.ndarray, desired: np.ndarray) -> LsSolve:
    """Solve min_f ||desired - steering^T f||^2 through the normal equations."""
    a = np.asarray(steering)
    b = np.asarray(desired, dtype=float)
    k, n = a.shape
    if b.shape != (n,):
        raise ValueError(f"desired pattern must have shape ({n},), got {b.shape}")
    if n < k:
        raise SingularSystemError(
            f"steering matrix cannot have full row rank: {k} rows, {n} columns"
        )
    gram = np.conj(a) @ a.T
    rhs = np.conj(a) @ b
    try:
        cho = scipy.linalg.cho_factor(gram)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(f"Gram matrix is not positive definite: {exc}") from exc
    f = scipy.linalg.cho_solve(cho, rhs)
    if not np.all(np.isfinite(f)):
        raise SingularSystemError("LS solve produced non-finite weights")
    return LsSolve(weights=f, cho_factor=cho, residual=b - a.T @ f)


def ls_beamformer(steering: np.ndarray, desired: np.ndarray | BeamSpec,
                  kind: str = "sensing") -> Precoder:
    if isinstance(desired, BeamSpec):
        desired = desired.desired
    return Precoder(weights=ls_solve(steering, desired).weights, kind=kind)


def isac_combine(f_sensing: np.ndarray, f_comm: np.ndarray,
                 knobs: IsacKnobs) -> Precoder:
    """Unit-norm blend sqrt(eta) fr + sqrt(1-eta) e^{j phi_c} fc."""
    fr = np.asarray(f_sensing)
    fc = np.asarray(f_comm)
    if fr.shape != fc.shape:
        raise ValueError("beamformers must share a shape")
    combined = np.sqrt(knobs.eta) * fr + np.sqrt(1.0 - knobs.eta) * np.exp(1j * knobs.phi_c) * fc
    norm = np.linalg.norm(combined)
    if norm < 1e-14:
        raise DegenerateCombinationError(
            f"combined beamformer norm {norm:.3e} is numerically zero"
        )
    return Precoder(weights=combined / norm, kind="isac")


def build_sector_precoders(sensing_sector: tuple[float, float],
                           comm_sector: tuple[float, float],
                           spacings: np.ndarray,
                           cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Raw LS beamformers for the two sectors, sharing one dictionary."""
    grid = arrays.angle_grid(cfg)
    a = arrays.steering_matrix(grid, spacings, cfg)
    fr = ls_solve(a, desired_beampattern(sensing_sector, grid, cfg.n_antennas).desired)
    fc = ls_solve(a, desired_beampattern(comm_sector, grid, cfg.n_antennas).desired)
    return fr.weights, fc.weights
