"""Loss evaluation and exact adjoint gradients with respect to the spacings.

The training loss depends on the spacing estimate through two routes:
the receiver dictionary (spacings -> steering dictionary -> map ->
windowed softmax readout or map peak) and the transmitter (spacings ->
full-grid steering matrix -> LS beamformer -> transmitted signal). Both
routes are differentiated by hand-derived reverse-mode adjoints; a
central finite-difference oracle over the same forward pass serves as
the independent check and is never replaced by the analytic path.

Complex adjoints use the convention g_z = dL/dRe(z) + j dL/dIm(z), so
for every intermediate dL = Re(conj(g_z) . dz) and a matrix product
y = M x propagates g_x = M^H g_y.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from . import arrays, estimator, precoding
from .admap import sector_grids
from .channel import EpisodeBatch
from .config import ScenarioConfig
from .errors import InvalidBatchError, NumericalFailureError
from .estimator import ResolutionWindow, resolution_window, stable_softmax, window_slices

__all__ = [
    "PathFlags", "GradientReport", "training_precoder", "batch_loss",
    "batch_loss_and_gradient", "finite_difference_gradient",
]

LOSS_KINDS = ("sl", "ul")


class PathFlags(NamedTuple):
    """Which spacing dependencies the gradient flows through.

    The receiver dictionary is the primary learned quantity; the
    transmit-beam route is optional because at small scales its
    beam-gain term competes with dictionary alignment.
    """

    rx: bool = True
    tx: bool = False


@dataclass(frozen=True)
class GradientReport:
    grad: np.ndarray
    loss_value: float
    fd_check: float | None = None


def training_precoder(spacings: np.ndarray, cfg: ScenarioConfig,
                      sector: tuple[float, float]) -> np.ndarray:
    """Raw LS sensing beam toward the sector, built from the given spacings.

    Deliberately unnormalized: only the combined ISAC precoder carries a
    unit-power constraint. Squashing the raw solution would gut the
    in-sector gain exactly on the ill-conditioned spacing draws."""
    grid = arrays.angle_grid(cfg)
    a = arrays.steering_matrix(grid, spacings, cfg)
    beam = precoding.desired_beampattern(sector, grid, cfg.n_antennas)
    return precoding.ls_solve(a, beam.desired).weights


def _forward(d_rx: np.ndarray, d_tx: np.ndarray, batch: EpisodeBatch,
             cfg: ScenarioConfig, sector: tuple[float, float], loss_kind: str,
             window: ResolutionWindow | None, temperature: float) -> tuple[float, dict]:
    if loss_kind not in LOSS_KINDS:
        raise ValueError(f"loss_kind must be one of {LOSS_KINDS}, got {loss_kind!r}")
    if loss_kind == "sl" and not np.all(batch.present):
        raise InvalidBatchError("supervised batches must be presence-conditioned")
    if window is None:
        window = resolution_window(cfg)

    grid_full = arrays.angle_grid(cfg)
    a_full = arrays.steering_matrix(grid_full, d_tx, cfg)
    beam = precoding.desired_beampattern(sector, grid_full, cfg.n_antennas).desired
    solve = precoding.ls_solve(a_full, beam)
    f = solve.weights

    grids = sector_grids(cfg, sector)
    phi_m = arrays.steering_matrix(grids.angles, d_rx, cfg)   # (K, n_ang)
    phi_d = arrays.delay_matrix(grids.delays, cfg)            # (S, n_del)

    s_gain = batch.a_true @ f                                 # (b,)
    amp = batch.present * batch.psi / np.sqrt(cfg.n_subcarriers)
    y = (amp * s_gain)[:, None, None] * batch.a_true[:, :, None] * batch.rho[:, None, :] \
        + batch.noise_filtered                                # (b, K, S)
    t_corr = y @ np.conj(phi_d)                               # (b, K, n_del)
    z = np.matmul(np.conj(phi_m.T), t_corr)                   # (b, n_ang, n_del)
    mag = np.abs(z)

    b_size, n_ang, n_del = mag.shape
    cache = dict(
        grid_full=grid_full, a_full=a_full, solve=solve, f=f,
        grids=grids, phi_m=phi_m, phi_d=phi_d, amp=amp, t_corr=t_corr, z=z,
        mag=mag, window=window, temperature=temperature,
    )

    if loss_kind == "ul":
        peaks = mag.reshape(b_size, -1).max(axis=1)
        cache["argmax"] = mag.reshape(b_size, -1).argmax(axis=1)
        return float(np.mean(-peaks)), cache

    # Supervised: windowed softmax readout against the true positions.
    angs = grids.angles
    rngs = grids.ranges
    per_episode = []
    total = 0.0
    p_true = np.stack([batch.range_m * np.cos(batch.theta),
                       batch.range_m * np.sin(batch.theta)], axis=1)
    for e in range(b_size):
        flat = int(mag[e].argmax())
        i, j = np.unravel_index(flat, (n_ang, n_del))
        rows, cols = window_slices(int(i), int(j), (n_ang, n_del), window)
        patch = mag[e][np.ix_(rows, cols)]
        q = stable_softmax(patch, temperature)
        theta_hat = float(q.sum(axis=1) @ angs[rows])
        range_hat = float(q.sum(axis=0) @ rngs[cols])
        p_hat = np.array([range_hat * np.cos(theta_hat), range_hat * np.sin(theta_hat)])
        err = p_hat - p_true[e]
        total += float(err @ err)
        per_episode.append(dict(rows=rows, cols=cols, q=q, theta_hat=theta_hat,
                                range_hat=range_hat, err=err))
    cache["per_episode"] = per_episode
    return total / b_size, cache


def batch_loss(d_rx: np.ndarray, d_tx: np.ndarray, batch: EpisodeBatch,
               cfg: ScenarioConfig, sector: tuple[float, float], loss_kind: str,
               window: ResolutionWindow | None = None,
               temperature: float = 1.0) -> float:
    """Forward-only loss, with independently perturbable rx/tx spacings."""
    loss, _ = _forward(d_rx, d_tx, batch, cfg, sector, loss_kind, window, temperature)
    return loss


def batch_loss_and_gradient(spacings: np.ndarray, batch: EpisodeBatch,
                            cfg: ScenarioConfig, sector: tuple[float, float],
                            loss_kind: str, flags: PathFlags = PathFlags(),
                            window: ResolutionWindow | None = None,
                            temperature: float = 1.0) -> GradientReport:
    """Analytic d(batch loss)/d(spacings) through the flagged routes."""
    spacings = np.asarray(spacings, dtype=float)
    loss, cache = _forward(spacings, spacings, batch, cfg, sector, loss_kind,
                           window, temperature)
    mag, z = cache["mag"], cache["z"]
    b_size, n_ang, n_del = mag.shape

    g_mag = np.zeros_like(mag)
    if loss_kind == "ul":
        flat_rows = np.arange(b_size)
        g_flat = g_mag.reshape(b_size, -1)
        g_flat[flat_rows, cache["argmax"]] = -1.0 / b_size
    else:
        grids = cache["grids"]
        temperature_ = cache["temperature"]
        for e, info in enumerate(cache["per_episode"]):
            rows, cols, q = info["rows"], info["cols"], info["q"]
            th, rh = info["theta_hat"], info["range_hat"]
            g_p = 2.0 * info["err"] / b_size
            g_theta = rh * (-g_p[0] * np.sin(th) + g_p[1] * np.cos(th))
            g_range = g_p[0] * np.cos(th) + g_p[1] * np.sin(th)
            g_q = np.add.outer(g_theta * grids.angles[rows], g_range * grids.ranges[cols])
            # softmax adjoint: g_v = q * (g_q - <q, g_q>) / T
            g_v = q * (g_q - float((q * g_q).sum())) / temperature_
            g_mag[e][np.ix_(rows, cols)] += g_v

    # |z| adjoint: g_z = g_mag * z / |z|, zero where the magnitude vanishes.
    with np.errstate(invalid="ignore", divide="ignore"):
        g_z = np.where(mag > 0, g_mag / mag, 0.0) * z

    grad = np.zeros_like(spacings)
    phi_m, phi_d, t_corr = cache["phi_m"], cache["phi_d"], cache["t_corr"]

    if flags.rx:
        # z = phi_m^H (Y conj(phi_d)) => g_phi_m = T g_z^H summed over episodes.
        g_phi_m = np.einsum("bkj,bij->ki", t_corr, np.conj(g_z))
        slopes = arrays.phase_slopes(cache["grids"].angles, cfg)
        grad += np.sum(slopes * np.imag(np.conj(g_phi_m) * phi_m), axis=1)

    if flags.tx:
        # Through the beamformer: g flows z -> Y -> scalar beam gain s_e -> f
        # -> LS weights -> steering matrix. Only the rank-one signal term of
        # Y depends on f, so g_{s_e} needs rho_e^T g_Y^H a_e, assembled
        # without materializing g_Y.
        r1 = batch.rho @ np.conj(phi_d)                        # (b, n_del)
        v1 = np.einsum("ki,bk->bi", np.conj(phi_m), batch.a_true)
        w = np.einsum("bj,bij,bi->b", r1, np.conj(g_z), v1)
        g_s = np.conj(cache["amp"] * w)
        g_f = np.einsum("bk,b->k", np.conj(batch.a_true), g_s)

        solve, f = cache["solve"], cache["f"]
        # Hermitian-solve adjoint on the normal equations H f = conj(A) b:
        # u = H^{-1} g_f, g_A = conj(u) res^T - conj(f) (u^T A).
        u = scipy.linalg.cho_solve(solve.cho_factor, g_f)
        a_full = cache["a_full"]
        g_a = np.outer(np.conj(u), solve.residual) - np.outer(np.conj(f), u @ a_full)
        slopes_full = arrays.phase_slopes(cache["grid_full"], cfg)
        grad += np.sum(slopes_full * np.imag(np.conj(g_a) * a_full), axis=1)

    bad = np.flatnonzero(~np.isfinite(grad))
    if bad.size:
        raise NumericalFailureError(f"non-finite gradient entries at indices {bad.tolist()}")
    return GradientReport(grad=grad, loss_value=loss)


def finite_difference_gradient(spacings: np.ndarray, batch: EpisodeBatch,
                               cfg: ScenarioConfig, sector: tuple[float, float],
                               loss_kind: str, flags: PathFlags = PathFlags(),
                               window: ResolutionWindow | None = None,
                               temperature: float = 1.0,
                               step: float | None = None) -> np.ndarray:
    """Central differences of the same forward pass, perturbing only the
    flagged copies of the spacings."""
    spacings = np.asarray(spacings, dtype=float)
    if step is None:
        step = 1e-7 * cfg.wavelength
    grad = np.zeros_like(spacings)
    for k in range(len(spacings)):
        delta = np.zeros_like(spacings)
        delta[k] = step
        plus = spacings + delta
        minus = spacings - delta
        loss_p = batch_loss(plus if flags.rx else spacings, plus if flags.tx else spacings,
                            batch, cfg, sector, loss_kind, window, temperature)
        loss_m = batch_loss(minus if flags.rx else spacings, minus if flags.tx else spacings,
                            batch, cfg, sector, loss_kind, window, temperature)
        grad[k] = (loss_p - loss_m) / (2.0 * step)
    return grad
