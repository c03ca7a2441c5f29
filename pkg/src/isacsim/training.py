"""Learning loops for the spacing estimate.

Each iteration draws a fresh random beam sector, points a sensing beam
built from the current spacing estimate at it, simulates a
presence-conditioned batch, and takes one Adam step on the phase's loss.
Semi-supervised training is a sequence of phases (supervised first by
default); supervised phases draw down a labeled-episode budget.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import arrays, channel, gradients
from .adam import AdamState, adam_step
from .config import ScenarioConfig, TrainPhase
from .errors import BudgetExhaustedError
from .estimator import ResolutionWindow
from .gradients import PathFlags
from .rng import spawn_rng

__all__ = [
    "TrainState", "train", "ssl_phases", "save_checkpoint", "load_checkpoint",
    "steering_mismatch",
]

TRAIN_SECTOR_MEAN_MAX = math.radians(60.0)
TRAIN_SECTOR_SPAN = (math.radians(10.0), math.radians(20.0))

CHECKPOINT_VERSION = 1


@dataclass
class TrainState:
    spacings: np.ndarray
    adam: AdamState
    step_count: int = 0
    phase_index: int = 0
    phase_iteration: int = 0
    episodes_used: int = 0
    labeled_remaining: int | None = None
    mode: str | None = None
    loss_history: list[float] = field(default_factory=list)

    @staticmethod
    def initial(cfg: ScenarioConfig, labeled_budget: int | None = None) -> "TrainState":
        return TrainState(
            spacings=arrays.nominal_spacings(cfg),
            adam=AdamState.initial(cfg.n_antennas),
            labeled_remaining=labeled_budget,
        )


def draw_training_sector(master_seed: int, iteration: int) -> tuple[float, float]:
    """Random beam sector for one iteration: center U(-60deg, 60deg), width
    U(10deg, 20deg)."""
    rng = spawn_rng(master_seed, "train-sector", iteration)
    mean = rng.uniform(-TRAIN_SECTOR_MEAN_MAX, TRAIN_SECTOR_MEAN_MAX)
    span = rng.uniform(*TRAIN_SECTOR_SPAN)
    return (mean - span / 2.0, mean + span / 2.0)


def train(cfg: ScenarioConfig, phases: tuple[TrainPhase, ...] | list[TrainPhase],
          d_true: np.ndarray, *, state: TrainState | None = None,
          labeled_budget: int | None = None, purpose: str = "train",
          flags: PathFlags = PathFlags(), window: ResolutionWindow | None = None,
          temperature: float = 1.0) -> TrainState:
    """Run the schedule (or resume `state` through its remaining phases)."""
    if state is None:
        state = TrainState.initial(cfg, labeled_budget)
    while state.phase_index < len(phases):
        phase = phases[state.phase_index]
        state.mode = phase.mode
        while state.phase_iteration < phase.iterations:
            lr = phase.lr
            if phase.lr_drop_at is not None and state.phase_iteration >= phase.lr_drop_at:
                lr = phase.lr * phase.lr_drop_factor
            if phase.mode == "sl" and state.labeled_remaining is not None:
                if phase.batch_size > state.labeled_remaining:
                    raise BudgetExhaustedError(
                        f"labeled budget exhausted: {state.labeled_remaining} left, "
                        f"batch needs {phase.batch_size}"
                    )
            sector = draw_training_sector(cfg.master_seed, state.step_count)
            ids = state.episodes_used + np.arange(phase.batch_size)
            batch = channel.sample_episode_batch(
                cfg, d_true, ids, f"{purpose}-episodes", sector=sector,
                force_present=True,
            )
            report = gradients.batch_loss_and_gradient(
                state.spacings, batch, cfg, sector, phase.mode, flags=flags,
                window=window, temperature=temperature,
            )
            state.spacings, state.adam = adam_step(state.spacings, report.grad,
                                                   state.adam, lr)
            state.loss_history.append(report.loss_value)
            state.episodes_used += phase.batch_size
            if phase.mode == "sl" and state.labeled_remaining is not None:
                state.labeled_remaining -= phase.batch_size
            state.step_count += 1
            state.phase_iteration += 1
        state.phase_index += 1
        state.phase_iteration = 0
    return state


def ssl_phases(total_iterations: int, batch_size: int, labeled_ratio: float,
               sl_lr: float, ul_lr: float, order: str = "sl-ul",
               sl_lr_drop_at: int | None = None,
               sl_lr_drop_factor: float = 0.1) -> tuple[tuple[TrainPhase, ...], int]:
    """Split a fixed iteration budget into SL and UL phases.

    Returns (phases, labeled budget); the budget equals exactly the
    episodes the SL phase will consume.
    """
    if not (0.0 <= labeled_ratio <= 1.0):
        raise ValueError(f"labeled_ratio must lie in [0, 1], got {labeled_ratio}")
    if order not in ("sl-ul", "ul-sl"):
        raise ValueError(f"order must be 'sl-ul' or 'ul-sl', got {order!r}")
    sl_iters = int(math.floor(labeled_ratio * total_iterations + 0.5))
    ul_iters = total_iterations - sl_iters
    phases = []
    if sl_iters > 0:
        phases.append(TrainPhase(mode="sl", iterations=sl_iters, batch_size=batch_size,
                                 lr=sl_lr, lr_drop_at=sl_lr_drop_at,
                                 lr_drop_factor=sl_lr_drop_factor))
    if ul_iters > 0:
        phases.append(TrainPhase(mode="ul", iterations=ul_iters, batch_size=batch_size,
                                 lr=ul_lr))
    if order == "ul-sl":
        phases.reverse()
    return tuple(phases), sl_iters * batch_size


def steering_mismatch(d_a: np.ndarray, d_b: np.ndarray, cfg: ScenarioConfig,
                      n_angles: int = 100) -> float:
    """Mean steering-vector distance between two spacing vectors over a
    uniform fan of angles."""
    thetas = np.linspace(-np.pi / 2, np.pi / 2, n_angles)
    va = arrays.steering_matrix(thetas, d_a, cfg)
    vb = arrays.steering_matrix(thetas, d_b, cfg)
    return float(np.mean(np.linalg.norm(va - vb, axis=0)))


def _hex_list(values) -> list[str]:
    return [float(x).hex() for x in np.asarray(values, dtype=float).ravel()]


def _from_hex(values) -> np.ndarray:
    return np.array([float.fromhex(x) for x in values])


def save_checkpoint(state: TrainState, path: str, config_digest: str) -> None:
    """Write the training state with bit-exact float round-tripping."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "config_hash": config_digest,
        "spacings": _hex_list(state.spacings),
        "adam_m": _hex_list(state.adam.m),
        "adam_v": _hex_list(state.adam.v),
        "adam_step": state.adam.step,
        "step_count": state.step_count,
        "phase_index": state.phase_index,
        "phase_iteration": state.phase_iteration,
        "episodes_used": state.episodes_used,
        "labeled_remaining": state.labeled_remaining,
        "mode": state.mode,
        "loss_history": _hex_list(state.loss_history),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path: str, expected_config_digest: str | None = None) -> TrainState:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {payload.get('version')}")
    if expected_config_digest is not None and payload["config_hash"] != expected_config_digest:
        raise ValueError("checkpoint was produced under a different configuration")
    return TrainState(
        spacings=_from_hex(payload["spacings"]),
        adam=AdamState(m=_from_hex(payload["adam_m"]), v=_from_hex(payload["adam_v"]),
                       step=int(payload["adam_step"])),
        step_count=int(payload["step_count"]),
        phase_index=int(payload["phase_index"]),
        phase_iteration=int(payload["phase_iteration"]),
        episodes_used=int(payload["episodes_used"]),
        labeled_remaining=payload["labeled_remaining"],
        mode=payload["mode"],
        loss_history=[float.fromhex(x) for x in payload["loss_history"]],
    )
