"""Random draws and forward simulation of the sensing and communication links.

One episode consumes its private substream in a fixed order (presence,
target geometry, reflection gain, UE angle, taps, messages, sensing
noise, comm noise), so forcing or ignoring individual draws never shifts
the remaining ones and batches are independent of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import arrays
from .config import ScenarioConfig
from .rng import spawn_rng

__all__ = [
    "GainProfile", "TargetDraw", "CommDraw", "SensingObservation", "CommObservation",
    "derive_gains", "sample_impairment", "constellation", "sample_priors",
    "simulate_sensing", "simulate_comm", "mle_decode",
    "EpisodeBatch", "sample_episode_batch", "filtered_observations", "comm_observations",
]


@dataclass(frozen=True)
class GainProfile:
    """Noise-relative power levels derived from the target SNRs."""

    sigma_r2: float            # reflection gain variance
    tap_variances: np.ndarray  # length-L, sums to S * N0 * linear comm SNR


@dataclass(frozen=True)
class TargetDraw:
    present: bool
    angle: float       # radians
    range_m: float
    delay: float       # seconds, 2 * range / c
    gain: complex


@dataclass(frozen=True)
class CommDraw:
    ue_angle: float
    taps: np.ndarray           # length-L complex
    freq_response: np.ndarray  # length-S complex, unitary DFT of padded taps
    symbols: np.ndarray        # length-S unit-modulus complex
    messages: np.ndarray       # length-S ints in [0, |M|)


@dataclass(frozen=True)
class SensingObservation:
    raw: np.ndarray       # K x S
    filtered: np.ndarray  # K x S, raw with column s divided by symbol s


@dataclass(frozen=True)
class CommObservation:
    received: np.ndarray  # length-S
    csi: np.ndarray       # length-S per-subcarrier complex gain


def derive_gains(cfg: ScenarioConfig) -> GainProfile:
    """Map (SNR targets, N0) to the reflection and tap power levels."""
    sigma_r2 = cfg.noise_power * 10.0 ** (cfg.sensing_snr_db / 10.0) / cfg.n_antennas
    weights = np.exp(-np.arange(cfg.n_taps, dtype=float))
    total = cfg.n_subcarriers * cfg.noise_power * 10.0 ** (cfg.comm_snr_db / 10.0)
    return GainProfile(sigma_r2=sigma_r2, tap_variances=weights / weights.sum() * total)


def sample_impairment(cfg: ScenarioConfig, rng: np.random.Generator | None = None,
                      complex_draw: bool = False) -> np.ndarray:
    """Draw the true spacing vector around lambda/2.

    Default: real Gaussian with resampling of non-positive entries, since
    spacings are physical lengths. `complex_draw=True` returns the literal
    complex-normal variant instead (not consumed by the simulator, whose
    steering model takes real spacings).
    """
    if rng is None:
        rng = spawn_rng(cfg.master_seed, "impairment")
    mean = cfg.nominal_spacing
    sigma = cfg.impairment_std
    if complex_draw:
        z = rng.standard_normal((cfg.n_antennas, 2))
        return mean + sigma / np.sqrt(2.0) * (z[:, 0] + 1j * z[:, 1])
    d = mean + sigma * rng.standard_normal(cfg.n_antennas)
    while np.any(d <= 0):
        bad = d <= 0
        d[bad] = mean + sigma * rng.standard_normal(int(bad.sum()))
    return d


_QPSK = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) / np.sqrt(2.0)


def constellation(size: int) -> np.ndarray:
    """Unit-energy symbol table. Size 4 is Gray-mapped QPSK (message 0 ->
    (1+j)/sqrt(2), one bit per quadrature axis); other sizes fall back to
    plain PSK."""
    if size == 4:
        return _QPSK.copy()
    if size < 2:
        raise ValueError(f"constellation size must be >= 2, got {size}")
    return np.exp(2j * np.pi * np.arange(size) / size)


def _complex_normal(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    """CN(0, variance): independent re/im parts, each variance/2."""
    z = rng.standard_normal((*shape, 2))
    return np.sqrt(variance / 2.0) * (z[..., 0] + 1j * z[..., 1])


def sample_priors(rng: np.random.Generator, cfg: ScenarioConfig,
                  sector: tuple[float, float] | None = None,
                  force_present: bool | None = None) -> tuple[TargetDraw, CommDraw]:
    """Draw one episode's latent variables.

    `sector` overrides the config's target angle prior (training draws
    random sectors). `force_present` overrides the Bernoulli presence
    draw without disturbing the rest of the stream.
    """
    lo, hi = sector if sector is not None else cfg.target_angle_prior
    gains = derive_gains(cfg)

    present = bool(rng.random() < 0.5)
    if force_present is not None:
        present = force_present
    theta = float(rng.uniform(lo, hi))
    range_m = float(rng.uniform(*cfg.target_range_prior))
    psi = complex(_complex_normal(rng, (), gains.sigma_r2))
    ue_angle = float(rng.uniform(*cfg.ue_angle_prior))
    taps = _complex_normal(rng, (cfg.n_taps,), 1.0) * np.sqrt(gains.tap_variances)
    messages = rng.integers(0, cfg.constellation_size, size=cfg.n_subcarriers)

    freq_response = np.fft.fft(taps, n=cfg.n_subcarriers, norm="ortho")
    symbols = constellation(cfg.constellation_size)[messages]
    target = TargetDraw(present=present, angle=theta, range_m=range_m,
                        delay=float(arrays.range_to_delay(range_m)), gain=psi)
    comm = CommDraw(ue_angle=ue_angle, taps=taps, freq_response=freq_response,
                    symbols=symbols, messages=messages)
    return target, comm


def _check_unit_precoder(f: np.ndarray, cfg: ScenarioConfig) -> np.ndarray:
    f = np.asarray(f)
    if f.shape != (cfg.n_antennas,):
        raise ValueError(f"precoder must have shape ({cfg.n_antennas},), got {f.shape}")
    if abs(np.linalg.norm(f) - 1.0) > 1e-12:
        raise ValueError("precoder must be unit-norm")
    return f


def simulate_sensing(target: TargetDraw, comm: CommDraw, f: np.ndarray,
                     d_true: np.ndarray, cfg: ScenarioConfig,
                     rng: np.random.Generator) -> SensingObservation:
    """Monostatic echo across the array and subcarriers, then reciprocal filtering."""
    f = _check_unit_precoder(f, cfg)
    noise = _complex_normal(rng, (cfg.n_antennas, cfg.n_subcarriers), cfg.noise_power)
    raw = noise
    if target.present:
        a = arrays.steering_perturbed(target.angle, d_true, cfg)
        rho = arrays.delay_response(target.delay, cfg)
        amp = target.gain / np.sqrt(cfg.n_subcarriers) * (a @ f)
        raw = amp * np.outer(a, comm.symbols * rho) + noise
    return SensingObservation(raw=raw, filtered=raw / comm.symbols[np.newaxis, :])


def simulate_comm(comm: CommDraw, f: np.ndarray, d_true: np.ndarray,
                  cfg: ScenarioConfig, rng: np.random.Generator) -> CommObservation:
    """Downlink observation at the UE plus the CSI its decoder is given."""
    f = _check_unit_precoder(f, cfg)
    a_ue = arrays.steering_perturbed(comm.ue_angle, d_true, cfg)
    csi = comm.freq_response * (f @ a_ue)
    noise = _complex_normal(rng, (cfg.n_subcarriers,), cfg.noise_power)
    return CommObservation(received=comm.symbols * csi + noise, csi=csi)


def mle_decode(received: np.ndarray, csi: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Per-subcarrier nearest symbol under the known gain; ties -> lowest index.

    Accepts (S,) vectors or (b, S) batches.
    """
    received = np.asarray(received)
    csi = np.asarray(csi)
    if received.shape != csi.shape:
        raise ValueError("received and CSI must share a shape")
    if not np.all(np.isfinite(csi)):
        raise ValueError("CSI must be finite")
    dist = np.abs(received[..., np.newaxis] - csi[..., np.newaxis] * table)
    return np.argmin(dist, axis=-1)


@dataclass
class EpisodeBatch:
    """Vectorized draws for a block of episodes (leading axis = episode)."""

    ids: np.ndarray             # global episode indices
    present: np.ndarray         # bool
    theta: np.ndarray
    range_m: np.ndarray
    tau: np.ndarray
    psi: np.ndarray             # complex reflection gains
    ue_angle: np.ndarray
    freq_response: np.ndarray   # (b, S)
    symbols: np.ndarray         # (b, S)
    messages: np.ndarray        # (b, S)
    noise_filtered: np.ndarray  # (b, K, S), sensing noise after symbol division
    comm_noise: np.ndarray      # (b, S)
    a_true: np.ndarray          # (b, K) steering at the true spacings
    rho: np.ndarray             # (b, S) delay responses

    def __len__(self) -> int:
        return len(self.ids)


def sample_episode_batch(cfg: ScenarioConfig, d_true: np.ndarray, episode_ids,
                         purpose: str, sector: tuple[float, float] | None = None,
                         force_present: bool | None = None) -> EpisodeBatch:
    """Draw a batch episode-by-episode from per-episode substreams.

    Identical to looping sample_priors + the simulators over the same ids,
    which is what keeps chunked/threaded runs equal to serial ones.
    """
    episode_ids = np.asarray(episode_ids, dtype=np.int64)
    b = len(episode_ids)
    k, s = cfg.n_antennas, cfg.n_subcarriers
    gains = derive_gains(cfg)
    lo, hi = sector if sector is not None else cfg.target_angle_prior
    table = constellation(cfg.constellation_size)

    present = np.empty(b, dtype=bool)
    theta = np.empty(b)
    range_m = np.empty(b)
    psi = np.empty(b, dtype=complex)
    ue_angle = np.empty(b)
    freq_response = np.empty((b, s), dtype=complex)
    messages = np.empty((b, s), dtype=np.int64)
    noise_raw = np.empty((b, k, s), dtype=complex)
    comm_noise = np.empty((b, s), dtype=complex)

    for row, episode in enumerate(episode_ids):
        rng = spawn_rng(cfg.master_seed, purpose, int(episode))
        t = bool(rng.random() < 0.5)
        present[row] = t if force_present is None else force_present
        theta[row] = rng.uniform(lo, hi)
        range_m[row] = rng.uniform(*cfg.target_range_prior)
        psi[row] = _complex_normal(rng, (), gains.sigma_r2)
        ue_angle[row] = rng.uniform(*cfg.ue_angle_prior)
        taps = _complex_normal(rng, (cfg.n_taps,), 1.0) * np.sqrt(gains.tap_variances)
        messages[row] = rng.integers(0, cfg.constellation_size, size=s)
        noise_raw[row] = _complex_normal(rng, (k, s), cfg.noise_power)
        comm_noise[row] = _complex_normal(rng, (s,), cfg.noise_power)
        freq_response[row] = np.fft.fft(taps, n=s, norm="ortho")

    symbols = table[messages]
    tau = np.asarray(arrays.range_to_delay(range_m))
    a_true = arrays.steering_matrix(theta, d_true, cfg).T        # (b, K)
    rho = arrays.delay_matrix(tau, cfg).T                        # (b, S)
    return EpisodeBatch(
        ids=episode_ids, present=present, theta=theta, range_m=range_m, tau=tau,
        psi=psi, ue_angle=ue_angle, freq_response=freq_response, symbols=symbols,
        messages=messages, noise_filtered=noise_raw / symbols[:, np.newaxis, :],
        comm_noise=comm_noise, a_true=a_true, rho=rho,
    )


def filtered_observations(batch: EpisodeBatch, f: np.ndarray, cfg: ScenarioConfig) -> np.ndarray:
    """Reciprocal-filtered sensing observations for the whole batch, (b, K, S)."""
    f = _check_unit_precoder(f, cfg)
    amp = batch.present * batch.psi / np.sqrt(cfg.n_subcarriers) * (batch.a_true @ f)
    signal = amp[:, np.newaxis, np.newaxis] * batch.a_true[:, :, np.newaxis] * batch.rho[:, np.newaxis, :]
    return signal + batch.noise_filtered


def comm_observations(batch: EpisodeBatch, f: np.ndarray, d_true: np.ndarray,
                      cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Batch downlink observations: (received (b, S), csi (b, S))."""
    f = _check_unit_precoder(f, cfg)
    a_ue = arrays.steering_matrix(batch.ue_angle, d_true, cfg)   # (K, b)
    csi = batch.freq_response * (f @ a_ue)[:, np.newaxis]
    return batch.symbols * csi + batch.comm_noise, csi
