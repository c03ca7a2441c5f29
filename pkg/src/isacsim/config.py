"""Scenario and experiment configuration.

A scenario fixes the physical layer: array size, OFDM numerology, SNRs,
priors on the target/UE geometry, dictionary grid sizes, and the master
seed. An experiment wraps a scenario with a method choice, a training
schedule, evaluation settings, and sweep grids.

Experiment files are flat dotted-key text: one `key = value` pair per
line, values parsed as JSON with a plain-string fallback. `#` starts a
comment.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

SPEED_OF_LIGHT = 299_792_458.0  # m/s

METHODS = ("baseline-nominal", "baseline-genie", "mbml")


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical-layer parameters for one monostatic OFDM sensing scenario."""

    n_antennas: int = 64                     # K, transmit = receive array
    n_subcarriers: int = 256                 # S
    subcarrier_spacing_hz: float = 120e3     # delta-f
    carrier_freq_hz: float = 60e9            # fc
    constellation_size: int = 4              # |M|, QPSK
    n_taps: int = 5                          # L, comm channel taps
    sensing_snr_db: float = 15.0
    comm_snr_db: float = 20.0
    noise_power: float = 1.0                 # N0, fixed scale reference
    target_angle_prior: tuple[float, float] = (math.radians(-40.0), math.radians(-20.0))
    target_range_prior: tuple[float, float] = (0.0, 200.0)   # meters
    ue_angle_prior: tuple[float, float] = (math.radians(30.0), math.radians(50.0))
    n_angle_grid: int = 720                  # dictionary grid over [-pi/2, pi/2]
    n_range_grid: int = 200                  # dictionary grid over the range prior
    impairment_std_m: float | None = None    # sigma of spacing perturbations; None -> lambda/25
    master_seed: int = 0

    def __post_init__(self):
        if self.n_antennas < 2:
            raise ValueError(f"n_antennas must be >= 2, got {self.n_antennas}")
        if self.n_subcarriers < 2:
            raise ValueError(f"n_subcarriers must be >= 2, got {self.n_subcarriers}")
        if self.n_angle_grid < self.n_antennas:
            raise ValueError(
                f"n_angle_grid ({self.n_angle_grid}) must be >= n_antennas ({self.n_antennas})"
            )
        if self.n_range_grid < 2:
            raise ValueError(f"n_range_grid must be >= 2, got {self.n_range_grid}")
        if self.n_taps > self.n_subcarriers:
            raise ValueError(
                f"n_taps ({self.n_taps}) must be <= n_subcarriers ({self.n_subcarriers})"
            )
        if self.n_taps < 1:
            raise ValueError(f"n_taps must be >= 1, got {self.n_taps}")
        if self.constellation_size < 2:
            raise ValueError(f"constellation_size must be >= 2, got {self.constellation_size}")
        if not (self.subcarrier_spacing_hz > 0 and self.carrier_freq_hz > 0):
            raise ValueError("subcarrier_spacing_hz and carrier_freq_hz must be positive")
        if self.noise_power <= 0:
            raise ValueError(f"noise_power must be positive, got {self.noise_power}")
        lo, hi = self.target_angle_prior
        if not (-math.pi / 2 <= lo < hi <= math.pi / 2):
            raise ValueError(f"target_angle_prior must be increasing within [-pi/2, pi/2]: {self.target_angle_prior}")
        rlo, rhi = self.target_range_prior
        if not (0 <= rlo < rhi):
            raise ValueError(f"target_range_prior must satisfy 0 <= Rmin < Rmax: {self.target_range_prior}")
        ulo, uhi = self.ue_angle_prior
        if not (-math.pi / 2 <= ulo < uhi <= math.pi / 2):
            raise ValueError(f"ue_angle_prior must be increasing within [-pi/2, pi/2]: {self.ue_angle_prior}")
        if self.impairment_std_m is not None and self.impairment_std_m < 0:
            raise ValueError("impairment_std_m must be non-negative")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")

    @property
    def wavelength(self) -> float:
        """Carrier wavelength in meters."""
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def nominal_spacing(self) -> float:
        """Half-wavelength element spacing in meters."""
        return self.wavelength / 2.0

    @property
    def impairment_std(self) -> float:
        """Spacing perturbation sigma in meters (default lambda/25)."""
        if self.impairment_std_m is not None:
            return self.impairment_std_m
        return self.wavelength / 25.0

    def replace(self, **kwargs) -> "ScenarioConfig":
        return dataclasses.replace(self, **kwargs)


def desk_scale(**overrides) -> ScenarioConfig:
    """Small configuration sized for tests and laptop-scale experiments."""
    base = dict(
        n_antennas=16,
        n_subcarriers=32,
        n_angle_grid=180,
        n_range_grid=64,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def full_scale(**overrides) -> ScenarioConfig:
    """Full-size configuration (heavy; not exercised by the test suite)."""
    return ScenarioConfig(**overrides)


@dataclass(frozen=True)
class TrainPhase:
    """One sequential phase of the learning schedule."""

    mode: str                      # "sl" or "ul"
    iterations: int
    batch_size: int
    lr: float
    lr_drop_at: int | None = None  # iteration index within the phase
    lr_drop_factor: float = 0.1

    def __post_init__(self):
        if self.mode not in ("sl", "ul"):
            raise ValueError(f"phase mode must be 'sl' or 'ul', got {self.mode!r}")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.lr_drop_at is not None and self.lr_drop_at < 0:
            raise ValueError("lr_drop_at must be non-negative")


@dataclass(frozen=True)
class EvalSettings:
    n_episodes: int = 2000
    target_pfa: float = 1e-2
    n_calibration: int = 10000

    def __post_init__(self):
        if not (0 < self.target_pfa <= 1):
            raise ValueError(f"target_pfa must be in (0, 1], got {self.target_pfa}")
        if self.n_episodes < 1 or self.n_calibration < 1:
            raise ValueError("episode counts must be positive")


@dataclass(frozen=True)
class SweepSettings:
    eta_points: int = 8
    phic_points: int = 8
    phic_max: float = 14 * math.pi / 8

    def __post_init__(self):
        if self.eta_points < 2 or self.phic_points < 1:
            raise ValueError("sweep grids need at least 2 eta and 1 phase point")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    method: str = "baseline-nominal"
    train_phases: tuple[TrainPhase, ...] = ()
    labeled_budget: int | None = None        # max labeled episodes across SL phases
    train_temperature: float = 1.0           # softmax temperature during training
    evaluation: EvalSettings = field(default_factory=EvalSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    ratio_values: tuple[float, ...] = (0.01, 0.1, 0.5, 1.0)
    out_dir: str = "."

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.train_temperature <= 0:
            raise ValueError(f"train_temperature must be positive, got {self.train_temperature}")
        for r in self.ratio_values:
            if not (0 <= r <= 1):
                raise ValueError(f"labeled ratios must lie in [0, 1], got {r}")

    def replace(self, **kwargs) -> "ExperimentConfig":
        return dataclasses.replace(self, **kwargs)


# Keys accepted in experiment files, in canonical echo order.
_SCENARIO_KEYS = (
    "n_antennas", "n_subcarriers", "subcarrier_spacing_hz", "carrier_freq_hz",
    "constellation_size", "n_taps", "sensing_snr_db", "comm_snr_db", "noise_power",
    "n_angle_grid", "n_range_grid", "master_seed",
)


def _angles_deg(pair) -> tuple[float, float]:
    lo, hi = pair
    return (math.radians(float(lo)), math.radians(float(hi)))


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse dotted-key experiment text into an ExperimentConfig."""
    entries: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        try:
            entries[key] = json.loads(value)
        except json.JSONDecodeError:
            entries[key] = value

    scen_kwargs: dict[str, object] = {}
    for name in _SCENARIO_KEYS:
        if f"scenario.{name}" in entries:
            scen_kwargs[name] = entries.pop(f"scenario.{name}")
    if "scenario.target_angle_deg" in entries:
        scen_kwargs["target_angle_prior"] = _angles_deg(entries.pop("scenario.target_angle_deg"))
    if "scenario.target_range_m" in entries:
        lo, hi = entries.pop("scenario.target_range_m")
        scen_kwargs["target_range_prior"] = (float(lo), float(hi))
    if "scenario.ue_angle_deg" in entries:
        scen_kwargs["ue_angle_prior"] = _angles_deg(entries.pop("scenario.ue_angle_deg"))
    if "scenario.impairment_std_m" in entries:
        scen_kwargs["impairment_std_m"] = float(entries.pop("scenario.impairment_std_m"))
    if "scenario.impairment_std_wavelengths" in entries:
        frac = float(entries.pop("scenario.impairment_std_wavelengths"))
        fc = float(scen_kwargs.get("carrier_freq_hz", ScenarioConfig.carrier_freq_hz))
        scen_kwargs["impairment_std_m"] = frac * SPEED_OF_LIGHT / fc
    try:
        scenario = ScenarioConfig(**scen_kwargs)  # type: ignore[arg-type]
    except TypeError as exc:
        raise ValueError(f"bad scenario settings: {exc}") from exc

    phases = []
    for phase_dict in entries.pop("train.phases", []):
        if not isinstance(phase_dict, dict):
            raise ValueError(f"train.phases entries must be objects, got {phase_dict!r}")
        allowed = {f.name for f in dataclasses.fields(TrainPhase)}
        unknown = set(phase_dict) - allowed
        if unknown:
            raise ValueError(f"unknown train phase keys: {sorted(unknown)}")
        phases.append(TrainPhase(**phase_dict))

    eval_kwargs = {}
    for name in ("n_episodes", "target_pfa", "n_calibration"):
        if f"eval.{name}" in entries:
            eval_kwargs[name] = entries.pop(f"eval.{name}")
    sweep_kwargs = {}
    for name in ("eta_points", "phic_points", "phic_max"):
        if f"sweep.{name}" in entries:
            sweep_kwargs[name] = entries.pop(f"sweep.{name}")

    exp_kwargs: dict[str, object] = dict(
        scenario=scenario,
        train_phases=tuple(phases),
        evaluation=EvalSettings(**eval_kwargs),
        sweep=SweepSettings(**sweep_kwargs),
    )
    if "method" in entries:
        exp_kwargs["method"] = entries.pop("method")
    if "train.labeled_budget" in entries:
        budget = entries.pop("train.labeled_budget")
        exp_kwargs["labeled_budget"] = None if budget in (None, "none") else int(budget)  # type: ignore[arg-type]
    if "train.temperature" in entries:
        exp_kwargs["train_temperature"] = float(entries.pop("train.temperature"))  # type: ignore[arg-type]
    if "ratio.values" in entries:
        exp_kwargs["ratio_values"] = tuple(float(r) for r in entries.pop("ratio.values"))
    if "out.dir" in entries:
        exp_kwargs["out_dir"] = str(entries.pop("out.dir"))

    if entries:
        raise ValueError(f"unknown config keys: {sorted(entries)}")
    return ExperimentConfig(**exp_kwargs)  # type: ignore[arg-type]


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def config_echo(exp: ExperimentConfig) -> dict:
    """JSON-serializable snapshot of every setting, for manifests and hashing."""
    return {
        "scenario": dataclasses.asdict(exp.scenario),
        "method": exp.method,
        "train_phases": [dataclasses.asdict(p) for p in exp.train_phases],
        "labeled_budget": exp.labeled_budget,
        "train_temperature": exp.train_temperature,
        "evaluation": dataclasses.asdict(exp.evaluation),
        "sweep": dataclasses.asdict(exp.sweep),
        "ratio_values": list(exp.ratio_values),
        "out_dir": exp.out_dir,
    }


def config_hash(exp: ExperimentConfig) -> str:
    """Stable hex digest of the full configuration."""
    blob = json.dumps(config_echo(exp), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
