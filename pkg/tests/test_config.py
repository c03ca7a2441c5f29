import math

import pytest

from isacsim.config import (SPEED_OF_LIGHT, EvalSettings, ExperimentConfig,
                            ScenarioConfig, SweepSettings, TrainPhase,
                            config_echo, config_hash, desk_scale,
                            parse_config_text)


def test_scenario_defaults_match_the_reference_system():
    cfg = ScenarioConfig()
    assert cfg.n_antennas == 64
    assert cfg.n_subcarriers == 256
    assert cfg.subcarrier_spacing_hz == 120e3
    assert cfg.carrier_freq_hz == 60e9
    assert cfg.constellation_size == 4
    assert cfg.n_taps == 5
    assert cfg.sensing_snr_db == 15.0
    assert cfg.comm_snr_db == 20.0
    assert cfg.noise_power == 1.0
    assert cfg.target_angle_prior == pytest.approx((math.radians(-40), math.radians(-20)))
    assert cfg.target_range_prior == (0.0, 200.0)
    assert cfg.ue_angle_prior == pytest.approx((math.radians(30), math.radians(50)))
    assert cfg.n_angle_grid == 720
    assert cfg.n_range_grid == 200
    assert cfg.wavelength == pytest.approx(SPEED_OF_LIGHT / 60e9)
    assert cfg.nominal_spacing == pytest.approx(cfg.wavelength / 2)
    # Unset impairment level defaults to lambda / 25.
    assert cfg.impairment_std == pytest.approx(cfg.wavelength / 25)


def test_desk_scale_shrinks_the_grids_only():
    cfg = desk_scale(master_seed=9)
    assert (cfg.n_antennas, cfg.n_subcarriers) == (16, 32)
    assert (cfg.n_angle_grid, cfg.n_range_grid) == (180, 64)
    assert cfg.master_seed == 9
    assert cfg.carrier_freq_hz == 60e9


@pytest.mark.parametrize("kwargs", [
    dict(n_antennas=1),
    dict(n_subcarriers=1),
    dict(constellation_size=1),
    dict(n_taps=0),
    dict(noise_power=0.0),
    dict(target_angle_prior=(0.5, 0.1)),
    dict(target_range_prior=(-1.0, 200.0)),
    dict(ue_angle_prior=(2.0, 3.0)),
    dict(impairment_std_m=-1e-3),
    dict(master_seed=-1),
    dict(n_angle_grid=1),
])
def test_scenario_validation_rejects(kwargs):
    with pytest.raises(ValueError):
        ScenarioConfig(**kwargs)


def test_replace_returns_an_updated_copy():
    cfg = ScenarioConfig()
    other = cfg.replace(n_antennas=8)
    assert other.n_antennas == 8
    assert cfg.n_antennas == 64


def test_train_phase_validation():
    TrainPhase(mode="sl", iterations=10, batch_size=4, lr=1e-4)
    with pytest.raises(ValueError):
        TrainPhase(mode="rl", iterations=10, batch_size=4, lr=1e-4)
    with pytest.raises(ValueError):
        TrainPhase(mode="sl", iterations=10, batch_size=0, lr=1e-4)
    with pytest.raises(ValueError):
        TrainPhase(mode="sl", iterations=10, batch_size=4, lr=0.0)


def test_experiment_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(method="oracle")
    with pytest.raises(ValueError):
        ExperimentConfig(train_temperature=0.0)
    with pytest.raises(ValueError):
        ExperimentConfig(ratio_values=(0.5, 1.5))
    with pytest.raises(ValueError):
        EvalSettings(target_pfa=0.0)
    with pytest.raises(ValueError):
        SweepSettings(eta_points=1)


def test_parse_config_text_round_trip():
    text = """
    # experiment file
    scenario.n_antennas = 16
    scenario.n_subcarriers = 32   # desk scale
    scenario.master_seed = 5
    scenario.target_angle_deg = [-40, -20]
    scenario.ue_angle_deg = [38, 42]
    scenario.target_range_m = [0, 200]
    scenario.impairment_std_wavelengths = 0.04
    method = baseline-genie
    train.phases = [{"mode": "sl", "iterations": 10, "batch_size": 4, "lr": 1e-5}]
    train.labeled_budget = 40
    train.temperature = 50
    eval.n_episodes = 256
    eval.target_pfa = 0.01
    eval.n_calibration = 10000
    sweep.eta_points = 4
    sweep.phic_points = 2
    ratio.values = [0.1, 1.0]
    out.dir = /tmp/runs
    """
    exp = parse_config_text(text)
    assert exp.scenario.n_antennas == 16
    assert exp.scenario.master_seed == 5
    assert exp.scenario.target_angle_prior == pytest.approx(
        (math.radians(-40), math.radians(-20)))
    assert exp.scenario.ue_angle_prior == pytest.approx(
        (math.radians(38), math.radians(42)))
    assert exp.scenario.impairment_std == pytest.approx(
        0.04 * SPEED_OF_LIGHT / 60e9)
    assert exp.method == "baseline-genie"
    assert exp.train_phases == (TrainPhase(mode="sl", iterations=10,
                                           batch_size=4, lr=1e-5),)
    assert exp.labeled_budget == 40
    assert exp.train_temperature == 50.0
    assert exp.evaluation == EvalSettings(n_episodes=256, target_pfa=0.01,
                                          n_calibration=10000)
    assert (exp.sweep.eta_points, exp.sweep.phic_points) == (4, 2)
    assert exp.ratio_values == (0.1, 1.0)
    assert exp.out_dir == "/tmp/runs"


def test_parse_rejects_unknown_keys_and_bad_lines():
    with pytest.raises(ValueError, match="unknown config keys"):
        parse_config_text("scenario.n_antenas = 16")
    with pytest.raises(ValueError, match="expected 'key = value'"):
        parse_config_text("just words")
    with pytest.raises(ValueError, match="unknown train phase keys"):
        parse_config_text('train.phases = [{"mode": "sl", "steps": 3}]')
    with pytest.raises(ValueError):
        parse_config_text("method = oracle")


def test_config_echo_and_hash_are_stable():
    exp = ExperimentConfig(scenario=desk_scale(master_seed=3))
    echo = config_echo(exp)
    assert echo["scenario"]["master_seed"] == 3
    assert "train_temperature" in echo
    assert config_hash(exp) == config_hash(exp)
    bumped = exp.replace(scenario=exp.scenario.replace(master_seed=4))
    assert config_hash(exp) != config_hash(bumped)
