import numpy as np
import pytest

from isacsim import admap, arrays, channel
from isacsim.config import desk_scale
from isacsim.errors import CalibrationUnderpoweredError

from helpers import angle_cell, range_cell, rank_one_filtered, unit_precoder


def test_zero_observation_gives_a_zero_map(tiny_cfg):
    d = arrays.nominal_spacings(tiny_cfg)
    grids = admap.sector_grids(tiny_cfg)
    m = admap.angle_delay_map(np.zeros((8, 16), dtype=complex), d,
                              grids.angles, grids.delays, tiny_cfg)
    assert np.all(m.values == 0.0)
    assert m.values.shape == (len(grids.angles), len(grids.delays))


def test_map_is_invariant_to_a_global_symbol_phase(tiny_cfg):
    d = arrays.nominal_spacings(tiny_cfg)
    rng = np.random.default_rng(0)
    obs = rng.standard_normal((8, 16)) + 1j * rng.standard_normal((8, 16))
    grids = admap.sector_grids(tiny_cfg)
    base = admap.angle_delay_map(obs, d, grids.angles, grids.delays, tiny_cfg)
    spun = admap.angle_delay_map(obs * np.exp(1j * 0.9), d, grids.angles,
                                 grids.delays, tiny_cfg)
    assert np.allclose(base.values, spun.values, atol=1e-12)


def test_map_matches_a_brute_force_correlation():
    cfg = desk_scale(n_antennas=4, n_subcarriers=8, n_angle_grid=7,
                     n_range_grid=5)
    d = channel.sample_impairment(cfg)
    rng = np.random.default_rng(1)
    obs = rng.standard_normal((4, 8)) + 1j * rng.standard_normal((4, 8))
    angles = np.linspace(-0.6, -0.2, 7)
    delays = arrays.delay_grid(cfg)
    m = admap.angle_delay_map(obs, d, angles, delays, cfg)
    for i, theta in enumerate(angles):
        a = arrays.steering_perturbed(theta, d, cfg)
        for j, tau in enumerate(delays):
            rho = arrays.delay_response(tau, cfg)
            acc = 0.0 + 0.0j
            for k in range(4):
                for s in range(8):
                    acc += np.conj(a[k]) * obs[k, s] * np.conj(rho[s])
            assert m.values[i, j] == pytest.approx(abs(acc), rel=1e-10)


def test_map_rejects_mismatched_shapes(tiny_cfg):
    grids = admap.sector_grids(tiny_cfg)
    with pytest.raises(ValueError, match="does not match"):
        admap.angle_delay_map(np.zeros((4, 16), dtype=complex),
                              arrays.nominal_spacings(tiny_cfg),
                              grids.angles, grids.delays, tiny_cfg)


def test_detection_localizes_a_noiseless_target(desk_cfg):
    d = arrays.nominal_spacings(desk_cfg)
    f = unit_precoder(desk_cfg)
    theta, range_m = np.radians(-30.0), 100.0
    obs = rank_one_filtered(theta, range_m, d, f, desk_cfg, gain=5.0)
    det = admap.maprt_detect(admap.sector_map(obs, d, desk_cfg), threshold=0.0)
    assert det.detected
    assert abs(det.angle - theta) <= 0.5 * angle_cell(desk_cfg) * 1.001
    assert abs(det.range_m - range_m) <= 0.5 * range_cell(desk_cfg) * 1.001


def test_threshold_gates_detection(desk_cfg):
    d = arrays.nominal_spacings(desk_cfg)
    grids = admap.sector_grids(desk_cfg)
    silent = admap.angle_delay_map(np.zeros((16, 32), dtype=complex), d,
                                   grids.angles, grids.delays, desk_cfg)
    res = admap.maprt_detect(silent, threshold=0.25)
    assert not res.detected
    assert res.peak == 0.0
    assert res.angle is None
    noisy = admap.sector_map(unit_precoder(desk_cfg, seed=2)[:, np.newaxis]
                             * np.ones((1, 32)), d, desk_cfg)
    assert admap.maprt_detect(noisy, threshold=0.0).detected
    with pytest.raises(ValueError):
        admap.maprt_detect(noisy, threshold=-1.0)


def test_ties_resolve_to_the_lowest_row_major_cell():
    values = np.zeros((3, 4))
    values[1, 2] = values[2, 1] = 7.0
    m = admap.AngleDelayMap(values=values, angles=np.linspace(-0.5, -0.3, 3),
                            delays=np.linspace(1e-7, 2e-7, 4))
    det = admap.maprt_detect(m, threshold=0.0)
    assert det.angle == pytest.approx(m.angles[1])
    assert det.range_m == pytest.approx(float(arrays.delay_to_range(m.delays[2])))


def test_detections_are_monotone_in_the_threshold(desk_cfg):
    d = arrays.nominal_spacings(desk_cfg)
    f = unit_precoder(desk_cfg)
    peaks = admap.h0_peaks(desk_cfg, d, f, n_samples=200)
    counts = [int(np.sum(peaks > nu)) for nu in np.quantile(peaks, [0.1, 0.5, 0.9])]
    assert counts[0] >= counts[1] >= counts[2]


def test_h0_episodes_do_not_depend_on_the_true_impairment(desk_cfg):
    d_a = channel.sample_impairment(desk_cfg)
    d_b = arrays.nominal_spacings(desk_cfg)
    ids = np.arange(64)
    a = channel.sample_episode_batch(desk_cfg, d_a, ids, "calibration",
                                     force_present=False)
    b = channel.sample_episode_batch(desk_cfg, d_b, ids, "calibration",
                                     force_present=False)
    assert np.array_equal(a.noise_filtered, b.noise_filtered)
    f = unit_precoder(desk_cfg)
    assert np.array_equal(channel.filtered_observations(a, f, desk_cfg),
                          channel.filtered_observations(b, f, desk_cfg))


def test_calibration_hits_the_target_in_sample(desk_cfg):
    d = arrays.nominal_spacings(desk_cfg)
    f = unit_precoder(desk_cfg)
    calib = admap.calibrate_threshold(0.01, 20_000, desk_cfg, d, f)
    assert calib.threshold > 0
    assert 0.008 <= calib.empirical_pfa <= 0.012
    assert calib.n_samples == 20_000


def test_calibration_with_unit_target_accepts_everything(desk_cfg):
    d = arrays.nominal_spacings(desk_cfg)
    f = unit_precoder(desk_cfg)
    calib = admap.calibrate_threshold(1.0, 500, desk_cfg, d, f)
    peaks = admap.h0_peaks(desk_cfg, d, f, 500)
    assert calib.threshold <= peaks.min()
    assert calib.empirical_pfa == 1.0


def test_threshold_scales_as_the_noise_amplitude():
    base = desk_scale(master_seed=12)
    doubled = base.replace(noise_power=2.0)
    d = arrays.nominal_spacings(base)
    f = unit_precoder(base)
    nu1 = admap.calibrate_threshold(0.01, 10_000, base, d, f).threshold
    nu2 = admap.calibrate_threshold(0.01, 10_000, doubled, d, f).threshold
    assert nu2 / nu1 == pytest.approx(np.sqrt(2.0), rel=1e-12)


def test_calibration_refuses_underpowered_runs(desk_cfg):
    d = arrays.nominal_spacings(desk_cfg)
    f = unit_precoder(desk_cfg)
    with pytest.raises(CalibrationUnderpoweredError):
        admap.calibrate_threshold(0.01, 500, desk_cfg, d, f)
    with pytest.raises(ValueError):
        admap.calibrate_threshold(0.0, 10_000, desk_cfg, d, f)
    with pytest.raises(ValueError):
        admap.calibrate_threshold(1.5, 10_000, desk_cfg, d, f)
