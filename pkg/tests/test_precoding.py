import numpy as np
import pytest

from isacsim import arrays, channel, precoding
from isacsim.config import desk_scale
from isacsim.errors import DegenerateCombinationError, SingularSystemError
from isacsim.precoding import IsacKnobs


def _sector_objective(f, steering, desired):
    return float(np.linalg.norm(steering.T @ f - desired) ** 2)


def test_desired_beampattern_levels():
    cfg = desk_scale()
    grid = arrays.angle_grid(cfg)
    full = precoding.desired_beampattern((-np.pi / 2, np.pi / 2), grid,
                                         cfg.n_antennas)
    assert np.all(full.desired == cfg.n_antennas)
    off = precoding.desired_beampattern((1.2, 1.4), grid[grid < 1.0],
                                        cfg.n_antennas)
    assert np.all(off.desired == 0.0)
    sector = precoding.desired_beampattern(cfg.target_angle_prior, grid,
                                           cfg.n_antennas)
    inside = (grid >= cfg.target_angle_prior[0]) & (grid <= cfg.target_angle_prior[1])
    assert np.array_equal(sector.desired != 0, inside)
    with pytest.raises(ValueError):
        precoding.desired_beampattern((0.5, 0.1), grid, cfg.n_antennas)


def test_ls_recovers_an_exactly_solvable_pattern():
    # Square full-rank system: the fit must reach the direct solve.
    cfg = desk_scale(n_antennas=6, n_angle_grid=6)
    d = channel.sample_impairment(cfg.replace(master_seed=1))
    grid = arrays.angle_grid(cfg)
    steering = arrays.steering_matrix(grid, d, cfg)
    target = np.array([0.0, 1.0, 6.0, 6.0, 1.0, 0.0])
    sol = precoding.ls_beamformer(steering, target)
    direct = np.linalg.solve(steering.T, target.astype(complex))
    assert np.allclose(sol.weights, direct, rtol=1e-8)
    assert _sector_objective(sol.weights, steering, target) \
        < 1e-14 * np.linalg.norm(target) ** 2


def test_ls_is_the_global_minimizer():
    cfg = desk_scale()
    d = channel.sample_impairment(cfg)
    grid = arrays.angle_grid(cfg)
    steering = arrays.steering_matrix(grid, d, cfg)
    desired = precoding.desired_beampattern(cfg.target_angle_prior, grid,
                                            cfg.n_antennas).desired
    sol = precoding.ls_beamformer(steering, desired)
    best = _sector_objective(sol.weights, steering, desired)
    assert best <= _sector_objective(np.zeros(cfg.n_antennas), steering, desired)
    rng = np.random.default_rng(11)
    for _ in range(1000):
        rival = rng.standard_normal(cfg.n_antennas) \
            + 1j * rng.standard_normal(cfg.n_antennas)
        rival *= rng.uniform(0.1, 3.0) / np.linalg.norm(rival)
        assert best <= _sector_objective(rival, steering, desired) + 1e-9


def test_ls_satisfies_the_normal_equations():
    cfg = desk_scale()
    d = channel.sample_impairment(cfg)
    grid = arrays.angle_grid(cfg)
    steering = arrays.steering_matrix(grid, d, cfg)
    desired = precoding.desired_beampattern(cfg.target_angle_prior, grid,
                                            cfg.n_antennas).desired
    f = precoding.ls_beamformer(steering, desired).weights
    residual = np.conj(steering) @ (steering.T @ f - desired)
    assert np.linalg.norm(residual) < 1e-8 * np.linalg.norm(desired)


def test_ls_rejects_a_rank_deficient_system():
    cfg = desk_scale(n_antennas=4)
    d = arrays.nominal_spacings(cfg)
    one = arrays.steering_perturbed(0.3, d, cfg)
    steering = np.tile(one[:, np.newaxis], (1, 16))
    with pytest.raises(SingularSystemError):
        precoding.ls_beamformer(steering, np.full(16, 4.0))


def test_isac_combine_endpoints_and_norm():
    rng = np.random.default_rng(5)
    fr = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    fc = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    sensing = precoding.isac_combine(fr, fc, IsacKnobs(eta=1.0)).weights
    assert np.allclose(sensing, fr / np.linalg.norm(fr))
    comm = precoding.isac_combine(fr, fc, IsacKnobs(eta=0.0, phi_c=0.0)).weights
    assert np.allclose(comm, fc / np.linalg.norm(fc))
    rotated = precoding.isac_combine(fr, fc, IsacKnobs(eta=0.0, phi_c=1.1)).weights
    assert np.allclose(rotated, np.exp(1j * 1.1) * fc / np.linalg.norm(fc))
    for eta in np.linspace(0, 1, 8):
        for phic in np.linspace(0, 2 * np.pi, 5):
            w = precoding.isac_combine(fr, fc, IsacKnobs(eta=float(eta),
                                                         phi_c=float(phic))).weights
            assert np.linalg.norm(w) == pytest.approx(1.0)


def test_isac_combine_rejects_cancellation():
    rng = np.random.default_rng(6)
    fr = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    with pytest.raises(DegenerateCombinationError):
        precoding.isac_combine(fr, -fr, IsacKnobs(eta=0.5, phi_c=0.0))
    with pytest.raises(ValueError):
        precoding.isac_combine(fr, fr, IsacKnobs(eta=1.5))


def test_sector_precoders_under_nominal_spacings():
    cfg = desk_scale()
    d = arrays.nominal_spacings(cfg)
    fr, fc = precoding.build_sector_precoders(cfg.target_angle_prior,
                                              cfg.ue_angle_prior, d, cfg)
    grid = arrays.angle_grid(cfg)
    steering = arrays.steering_matrix(grid, d, cfg)
    for f, (lo, hi) in ((fr, cfg.target_angle_prior), (fc, cfg.ue_angle_prior)):
        gain = np.abs(steering.T @ f)
        inside = (grid >= lo) & (grid <= hi)
        # The fitted pattern concentrates its power on the requested sector.
        assert gain[inside].min() > 2 * gain[~inside].mean()
        peak = grid[int(np.argmax(gain))]
        assert lo - 0.05 <= peak <= hi + 0.05


def test_genie_raw_sector_gain_beats_nominal_on_average():
    cfg = desk_scale()
    lo, hi = cfg.target_angle_prior
    center = 0.5 * (lo + hi)
    gains = {"genie": 0.0, "nominal": 0.0}
    for seed in range(100):
        sub = cfg.replace(master_seed=seed)
        d_true = channel.sample_impairment(sub)
        a = arrays.steering_perturbed(center, d_true, sub)
        for label, d_dict in (("genie", d_true),
                              ("nominal", arrays.nominal_spacings(sub))):
            fr, _ = precoding.build_sector_precoders(sub.target_angle_prior,
                                                     sub.ue_angle_prior, d_dict, sub)
            gains[label] += float(np.abs(a @ fr))
    assert gains["genie"] > gains["nominal"]
