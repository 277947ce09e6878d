"""Тесты синтетической сцены и калибровки усиления."""

import numpy as np
import pytest

from radarloc.config.schema import AppConfig
from radarloc.radar.namf import sample_covariance
from radarloc.radar.scenario import (
    TargetSpec,
    build_clutter_scene,
    calibrate_rcs_gain,
    clutter_covariance,
    displace_scenario,
    mean_output_scnr,
    range_bin_of,
    sample_target,
    scenario_seed,
    synthesize_returns,
)
from radarloc.utils.core import make_rng


def test_clutter_to_noise_ratio_per_bin(site, scene):
    for range_bin in range(site.kappa):
        assert scene.clutter_to_noise_ratio(range_bin) == pytest.approx(100.0)
    assert scene.clutter_to_noise_ratio() == pytest.approx(100.0)
    assert len(scene.patches) == 32 * site.kappa


def test_patches_lie_inside_region(site, scene):
    assert np.all(scene.azimuths_deg >= site.theta_min_deg)
    assert np.all(scene.azimuths_deg <= site.theta_max_deg)


def test_scene_is_reproducible(site):
    first = build_clutter_scene(site, 32, seed=3)
    second = build_clutter_scene(site, 32, seed=3)
    assert np.array_equal(first.azimuths_deg, second.azimuths_deg)
    assert np.array_equal(first.mean_powers, second.mean_powers)


def test_empty_scene_rejected(site):
    with pytest.raises(ValueError, match="empty clutter scene"):
        build_clutter_scene(site, 0, seed=1)


def test_too_few_patches_for_channels(site):
    with pytest.raises(ValueError):
        build_clutter_scene(site, 8, seed=1, channels=16)


def test_range_bin_of_edges(site):
    assert range_bin_of(site, site.r_min_m) == 0
    assert range_bin_of(site, site.r_min_m - 14.9) == 0
    assert range_bin_of(site, site.r_min_m + 15.1) == 1
    assert range_bin_of(site, site.r_max_m + 14.9) == site.kappa - 1


def test_sampled_target_inside_region(site, rng):
    for _ in range(50):
        target = sample_target(site, 0.0, 10.0, (175.0, 190.0), rng)
        assert site.r_min_m - 15.0 <= target.range_m <= site.r_max_m + 15.0
        assert site.theta_min_deg <= target.azimuth_deg <= site.theta_max_deg
        assert 175.0 <= target.velocity_mps <= 190.0
        assert -5.0 <= target.rcs_dbsm <= 5.0


def test_synthesized_returns_structure(site, scene, rng):
    target = TargetSpec(range_m=site.r_min_m + 60.0, azimuth_deg=24.0)
    returns = synthesize_returns(scene, target, site, 1, 16, 100, gain=2.0, rng=rng)

    assert returns.Y.shape == (5, 16, 100)
    assert returns.target_bin == 2
    assert np.array_equal(returns.beta, [0, 0, 1, 0, 0])
    assert np.array_equal(returns.Y, returns.X + returns.Z)
    for range_bin in (0, 1, 3, 4):
        assert not np.any(returns.X[range_bin])

    # столбцы сигнала цели пропорциональны ã(θ*)
    column = returns.X[2][:, 0]
    assert np.allclose(np.abs(column), np.sqrt(2.0))


def test_zero_gain_gives_no_target(site, scene, rng):
    target = TargetSpec(range_m=site.r_min_m, azimuth_deg=25.0)
    returns = synthesize_returns(scene, target, site, 1, 16, 20, gain=0.0, rng=rng)
    assert not np.any(returns.X)


def test_target_outside_region(site, scene, rng):
    target = TargetSpec(range_m=site.r_max_m + 100.0, azimuth_deg=25.0)
    with pytest.raises(ValueError, match="target outside processing region"):
        synthesize_returns(scene, target, site, 1, 16, 20, gain=1.0, rng=rng)


def test_sample_covariance_approaches_analytic(site, scene, rng):
    target = TargetSpec(range_m=site.r_min_m, azimuth_deg=25.0)
    returns = synthesize_returns(scene, target, site, 1, 16, 20000, gain=0.0, rng=rng)

    estimated = sample_covariance(returns.Z[3])
    expected = clutter_covariance(scene, site, 3, 1, 16)
    assert np.linalg.norm(estimated - expected) / np.linalg.norm(expected) < 0.05


def test_calibration_reaches_target_scnr(site, scene):
    gain = calibrate_rcs_gain(scene, site, 10.0, 0.0, 100, make_rng(9))
    achieved = mean_output_scnr(scene, site, gain, 0.0, 100, make_rng(9))
    assert achieved == pytest.approx(10.0, abs=0.01)


def test_calibration_gain_grows_with_target(site, scene):
    low = calibrate_rcs_gain(scene, site, 0.0, 0.0, 100, make_rng(9))
    high = calibrate_rcs_gain(scene, site, 10.0, 0.0, 100, make_rng(9))
    assert high / low == pytest.approx(10.0, rel=0.01)


def test_calibration_requires_enough_trials(site, scene):
    with pytest.raises(ValueError):
        calibrate_rcs_gain(scene, site, 10.0, 0.0, 50, make_rng(9))


def test_calibration_failure_reports_achieved(site, scene):
    with pytest.raises(RuntimeError, match="достигнуто"):
        calibrate_rcs_gain(scene, site, 10.0, 0.0, 100, make_rng(9), max_iter=2)


def test_displace_scenario_matches_configured_geometry():
    app = AppConfig()
    displaced = displace_scenario(app.site_config("O"), "N", app.scenarios)
    assert displaced == app.site_config("N")


def test_displace_requires_origin():
    app = AppConfig()
    with pytest.raises(ValueError):
        displace_scenario(app.site_config("N"), "S")
    with pytest.raises(ValueError):
        displace_scenario(app.site_config("O"), "O")


def test_scenario_seeds_differ():
    assert scenario_seed(0, "O") != scenario_seed(0, "N")
    assert scenario_seed(0, "O") == scenario_seed(0, "O")
