"""Тесты классических оценок и метрик ошибки."""

import numpy as np
import pytest

from radarloc.experiments.dataset import prepare_simulation
from radarloc.radar.estimators import (
    ErrorKind,
    Estimate,
    EstimateMethod,
    cartesian_to_polar,
    error_vector,
    gain_factor,
    local_search,
    mean_error,
    peak_cell_midpoint,
    polar_to_cartesian,
    refine_coordinates,
)
from radarloc.radar.namf import HeatmapSample, namf_statistic, sample_covariance
from radarloc.radar.scenario import TargetSpec, synthesize_returns


def test_peak_cell_midpoint(grid):
    values = np.zeros(grid.shape)
    values[2, 10] = 5.0
    estimate = peak_cell_midpoint(HeatmapSample(values, np.zeros(2)), grid)

    assert estimate.range_m == pytest.approx(grid.r_min_m + 60.0)
    assert estimate.azimuth_deg == pytest.approx(24.0)
    assert estimate.method is EstimateMethod.NAMF_PEAK
    assert not estimate.degenerate


def test_flat_heatmap_picks_first_cell(grid):
    estimate = peak_cell_midpoint(HeatmapSample(np.ones(grid.shape), np.zeros(2)), grid)
    assert estimate.degenerate
    assert estimate.range_m == pytest.approx(grid.r_min_m)
    assert estimate.azimuth_deg == pytest.approx(grid.theta_min_deg)


def test_peak_rejects_wrong_shape(grid):
    with pytest.raises(ValueError):
        peak_cell_midpoint(HeatmapSample(np.ones((3, 3)), np.zeros(2)), grid)


def test_refine_finds_interior_maximum():
    point, value = refine_coordinates(
        lambda x: -(x[0] - 0.13) ** 2,
        start=np.array([0.0]), lower=np.array([-1.0]), upper=np.array([1.0]), cell=np.array([0.4]),
    )
    assert point[0] == pytest.approx(0.13, abs=1e-3)
    assert value <= 0.0


def test_refine_keeps_boundary_maximum():
    point, _ = refine_coordinates(
        lambda x: x[0],
        start=np.array([0.9]), lower=np.array([0.0]), upper=np.array([1.0]), cell=np.array([0.4]),
    )
    assert point[0] == 1.0


def test_refine_stays_within_one_cell():
    point, _ = refine_coordinates(
        lambda x: x[0],
        start=np.array([0.0]), lower=np.array([-5.0]), upper=np.array([5.0]), cell=np.array([0.4]),
    )
    assert point[0] == pytest.approx(0.4)


def test_local_search_never_decreases_statistic(site, scene, grid, provider, rng):
    target = TargetSpec(range_m=site.r_min_m + 30.0, azimuth_deg=24.17)
    returns = synthesize_returns(scene, target, site, 1, 16, 100, gain=1.0e3, rng=rng)
    start = Estimate(range_m=target.range_m, azimuth_deg=24.0)

    refined = local_search(returns, start, grid, provider)
    covariance = sample_covariance(returns.Z[1])

    before = namf_statistic(returns.Y[1], covariance, provider.vector(24.0))
    after = namf_statistic(returns.Y[1], covariance, provider.vector(refined.azimuth_deg))
    assert after >= before
    assert refined.method is EstimateMethod.LOCAL_SEARCH
    assert abs(refined.azimuth_deg - 24.0) <= 0.4 + 1e-9


def test_polar_conversion_roundtrip():
    x, y = polar_to_cartesian(100.0, 90.0)
    assert x == pytest.approx(100.0)
    assert y == pytest.approx(0.0, abs=1e-9)
    assert cartesian_to_polar(*polar_to_cartesian(14600.0, 25.0)) == pytest.approx((14600.0, 25.0))


def test_negative_range_rejected():
    with pytest.raises(ValueError):
        polar_to_cartesian(-1.0, 10.0)


def test_error_vectors():
    label = np.array([100.0, 30.0, 180.0])
    assert np.allclose(error_vector(label, ErrorKind.LOCATION), [50.0, 100.0 * np.cos(np.pi / 6)])
    assert np.allclose(error_vector(label, ErrorKind.AZIMUTH), [30.0])
    assert np.allclose(error_vector(label, ErrorKind.VELOCITY), [180.0])
    with pytest.raises(ValueError):
        error_vector(label[:2], ErrorKind.VELOCITY)


def test_mean_error():
    pairs = [(np.array([0.0, 0.0]), np.array([3.0, 4.0])), (np.array([1.0, 1.0]), np.array([1.0, 1.0]))]
    assert mean_error(pairs) == pytest.approx(2.5)


def test_mean_error_validation():
    with pytest.raises(ValueError):
        mean_error([])
    with pytest.raises(ValueError):
        mean_error([(np.zeros(2), np.zeros(3))])


def test_gain_factor():
    assert gain_factor(10.0, 2.0) == pytest.approx(5.0)
    with pytest.raises(ValueError, match="degenerate zero error"):
        gain_factor(1.0, 0.0)


def test_local_search_improves_azimuth_at_high_scnr(small_config):
    setup = prepare_simulation(small_config, "O", 20.0, seed=3)
    improved = 0
    for index in range(200):
        sample, returns = setup.simulate(index)
        peak = peak_cell_midpoint(sample, setup.grid)
        refined = local_search(returns, peak, setup.grid, setup.provider)
        truth = sample.label[1]
        improved += int(abs(refined.azimuth_deg - truth) < abs(peak.azimuth_deg - truth))
    assert improved / 200 >= 0.9
