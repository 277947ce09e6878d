"""Тесты статистики NAMF, тепловых карт и выходного ОСПШ."""

import math

import numpy as np
import pytest
from scipy.linalg import LinAlgError

from radarloc.experiments.dataset import prepare_simulation
from radarloc.radar.namf import (
    CovarianceFactor,
    HeatmapGrid,
    breakdown_threshold,
    heatmap,
    namf_statistic,
    output_scnr,
    sample_covariance,
)
from radarloc.radar.scenario import TargetSpec, synthesize_returns


def complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def test_sample_covariance_is_hermitian(rng):
    covariance = sample_covariance(complex_normal(rng, (16, 40)))
    assert np.array_equal(covariance, covariance.conj().T)


def test_too_few_snapshots_is_singular(rng):
    with pytest.raises(LinAlgError, match="singular covariance"):
        CovarianceFactor(sample_covariance(complex_normal(rng, (16, 8))))


def test_statistic_is_bounded(rng, provider):
    Z = complex_normal(rng, (16, 100))
    Y = complex_normal(rng, (16, 100))
    value = namf_statistic(Y, sample_covariance(Z), provider.vector(25.0))
    assert 0.0 <= value <= math.sqrt(100)


def test_statistic_is_scale_invariant(rng, provider):
    Z = complex_normal(rng, (16, 100))
    Y = complex_normal(rng, (16, 50))
    a = provider.vector(23.0).values
    covariance = sample_covariance(Z)

    reference = namf_statistic(Y, covariance, a)
    assert namf_statistic(3.0 * Y, covariance, a) == pytest.approx(reference, rel=1e-9)
    assert namf_statistic(Y, 7.0 * covariance, a) == pytest.approx(reference, rel=1e-9)
    assert namf_statistic(Y, covariance, 2j * a) == pytest.approx(reference, rel=1e-9)


def test_rank_one_data_reaches_bound(rng, provider):
    Z = complex_normal(rng, (16, 100))
    a = provider.vector(26.0).values
    Y = np.outer(a, np.exp(2j * np.pi * rng.uniform(size=9)))
    assert namf_statistic(Y, sample_covariance(Z), a) == pytest.approx(3.0, rel=1e-9)


def test_grid_shapes(site):
    grid = HeatmapGrid.from_config(site, 0.4)
    assert grid.shape == (5, 26)
    assert grid.azimuths()[-1] == pytest.approx(30.0)

    doppler = HeatmapGrid.from_config(site, 0.4, (175.0, 190.0, 0.5))
    assert doppler.shape == (5, 26, 31)
    assert doppler.label_dim == 3


def test_label_normalization(grid):
    lower, upper = grid.label_bounds()
    assert lower[0] == pytest.approx(grid.r_min_m - 15.0)
    assert upper[1] == pytest.approx(30.0)

    label = np.array([grid.r_min_m + 47.0, 22.3])
    assert np.allclose(grid.denormalize_label(grid.normalize_label(label)), label)
    assert np.allclose(grid.denormalize_label(np.array([1.5, -0.2])), [upper[0], lower[1]])


def test_heatmap_matches_pointwise_statistic(site, scene, grid, provider, rng):
    target = TargetSpec(range_m=site.r_min_m + 30.0, azimuth_deg=24.0)
    returns = synthesize_returns(scene, target, site, 1, 16, 100, gain=10.0, rng=rng)
    sample = heatmap(returns, grid, provider)

    assert sample.values.shape == grid.shape
    assert np.all(sample.values >= 0)
    assert np.allclose(sample.label, [target.range_m, target.azimuth_deg])

    for range_bin, column in ((1, 10), (4, 0), (0, 25)):
        expected = namf_statistic(
            returns.Y[range_bin], sample_covariance(returns.Z[range_bin]),
            provider.vector(grid.azimuths()[column]),
        )
        assert sample.values[range_bin, column] == pytest.approx(expected, rel=1e-8)


def test_strong_target_dominates_heatmap(site, scene, grid, provider, rng):
    target = TargetSpec(range_m=site.r_min_m + 90.0, azimuth_deg=24.0)
    returns = synthesize_returns(scene, target, site, 1, 16, 100, gain=1.0e4, rng=rng)
    values = heatmap(returns, grid, provider).values

    peak_bin, peak_column = np.unravel_index(np.argmax(values), values.shape)
    assert peak_bin == 3
    assert abs(grid.azimuths()[peak_column] - 24.0) <= 1.0


def test_output_scnr(rng):
    Z = complex_normal(rng, (16, 100))
    covariance = sample_covariance(Z)
    assert output_scnr(np.zeros_like(Z), Z, covariance) == float("-inf")
    assert output_scnr(Z, Z, covariance) == pytest.approx(0.0)
    assert output_scnr(10.0 * Z, Z, covariance) == pytest.approx(20.0)


def test_output_scnr_zero_denominator():
    with pytest.raises(ValueError):
        output_scnr(np.ones((4, 2)), np.zeros((4, 2)), np.eye(4))


def test_breakdown_threshold():
    assert breakdown_threshold(1, 16, 100) == pytest.approx(10.0 * math.log10(0.4))
    assert breakdown_threshold(1, 16, 16) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        breakdown_threshold(0, 16, 100)


def random_instance(seed):
    """Случайные Y (n×K), Σ̂ и ã при n ∈ [2, 4], K ∈ [n, 8]."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    snapshots = int(rng.integers(n, 9))
    covariance = sample_covariance(complex_normal(rng, (n, n + 6)))
    return complex_normal(rng, (n, snapshots)), covariance, complex_normal(rng, n)


def gauss_jordan_inverse(matrix):
    n = len(matrix)
    rows = [
        [complex(matrix[i][j]) for j in range(n)] + [1.0 + 0j if i == j else 0j for j in range(n)]
        for i in range(n)
    ]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(rows[r][col]))
        rows[col], rows[pivot] = rows[pivot], rows[col]
        scale = rows[col][col]
        rows[col] = [x / scale for x in rows[col]]
        for r in range(n):
            if r != col:
                factor = rows[r][col]
                rows[r] = [x - factor * p for x, p in zip(rows[r], rows[col])]
    return [row[n:] for row in rows]


def namf_by_loops(Y, covariance, a):
    n, snapshots = Y.shape
    inverse = gauss_jordan_inverse(covariance.tolist())

    def quadratic(u, v):
        return sum(u[i].conjugate() * inverse[i][j] * v[j] for i in range(n) for j in range(n))

    numerator = sum(abs(quadratic(a, Y[:, k])) ** 2 for k in range(snapshots))
    diagonal = [quadratic(Y[:, k], Y[:, k]).real for k in range(snapshots)]
    return numerator / (quadratic(a, a).real * math.sqrt(sum(d * d for d in diagonal)))


@pytest.mark.parametrize("seed", range(100))
def test_statistic_matches_direct_evaluation(seed):
    Y, covariance, a = random_instance(seed)
    assert namf_statistic(Y, covariance, a) == pytest.approx(namf_by_loops(Y, covariance, a), rel=1e-10)


@pytest.mark.parametrize("seed", range(100))
def test_whitening_consistency(seed):
    Y, covariance, a = random_instance(seed)
    eigenvalues, vectors = np.linalg.eigh(covariance)
    inverse_root = vectors @ np.diag(eigenvalues ** -0.5) @ vectors.conj().T

    whitened = namf_statistic(inverse_root @ Y, np.eye(Y.shape[0]), inverse_root @ a)
    assert whitened == pytest.approx(namf_statistic(Y, covariance, a), rel=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_single_matched_column_gives_one(seed):
    _, covariance, a = random_instance(seed)
    rng = np.random.default_rng(seed + 1000)
    c = complex(rng.standard_normal(), rng.standard_normal())
    assert namf_statistic((c * a)[:, None], covariance, a) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_single_column_is_at_most_one(seed):
    Y, covariance, a = random_instance(seed)
    assert 0.0 <= namf_statistic(Y[:, :1], covariance, a) <= 1.0 + 1e-12


def test_zero_data_gives_zero_statistic(provider):
    a = provider.vector(25.0).values
    assert namf_statistic(np.zeros((16, 4), dtype=complex), np.eye(16), a) == 0.0
    assert namf_statistic(np.zeros(16, dtype=complex), np.eye(16), a) == 0.0


def test_zero_bin_gives_zero_heatmap_row(site, scene, grid, provider, rng):
    target = TargetSpec(range_m=site.r_min_m + 30.0, azimuth_deg=24.0)
    returns = synthesize_returns(scene, target, site, 1, 16, 100, gain=10.0, rng=rng)
    returns.Y[0] = 0.0
    values = heatmap(returns, grid, provider).values
    assert np.array_equal(values[0], np.zeros(grid.n_azimuth))
    assert np.all(np.isfinite(values))


def test_breakdown_threshold_values():
    assert breakdown_threshold(1, 16, 100) == pytest.approx(-3.979, abs=1e-3)
    assert breakdown_threshold(1, 16, 500) == pytest.approx(-7.474, abs=1e-3)


def test_calibrated_target_peaks_in_its_range_bin(small_config):
    setup = prepare_simulation(small_config, "O", 20.0, seed=3)
    hits = 0
    for index in range(200):
        sample, returns = setup.simulate(index)
        peak_bin = np.unravel_index(np.argmax(sample.values), sample.values.shape)[0]
        hits += int(peak_bin == returns.target_bin)
    assert hits / 200 >= 0.95
