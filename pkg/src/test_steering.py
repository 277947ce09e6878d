"""Тесты управляющих векторов."""

import numpy as np
import pytest

from radarloc.radar.steering import (
    ArrayGeometry,
    SteeringProvider,
    condensed_spatial_steering,
    doppler_frequency,
    doppler_vector,
    space_time_steering,
)


@pytest.fixture
def geometry():
    return ArrayGeometry()


@pytest.mark.parametrize("theta", [-60.0, 0.0, 20.0, 25.3, 30.0])
def test_spatial_vector_has_unit_modulus(geometry, theta):
    a = condensed_spatial_steering(geometry, 16, theta)
    assert a.shape == (16,)
    assert np.allclose(np.abs(a), 1.0)


def test_broadside_vector_is_all_ones(geometry):
    assert np.allclose(condensed_spatial_steering(geometry, 16, 0.0), 1.0)


def test_spatial_vector_is_conjugate_symmetric_in_azimuth(geometry):
    a = condensed_spatial_steering(geometry, 16, 25.0)
    b = condensed_spatial_steering(geometry, 16, -25.0)
    assert np.allclose(a, b.conj())


def test_invalid_condensation(geometry):
    with pytest.raises(ValueError, match="invalid subarray condensation"):
        condensed_spatial_steering(geometry, 5, 25.0)


def test_azimuth_out_of_range(geometry):
    with pytest.raises(ValueError):
        condensed_spatial_steering(geometry, 16, 90.0)


def test_zero_velocity_doppler_vector_is_ones():
    assert np.allclose(doppler_vector(0.0, 4, 1100.0, 10.0e9), 1.0)


def test_doppler_ambiguity_wraps_exactly():
    # f_d = f_p: полный оборот фазы на импульс
    velocity = 1100.0 * 3.0e8 / (2.0 * 10.0e9)
    assert doppler_frequency(velocity, 10.0e9) == pytest.approx(1100.0)
    assert np.allclose(doppler_vector(velocity, 6, 1100.0, 10.0e9), 1.0)


def test_doppler_vector_phase_progression():
    d = doppler_vector(180.0, 4, 1100.0, 10.0e9)
    step = d[1] / d[0]
    assert np.allclose(d[1:] / d[:-1], step)
    assert np.allclose(np.abs(d), 1.0)


def test_space_time_ordering(geometry):
    a = condensed_spatial_steering(geometry, 16, 22.0)
    d = doppler_vector(180.0, 3, 1100.0, 10.0e9)
    v = space_time_steering(a, d).values
    assert v.shape == (48,)
    assert np.allclose(v[2 * 16 + 5], d[2] * a[5])


def test_space_time_rejects_empty():
    with pytest.raises(ValueError):
        space_time_steering(np.array([]), np.array([1.0]))


def test_matrix_columns_match_vectors(site):
    provider = SteeringProvider.from_site(site, channels=16, n_pulses=2)
    thetas = [20.0, 24.4, 30.0]
    velocities = [175.0, 182.5]
    matrix = provider.matrix(thetas, velocities)

    assert matrix.shape == (32, 6)
    assert not matrix.flags.writeable
    column = 0
    for theta in thetas:
        for velocity in velocities:
            assert np.allclose(matrix[:, column], provider.vector(theta, velocity).values)
            column += 1


def test_matrix_is_cached(provider):
    first = provider.matrix([20.0, 21.0])
    second = provider.matrix([20.0, 21.0])
    assert first is second


def steering_by_elements(geometry, channels, theta_deg, phi_deg):
    """Сумма фаз всех элементов каждой подрешетки, нормированная на модуль."""
    theta, phi = np.deg2rad(theta_deg), np.deg2rad(phi_deg)
    wavenumber = 2.0 * np.pi / geometry.wavelength_m
    per_subarray = geometry.n_horizontal // channels
    expected = np.zeros(channels, dtype=complex)
    for channel in range(channels):
        total = 0j
        for h in range(channel * per_subarray, (channel + 1) * per_subarray):
            for v in range(geometry.n_vertical):
                x = (h - (geometry.n_horizontal - 1) / 2.0) * geometry.spacing_m
                z = (v - (geometry.n_vertical - 1) / 2.0) * geometry.spacing_m
                total += np.exp(-1j * wavenumber * (x * np.sin(theta) * np.cos(phi) + z * np.sin(phi)))
        expected[channel] = total / abs(total)
    return expected


@pytest.mark.parametrize("theta, phi", [(-35.0, 0.0), (10.0, 0.0), (25.7494, 0.0), (22.0, 4.0)])
def test_spatial_vector_matches_element_sum(geometry, theta, phi):
    expected = steering_by_elements(geometry, 16, theta, phi)
    actual = condensed_spatial_steering(geometry, 16, theta, phi)
    assert np.max(np.abs(actual - expected)) < 1e-12


def test_space_time_vector_matches_element_sum(geometry):
    spatial = steering_by_elements(geometry, 16, 24.3, 0.0)
    pulses = 4
    cycles = 2.0 * 182.0 * 10.0e9 / 3.0e8 / 1100.0
    expected = np.array([
        np.exp(-2j * np.pi * m * cycles) * spatial[l] for m in range(pulses) for l in range(16)
    ])

    actual = space_time_steering(
        condensed_spatial_steering(geometry, 16, 24.3), doppler_vector(182.0, pulses, 1100.0, 10.0e9)
    ).values
    assert np.max(np.abs(actual - expected)) < 1e-10
