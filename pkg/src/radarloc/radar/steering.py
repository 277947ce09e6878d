"""Геометрия антенной решетки и управляющие векторы.

Пространственный вектор строится для прямоугольной решетки с опорной точкой
в центре; каждая подрешетка (n_horizontal / L × n_vertical) суммируется с
равными весами, после чего элемент нормируется на единичный модуль.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from radarloc.config.schema import SPEED_OF_LIGHT_MPS, RadarSiteConfig
from radarloc.utils.cache import with_cache

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArrayGeometry:
    """Прямоугольная решетка n_horizontal × n_vertical с шагом spacing_m."""

    n_horizontal: int = 48
    n_vertical: int = 5
    spacing_m: float = 0.015
    wavelength_m: float = SPEED_OF_LIGHT_MPS / 10.0e9

    def __post_init__(self) -> None:
        if self.n_horizontal < 1 or self.n_vertical < 1:
            raise ValueError("Число элементов решетки должно быть положительным")
        if not self.spacing_m > 0 or not self.wavelength_m > 0:
            raise ValueError("Шаг решетки и длина волны должны быть положительными")

    @classmethod
    def from_site(cls, config: RadarSiteConfig) -> "ArrayGeometry":
        return cls(
            n_horizontal=config.array_h,
            n_vertical=config.array_v,
            spacing_m=config.element_spacing_m,
            wavelength_m=config.wavelength_m,
        )

    def element_offsets(self) -> Tuple[np.ndarray, np.ndarray]:
        """Координаты элементов относительно центра решетки (x, z), м."""
        x = (np.arange(self.n_horizontal) - (self.n_horizontal - 1) / 2.0) * self.spacing_m
        z = (np.arange(self.n_vertical) - (self.n_vertical - 1) / 2.0) * self.spacing_m
        return x, z


@dataclass(frozen=True)
class SpaceTimeSteeringVector:
    """Пространственно-временной управляющий вектор длины Λ·L."""

    values: np.ndarray
    theta_deg: Optional[float] = None
    phi_deg: Optional[float] = None
    velocity_mps: Optional[float] = None

    def __len__(self) -> int:
        return int(self.values.shape[0])


def _check_condensation(geom: ArrayGeometry, channels: int) -> None:
    if channels < 1 or geom.n_horizontal % channels != 0:
        raise ValueError(
            f"invalid subarray condensation: {geom.n_horizontal} элементов "
            f"не делятся на L = {channels}"
        )


def condensed_spatial_steering(
    geom: ArrayGeometry, channels: int, theta_deg: float, phi_deg: float = 0.0
) -> np.ndarray:
    """Пространственный управляющий вектор после формирования подрешеток.

    Args:
        geom: Геометрия решетки
        channels: Число каналов L (подрешеток по горизонтали)
        theta_deg: Азимут, градусы
        phi_deg: Угол места, градусы

    Returns:
        np.ndarray: Комплексный вектор длины L с элементами единичного модуля

    Raises:
        ValueError: Если решетка не делится на L подрешеток или |θ| ≥ 90°
    """
    _check_condensation(geom, channels)
    if not abs(theta_deg) < 90.0:
        raise ValueError(f"Азимут вне допустимого диапазона: {theta_deg}")

    theta = np.deg2rad(theta_deg)
    phi = np.deg2rad(phi_deg)
    wavenumber = 2.0 * np.pi / geom.wavelength_m
    x, z = geom.element_offsets()

    phase = -wavenumber * (
        x[:, None] * (np.sin(theta) * np.cos(phi)) + z[None, :] * np.sin(phi)
    )
    elements = np.exp(1j * phase)

    per_subarray = geom.n_horizontal // channels
    weight = 1.0 / np.sqrt(per_subarray * geom.n_vertical)
    condensed = weight * elements.reshape(channels, per_subarray, geom.n_vertical).sum(axis=(1, 2))

    return np.exp(1j * np.angle(condensed))


def doppler_frequency(velocity_mps: float, carrier_hz: float) -> float:
    """Доплеровский сдвиг f_d = 2·v·f_c / c для моностатического радара."""
    return 2.0 * velocity_mps * carrier_hz / SPEED_OF_LIGHT_MPS


def doppler_vector(
    velocity_mps: float, n_pulses: int, prf_hz: float, carrier_hz: float
) -> np.ndarray:
    """Вектор линейной доплеровской фазы по импульсам.

    Элемент m равен exp(-i·2π·m·f_d/f_p). Неоднозначность по скорости
    допускается: фаза берется по модулю 2π.

    Args:
        velocity_mps: Радиальная скорость цели, м/с
        n_pulses: Число импульсов Λ
        prf_hz: Частота повторения импульсов f_p
        carrier_hz: Несущая частота f_c

    Returns:
        np.ndarray: Комплексный вектор длины Λ
    """
    if n_pulses < 1:
        raise ValueError("Число импульсов должно быть не меньше 1")
    if not prf_hz > 0:
        raise ValueError("Частота повторения импульсов должна быть положительной")

    cycles_per_pulse = doppler_frequency(velocity_mps, carrier_hz) / prf_hz
    # дробная часть цикла, чтобы полный оборот фазы давал ровно 1
    cycles = np.mod(np.arange(n_pulses) * cycles_per_pulse, 1.0)
    return np.exp(-2j * np.pi * cycles)


def space_time_steering(
    spatial: np.ndarray,
    doppler: np.ndarray,
    theta_deg: Optional[float] = None,
    phi_deg: Optional[float] = None,
    velocity_mps: Optional[float] = None,
) -> SpaceTimeSteeringVector:
    """Кронекерово произведение d ⊗ a: элемент (m·L + l) равен d_m·a_l."""
    spatial = np.asarray(spatial, dtype=complex)
    doppler = np.asarray(doppler, dtype=complex)
    if spatial.size == 0 or doppler.size == 0:
        raise ValueError("Управляющие векторы не могут быть пустыми")
    return SpaceTimeSteeringVector(
        values=np.kron(doppler, spatial),
        theta_deg=theta_deg,
        phi_deg=phi_deg,
        velocity_mps=velocity_mps,
    )


@with_cache("steering_matrix")
def steering_matrix(
    geom: ArrayGeometry,
    channels: int,
    n_pulses: int,
    prf_hz: float,
    carrier_hz: float,
    thetas_deg: Tuple[float, ...],
    velocities_mps: Tuple[float, ...],
) -> np.ndarray:
    """Матрица управляющих векторов для сетки (θ × v), столбцы в порядке θ-major.

    Результат кэшируется и возвращается только для чтения.
    """
    spatial = np.stack([condensed_spatial_steering(geom, channels, t) for t in thetas_deg])
    doppler = np.stack([doppler_vector(v, n_pulses, prf_hz, carrier_hz) for v in velocities_mps])

    # (A, V, Λ, L) -> (Λ·L, A·V)
    block = doppler[None, :, :, None] * spatial[:, None, None, :]
    matrix = block.reshape(len(thetas_deg) * len(velocities_mps), n_pulses * channels).T.copy()
    matrix.flags.writeable = False

    logger.debug(f"STEERING: построена матрица {matrix.shape} для {len(thetas_deg)}×{len(velocities_mps)} точек")
    return matrix


@dataclass(frozen=True)
class SteeringProvider:
    """Источник управляющих векторов для фиксированных Λ, L и решетки."""

    geometry: ArrayGeometry
    channels: int
    n_pulses: int = 1
    prf_hz: float = 1100.0
    carrier_hz: float = 10.0e9
    phi_deg: float = field(default=0.0)

    def __post_init__(self) -> None:
        _check_condensation(self.geometry, self.channels)
        if self.n_pulses < 1:
            raise ValueError("Число импульсов должно быть не меньше 1")

    @classmethod
    def from_site(cls, config: RadarSiteConfig, channels: int, n_pulses: int = 1) -> "SteeringProvider":
        return cls(
            geometry=ArrayGeometry.from_site(config),
            channels=channels,
            n_pulses=n_pulses,
            prf_hz=config.prf_hz,
            carrier_hz=config.carrier_freq_hz,
        )

    @property
    def dimension(self) -> int:
        """Размерность Λ·L."""
        return self.n_pulses * self.channels

    def spatial(self, theta_deg: float) -> np.ndarray:
        return condensed_spatial_steering(self.geometry, self.channels, theta_deg, self.phi_deg)

    def vector(self, theta_deg: float, velocity_mps: float = 0.0) -> SpaceTimeSteeringVector:
        doppler = doppler_vector(velocity_mps, self.n_pulses, self.prf_hz, self.carrier_hz)
        return space_time_steering(
            self.spatial(theta_deg), doppler, theta_deg, self.phi_deg, velocity_mps
        )

    def matrix(
        self, thetas_deg: Sequence[float], velocities_mps: Sequence[float] = (0.0,)
    ) -> np.ndarray:
        """Матрица (Λ·L × A·V) для сетки азимутов и скоростей."""
        if self.phi_deg != 0.0:
            columns = [self.vector(t, v).values for t in thetas_deg for v in velocities_mps]
            return np.stack(columns, axis=1)
        return steering_matrix(
            self.geometry,
            self.channels,
            self.n_pulses,
            self.prf_hz,
            self.carrier_hz,
            tuple(float(t) for t in thetas_deg),
            tuple(float(v) for v in velocities_mps),
        )
