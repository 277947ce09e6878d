"""Классические оценки положения цели, преобразование координат и метрики ошибки."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from radarloc.radar.namf import CovarianceFactor, HeatmapGrid, HeatmapSample, namf_statistic
from radarloc.radar.scenario import RadarReturnSet
from radarloc.radar.steering import SteeringProvider

logger = logging.getLogger(__name__)

# Точность поиска в долях ячейки сетки
SEARCH_TOLERANCE_CELLS = 1e-4


class EstimateMethod(str, Enum):
    NAMF_PEAK = "NAMF_PEAK"
    LOCAL_SEARCH = "LOCAL_SEARCH"
    CNN = "CNN"


class ErrorKind(str, Enum):
    """Содержимое вектора для метрики ошибки."""

    LOCATION = "location"
    AZIMUTH = "azimuth"
    VELOCITY = "velocity"


def polar_to_cartesian(range_m: float, azimuth_deg: float) -> Tuple[float, float]:
    """(r, θ) -> (x, y): x = r·sin θ, y = r·cos θ, азимут от оси y по часовой стрелке."""
    if range_m < 0:
        raise ValueError(f"Дальность не может быть отрицательной: {range_m}")
    theta = np.deg2rad(azimuth_deg)
    return float(range_m * np.sin(theta)), float(range_m * np.cos(theta))


def cartesian_to_polar(x_m: float, y_m: float) -> Tuple[float, float]:
    """Обратное преобразование (x, y) -> (r, θ)."""
    return float(np.hypot(x_m, y_m)), float(np.rad2deg(np.arctan2(x_m, y_m)))


@dataclass(frozen=True)
class Estimate:
    """Оценка положения (и скорости) цели."""

    range_m: float
    azimuth_deg: float
    velocity_mps: Optional[float] = None
    method: EstimateMethod = EstimateMethod.NAMF_PEAK
    degenerate: bool = False

    @property
    def cartesian(self) -> Tuple[float, float]:
        return polar_to_cartesian(self.range_m, self.azimuth_deg)

    def coordinates(self) -> np.ndarray:
        """Вектор (r, θ[, v]) в порядке меток сетки."""
        values = [self.range_m, self.azimuth_deg]
        if self.velocity_mps is not None:
            values.append(self.velocity_mps)
        return np.asarray(values, dtype=float)


def error_vector(label: np.ndarray, kind: ErrorKind) -> np.ndarray:
    """Вектор для метрики ошибки из метки (r, θ[, v]).

    Для положения используются декартовы координаты (x, y).
    """
    label = np.asarray(label, dtype=float)
    kind = ErrorKind(kind)
    if kind is ErrorKind.LOCATION:
        return np.asarray(polar_to_cartesian(label[0], label[1]))
    if kind is ErrorKind.AZIMUTH:
        return label[1:2]
    if label.shape[0] < 3:
        raise ValueError("Метка не содержит скорости")
    return label[2:3]


def peak_cell_midpoint(sample: HeatmapSample, grid: HeatmapGrid) -> Estimate:
    """Середина ячейки с максимальным значением тепловой карты.

    При равенстве значений выбирается наименьший индекс в
    лексикографическом порядке (элемент дальности, азимут, скорость).
    """
    values = np.asarray(sample.values)
    if values.size == 0:
        raise ValueError("Пустая тепловая карта")
    if values.shape != grid.shape:
        raise ValueError(f"Форма тепловой карты {values.shape} не совпадает с сеткой {grid.shape}")

    index = np.unravel_index(int(np.argmax(values)), values.shape)
    degenerate = bool(values.max() == values.min())
    if degenerate:
        logger.debug("ESTIMATOR: вырожденная тепловая карта, выбрана первая ячейка")

    velocity = None
    if grid.has_velocity:
        velocity = float(grid.v_min_mps + index[2] * grid.v_step_mps)

    return Estimate(
        range_m=float(grid.r_min_m + index[0] * grid.range_bin_m),
        azimuth_deg=float(grid.theta_min_deg + index[1] * grid.theta_step_deg),
        velocity_mps=velocity,
        method=EstimateMethod.NAMF_PEAK,
        degenerate=degenerate,
    )


def refine_coordinates(
    objective: Callable[[np.ndarray], float],
    start: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    cell: np.ndarray,
    passes: int = 2,
) -> Tuple[np.ndarray, float]:
    """Покоординатная максимизация на интервале ±1 ячейка вокруг старта.

    На каждой координате выполняется ограниченный одномерный поиск
    (scipy, метод Брента с золотым сечением), затем выбирается лучшая из
    точек: найденный максимум, концы интервала, текущее значение. Значение
    целевой функции поэтому не убывает относительно старта.

    Args:
        objective: Максимизируемая функция от вектора координат
        start: Начальная точка
        lower: Нижние границы сетки
        upper: Верхние границы сетки
        cell: Размер ячейки по каждой координате
        passes: Число проходов по координатам

    Returns:
        Tuple[np.ndarray, float]: Лучшая точка и значение функции в ней
    """
    start = np.asarray(start, dtype=float)
    point = start.copy()
    best = objective(point)

    for _ in range(passes):
        for axis in range(point.shape[0]):
            lo = max(float(lower[axis]), start[axis] - cell[axis])
            hi = min(float(upper[axis]), start[axis] + cell[axis])
            if not hi > lo:
                continue

            def along_axis(value: float, axis: int = axis) -> float:
                candidate = point.copy()
                candidate[axis] = value
                return objective(candidate)

            result = minimize_scalar(
                lambda value: -along_axis(value),
                bounds=(lo, hi),
                method="bounded",
                options={"xatol": SEARCH_TOLERANCE_CELLS * cell[axis]},
            )
            for value in (float(result.x), lo, hi):
                score = along_axis(value)
                if score > best:
                    best = score
                    point[axis] = value

    return point, best


def local_search(
    returns: RadarReturnSet,
    start: Estimate,
    grid: HeatmapGrid,
    steering_provider: SteeringProvider,
    passes: int = 2,
) -> Estimate:
    """Уточнение азимута (и скорости) максимизацией статистики NAMF.

    Элемент дальности фиксируется по стартовой оценке; поиск ведется по
    непрерывным координатам в пределах ±1 ячейки.

    Args:
        returns: Отраженные сигналы
        start: Оценка по максимуму тепловой карты
        grid: Сетка тепловой карты
        steering_provider: Источник управляющих векторов
        passes: Число проходов покоординатного поиска

    Returns:
        Estimate: Уточненная оценка
    """
    range_bin = int(round((start.range_m - grid.r_min_m) / grid.range_bin_m))
    range_bin = min(max(range_bin, 0), grid.kappa - 1)

    Y = returns.Y[range_bin]
    factor = CovarianceFactor.from_returns(returns.Z[range_bin])

    if grid.has_velocity:
        if start.velocity_mps is None:
            raise ValueError("Стартовая оценка не содержит скорости")
        initial = np.array([start.azimuth_deg, start.velocity_mps])
        lower = np.array([grid.theta_min_deg, grid.v_min_mps])
        upper = np.array([grid.theta_max_deg, grid.v_max_mps])
        cell = np.array([grid.theta_step_deg, grid.v_step_mps])

        def objective(point: np.ndarray) -> float:
            return namf_statistic(Y, factor, steering_provider.vector(point[0], point[1]))
    else:
        initial = np.array([start.azimuth_deg])
        lower = np.array([grid.theta_min_deg])
        upper = np.array([grid.theta_max_deg])
        cell = np.array([grid.theta_step_deg])

        def objective(point: np.ndarray) -> float:
            return namf_statistic(Y, factor, steering_provider.vector(point[0]))

    point, _ = refine_coordinates(objective, initial, lower, upper, cell, passes)

    return Estimate(
        range_m=start.range_m,
        azimuth_deg=float(point[0]),
        velocity_mps=float(point[1]) if grid.has_velocity else None,
        method=EstimateMethod.LOCAL_SEARCH,
    )


def mean_error(pairs: Iterable[Tuple[np.ndarray, np.ndarray]]) -> float:
    """Средняя евклидова ошибка (1/N)·Σ‖s* − ŝ‖ по парам (истина, оценка)."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("Пустой список пар для метрики ошибки")

    truth = [np.atleast_1d(np.asarray(t, dtype=float)) for t, _ in pairs]
    estimate = [np.atleast_1d(np.asarray(e, dtype=float)) for _, e in pairs]
    dims = {v.shape for v in truth} | {v.shape for v in estimate}
    if len(dims) != 1:
        raise ValueError(f"Несовпадение размерностей в метрике ошибки: {sorted(dims)}")

    differences = np.stack(truth) - np.stack(estimate)
    return float(np.mean(np.linalg.norm(differences, axis=1)))


def gain_factor(err_baseline: float, err_cnn: float) -> float:
    """Отношение ошибки базового метода к ошибке CNN."""
    if err_cnn == 0:
        raise ValueError("degenerate zero error")
    return float(err_baseline / err_cnn)
