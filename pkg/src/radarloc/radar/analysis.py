"""Подпространство помехи, хордовое расстояние между сценариями и отчеты о рассогласовании."""

import logging
from dataclasses import dataclass
from typing import List, Mapping, Sequence

import numpy as np
from scipy.linalg import eigh, svdvals
from scipy.stats import spearmanr

from radarloc.config.schema import RadarSiteConfig
from radarloc.radar.estimators import gain_factor
from radarloc.radar.scenario import ClutterScene, clutter_covariance

logger = logging.getLogger(__name__)

# Порог собственных значений в единицах мощности шума
NOISE_FLOOR_FACTOR = 3.0


@dataclass(frozen=True)
class SubspaceBasis:
    """Ортонормированный базис подпространства помехи (столбцы Λ·L × k)."""

    columns: np.ndarray
    rank: int
    source_scenario: str = "O"

    @property
    def ambient_dimension(self) -> int:
        return int(self.columns.shape[0])


@dataclass(frozen=True)
class MismatchRow:
    scenario: str
    gain_factor: float
    chordal_distance: float


@dataclass(frozen=True)
class MismatchReport:
    """Строки отчета и ранговая корреляция (Спирмен) коэффициента выигрыша с расстоянием."""

    rows: List[MismatchRow]
    rank_correlation: float


def clutter_subspace(
    covariance: np.ndarray,
    noise_power: float,
    source_scenario: str = "O",
    threshold_factor: float = NOISE_FLOOR_FACTOR,
) -> SubspaceBasis:
    """Собственные векторы ковариации с собственными значениями выше threshold_factor·σ_n².

    Args:
        covariance: Эрмитова неотрицательно определенная матрица
        noise_power: Мощность шума σ_n²
        source_scenario: Метка сценария
        threshold_factor: Множитель порога

    Returns:
        SubspaceBasis: Базис, упорядоченный по убыванию собственных значений

    Raises:
        ValueError: Если ни одно собственное значение не превышает порог
    """
    covariance = np.asarray(covariance)
    if covariance.ndim != 2 or covariance.shape[0] != covariance.shape[1]:
        raise ValueError("Ковариационная матрица должна быть квадратной")

    eigenvalues, eigenvectors = eigh(covariance)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues, eigenvectors = eigenvalues[order], eigenvectors[:, order]

    rank = int(np.sum(eigenvalues > threshold_factor * noise_power))
    if rank == 0:
        raise ValueError("no clutter subspace above noise floor")

    dimension = covariance.shape[0]
    if rank >= dimension:
        logger.warning(
            f"ANALYSIS: все {dimension} собственных значений выше порога, ранг ограничен {dimension - 1}"
        )
        rank = dimension - 1
        if rank == 0:
            raise ValueError("no clutter subspace above noise floor")

    return SubspaceBasis(columns=eigenvectors[:, :rank], rank=rank, source_scenario=source_scenario)


def pooled_clutter_covariance(
    scene: ClutterScene, config: RadarSiteConfig, n_pulses: int, channels: int
) -> np.ndarray:
    """Средняя по элементам дальности аналитическая ковариация помехи плюс шум."""
    return np.mean(
        [clutter_covariance(scene, config, range_bin, n_pulses, channels) for range_bin in range(scene.kappa)],
        axis=0,
    )


def chordal_distance(U: SubspaceBasis, V: SubspaceBasis) -> float:
    """Сумма квадратов синусов главных углов между подпространствами.

    При разных рангах учитываются min(rank_U, rank_V) углов.
    """
    if U.ambient_dimension != V.ambient_dimension:
        raise ValueError(
            f"Разные размерности пространства: {U.ambient_dimension} и {V.ambient_dimension}"
        )
    cosines = np.clip(svdvals(U.columns.conj().T @ V.columns), 0.0, 1.0)
    return float(np.sum(1.0 - cosines ** 2))


def rank_correlation(x: Sequence[float], y: Sequence[float]) -> float:
    """Коэффициент Спирмена; NaN при менее чем трех точках или постоянных данных."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return float("nan")
    return float(spearmanr(x, y)[0])


def mismatch_report(
    scenarios: Sequence[str],
    errors_cnn: Mapping[str, float],
    errors_baseline: Mapping[str, float],
    distances: Mapping[str, float],
) -> MismatchReport:
    """Таблица (сценарий, коэффициент выигрыша, хордовое расстояние).

    Raises:
        ValueError: Если для сценария нет ошибки или расстояния
    """
    rows = []
    for scenario in scenarios:
        missing = [
            name for name, table in (("errors_cnn", errors_cnn), ("errors_baseline", errors_baseline),
                                     ("distances", distances))
            if scenario not in table
        ]
        if missing:
            raise ValueError(f"Для сценария {scenario} отсутствуют данные: {missing}")
        rows.append(MismatchRow(
            scenario=scenario,
            gain_factor=gain_factor(errors_baseline[scenario], errors_cnn[scenario]),
            chordal_distance=float(distances[scenario]),
        ))

    correlation = rank_correlation([r.gain_factor for r in rows], [r.chordal_distance for r in rows])
    logger.info(f"ANALYSIS: ранговая корреляция выигрыша и хордового расстояния: {correlation:.3f}")
    return MismatchReport(rows=rows, rank_correlation=correlation)


def breakdown_knee(scnr_db: Sequence[float], errors: Sequence[float]) -> float:
    """ОСПШ в точке наибольшего спада кривой ошибки (середина отрезка с минимальным наклоном).

    Args:
        scnr_db: Возрастающая сетка ОСПШ, дБ
        errors: Ошибка в каждой точке сетки

    Returns:
        float: Оценка порога срыва, дБ
    """
    scnr_db = np.asarray(scnr_db, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if scnr_db.shape != errors.shape or scnr_db.size < 2:
        raise ValueError("Требуются согласованные кривые длины не меньше 2")
    if np.any(np.diff(scnr_db) <= 0):
        raise ValueError("Сетка ОСПШ должна строго возрастать")

    slopes = np.diff(errors) / np.diff(scnr_db)
    segment = int(np.argmin(slopes))
    knee = (scnr_db[segment] + scnr_db[segment + 1]) / 2.0
    logger.debug(f"ANALYSIS: наибольший спад ошибки на отрезке {segment}, ОСПШ {knee:.2f} дБ")
    return float(knee)
