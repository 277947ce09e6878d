"""Синтетическая сцена: участки отражений от подстилающей поверхности, цель и отраженные сигналы.

Отражения моделируются дискретными участками по азимуту с комплексными
гауссовыми амплитудами нулевой доплеровской частоты, поэтому ковариация
помехи известна аналитически: Σ = Σ_p σ_p²·ã·ã^H + σ_n²·I.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Tuple

import numpy as np

from radarloc.config.schema import DEFAULT_SCENARIOS, RadarSiteConfig, ScenarioGeometry
from radarloc.radar.namf import CovarianceFactor, sample_covariance
from radarloc.radar.steering import SteeringProvider
from radarloc.utils.core import derive_seed
from radarloc.utils.logging import debug_timing

logger = logging.getLogger(__name__)

DISPLACEMENT_DIRECTIONS = ("N", "W", "S", "E")

# Пределы бисекции по log-усилению, дБ
GAIN_SEARCH_DB = (-300.0, 300.0)


@dataclass(frozen=True)
class TargetSpec:
    """Точечная цель: дальность, азимут, скорость (0 без доплера) и ЭПР."""

    range_m: float
    azimuth_deg: float
    velocity_mps: float = 0.0
    rcs_dbsm: float = 0.0


@dataclass(frozen=True)
class ClutterScene:
    """Набор участков отражений по элементам дальности.

    Массивы azimuths_deg, range_bins и mean_powers имеют одинаковую длину
    и упорядочены по элементу дальности.
    """

    azimuths_deg: np.ndarray
    range_bins: np.ndarray
    mean_powers: np.ndarray
    noise_power: float
    seed: int
    kappa: int

    @property
    def patches(self) -> List[Tuple[float, int, float]]:
        """Участки в виде (азимут, элемент дальности, средняя мощность)."""
        return [
            (float(a), int(b), float(p))
            for a, b, p in zip(self.azimuths_deg, self.range_bins, self.mean_powers)
        ]

    def bin_patches(self, range_bin: int) -> Tuple[np.ndarray, np.ndarray]:
        """Азимуты и мощности участков одного элемента дальности."""
        mask = self.range_bins == range_bin
        return self.azimuths_deg[mask], self.mean_powers[mask]

    def clutter_to_noise_ratio(self, range_bin: Optional[int] = None) -> float:
        """Отношение мощности помехи к мощности шума (линейное).

        Без указания элемента дальности берется среднее по всем элементам.
        """
        if range_bin is None:
            return float(self.mean_powers.sum() / (self.kappa * self.noise_power))
        _, powers = self.bin_patches(range_bin)
        return float(powers.sum() / self.noise_power)


@dataclass(frozen=True)
class RadarReturnSet:
    """Отраженные сигналы Y = β·X + Z по элементам дальности.

    Массивы имеют форму (κ, Λ·L, K); X ненулевой только в элементе цели.
    """

    Y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    target_bin: int
    target: TargetSpec
    n_pulses: int
    channels: int
    gain: float = field(default=1.0)

    @property
    def kappa(self) -> int:
        return int(self.Y.shape[0])

    @property
    def snapshots(self) -> int:
        return int(self.Y.shape[2])

    @property
    def beta(self) -> np.ndarray:
        """Индикатор присутствия цели по элементам дальности."""
        indicator = np.zeros(self.kappa, dtype=int)
        indicator[self.target_bin] = 1
        return indicator


def range_bin_of(config: RadarSiteConfig, range_m: float) -> int:
    """Номер элемента дальности, содержащего дальность range_m."""
    lower = config.r_min_m - config.range_bin_m / 2.0
    index = int(math.floor((range_m - lower) / config.range_bin_m))
    return min(max(index, 0), config.kappa - 1)


def build_clutter_scene(
    config: RadarSiteConfig,
    patches_per_bin: int,
    seed: int,
    channels: Optional[int] = None,
    noise_power: float = 1.0,
) -> ClutterScene:
    """Построение сцены отражений.

    Азимуты участков равномерны на [θ_min, θ_max], мощности экспоненциальны
    и масштабируются так, что в каждом элементе дальности сумма мощностей
    участков равна CNR·σ_n².

    Args:
        config: Параметры радара и зоны обработки
        patches_per_bin: Число участков на элемент дальности
        seed: Seed генератора случайных чисел
        channels: Число каналов L; если задано, требуется patches_per_bin ≥ L
        noise_power: Мощность шума σ_n²

    Returns:
        ClutterScene: Сцена отражений

    Raises:
        ValueError: Для пустой сцены или нечисловых параметров
    """
    if patches_per_bin <= 0:
        raise ValueError("empty clutter scene")
    if channels is not None and patches_per_bin < channels:
        raise ValueError(
            f"Число участков на элемент ({patches_per_bin}) меньше числа каналов L = {channels}"
        )
    if not math.isfinite(config.cnr_db) or not (math.isfinite(noise_power) and noise_power > 0):
        raise ValueError("Недопустимые значения CNR или мощности шума")

    rng = np.random.default_rng(seed)
    azimuths, bins, powers = [], [], []
    for range_bin in range(config.kappa):
        azimuths.append(rng.uniform(config.theta_min_deg, config.theta_max_deg, patches_per_bin))
        weights = rng.exponential(1.0, patches_per_bin)
        powers.append(weights / weights.sum() * config.cnr_linear * noise_power)
        bins.append(np.full(patches_per_bin, range_bin, dtype=np.int64))

    scene = ClutterScene(
        azimuths_deg=np.concatenate(azimuths),
        range_bins=np.concatenate(bins),
        mean_powers=np.concatenate(powers),
        noise_power=float(noise_power),
        seed=int(seed),
        kappa=config.kappa,
    )
    for array in (scene.azimuths_deg, scene.range_bins, scene.mean_powers):
        array.flags.writeable = False

    logger.debug(
        f"SCENARIO: сцена {config.scenario_id} seed={seed}, "
        f"{patches_per_bin} участков на элемент, CNR={config.cnr_db} дБ"
    )
    return scene


def sample_target(
    config: RadarSiteConfig,
    rcs_mean_dbsm: float,
    rcs_spread_dbsm: float,
    vel_range_mps: Optional[Tuple[float, float]],
    rng: np.random.Generator,
) -> TargetSpec:
    """Случайная цель в зоне обработки.

    Дальность равномерна на [r_min − Δr/2, r_max + Δr/2], азимут на
    [θ_min, θ_max], ЭПР на [μ − l/2, μ + l/2], скорость на [v_min, v_max]
    или равна 0, если интервал не задан.
    """
    if rcs_spread_dbsm < 0:
        raise ValueError("Разброс ЭПР не может быть отрицательным")
    if vel_range_mps is not None and not vel_range_mps[0] <= vel_range_mps[1]:
        raise ValueError(f"Неверный интервал скоростей: {vel_range_mps}")
    if config.r_max_m <= config.r_min_m and config.kappa > 1:
        raise ValueError("Вырожденная зона обработки: r_min = r_max при κ > 1")

    half_bin = config.range_bin_m / 2.0
    range_m = rng.uniform(config.r_min_m - half_bin, config.r_max_m + half_bin)
    azimuth_deg = rng.uniform(config.theta_min_deg, config.theta_max_deg)
    rcs_dbsm = rng.uniform(rcs_mean_dbsm - rcs_spread_dbsm / 2.0, rcs_mean_dbsm + rcs_spread_dbsm / 2.0)
    velocity_mps = 0.0 if vel_range_mps is None else rng.uniform(*vel_range_mps)

    return TargetSpec(
        range_m=float(range_m),
        azimuth_deg=float(azimuth_deg),
        velocity_mps=float(velocity_mps),
        rcs_dbsm=float(rcs_dbsm),
    )


def _check_target(config: RadarSiteConfig, target: TargetSpec) -> None:
    half_bin = config.range_bin_m / 2.0
    tol = 1e-9
    inside = (
        config.r_min_m - half_bin - tol <= target.range_m <= config.r_max_m + half_bin + tol
        and config.theta_min_deg - tol <= target.azimuth_deg <= config.theta_max_deg + tol
    )
    if not inside:
        raise ValueError(
            f"target outside processing region: r={target.range_m} м, θ={target.azimuth_deg}°"
        )


def _clutter_block(
    scene: ClutterScene,
    range_bin: int,
    provider: SteeringProvider,
    snapshots: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """K реализаций помехи плюс шум для одного элемента дальности."""
    azimuths, powers = scene.bin_patches(range_bin)
    steering = provider.matrix(azimuths)  # доплер 0: ones(Λ) ⊗ a(θ_p)

    shape = (powers.size, snapshots)
    amplitudes = np.sqrt(powers / 2.0)[:, None] * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

    shape = (provider.dimension, snapshots)
    noise = np.sqrt(scene.noise_power / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

    return steering @ amplitudes + noise


def _target_block(
    target: TargetSpec,
    provider: SteeringProvider,
    gain: float,
    snapshots: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Сигнал цели: столбец k равен α_k·ã(θ*, 0, v*), |α_k|² = gain·10^(RCS/10)."""
    amplitude = math.sqrt(gain * 10.0 ** (target.rcs_dbsm / 10.0))
    phases = np.exp(2j * np.pi * rng.uniform(0.0, 1.0, snapshots))
    steering = provider.vector(target.azimuth_deg, target.velocity_mps).values
    return np.outer(steering, amplitude * phases)


def synthesize_returns(
    scene: ClutterScene,
    target: TargetSpec,
    config: RadarSiteConfig,
    n_pulses: int,
    channels: int,
    snapshots: int,
    gain: float,
    rng: np.random.Generator,
) -> RadarReturnSet:
    """Синтез отраженных сигналов по всем элементам дальности.

    Args:
        scene: Сцена отражений
        target: Цель
        config: Параметры радара и зоны обработки
        n_pulses: Число импульсов Λ
        channels: Число каналов L
        snapshots: Число реализаций K
        gain: Калиброванный коэффициент усиления ЭПР (≥ 0)
        rng: Генератор случайных чисел

    Returns:
        RadarReturnSet: Матрицы Y, X, Z формы (κ, Λ·L, K)

    Raises:
        ValueError: Для неверных размерностей или цели вне зоны обработки
    """
    if snapshots < 1:
        raise ValueError("Число реализаций K должно быть не меньше 1")
    if n_pulses * channels < 2:
        raise ValueError("Размерность Λ·L должна быть не меньше 2")
    if not (math.isfinite(gain) and gain >= 0):
        raise ValueError(f"Недопустимый коэффициент усиления: {gain}")
    if scene.kappa != config.kappa:
        raise ValueError("Число элементов дальности сцены не совпадает с конфигурацией")
    _check_target(config, target)

    provider = SteeringProvider.from_site(config, channels, n_pulses)
    target_bin = range_bin_of(config, target.range_m)

    Z = np.stack([
        _clutter_block(scene, range_bin, provider, snapshots, rng)
        for range_bin in range(config.kappa)
    ])
    X = np.zeros_like(Z)
    X[target_bin] = _target_block(target, provider, gain, snapshots, rng)

    return RadarReturnSet(
        Y=X + Z,
        X=X,
        Z=Z,
        target_bin=target_bin,
        target=target,
        n_pulses=n_pulses,
        channels=channels,
        gain=gain,
    )


def clutter_covariance(
    scene: ClutterScene,
    config: RadarSiteConfig,
    range_bin: int,
    n_pulses: int,
    channels: int,
) -> np.ndarray:
    """Аналитическая ковариация помехи плюс шум для одного элемента дальности."""
    provider = SteeringProvider.from_site(config, channels, n_pulses)
    azimuths, powers = scene.bin_patches(range_bin)
    steering = provider.matrix(azimuths)
    covariance = (steering * powers[None, :]) @ steering.conj().T
    return covariance + scene.noise_power * np.eye(provider.dimension)


def _unit_gain_ratios(
    scene: ClutterScene,
    config: RadarSiteConfig,
    rcs_mean_dbsm: float,
    rcs_spread_dbsm: float,
    trials: int,
    rng: np.random.Generator,
    n_pulses: int,
    channels: int,
    snapshots: int,
    vel_range_mps: Optional[Tuple[float, float]],
) -> np.ndarray:
    """Отношения Tr(X^H Σ̂⁻¹ X) / Tr(Z^H Σ̂⁻¹ Z) при единичном усилении.

    Синтезируется только элемент дальности цели: выходное ОСПШ от
    остальных элементов не зависит.
    """
    provider = SteeringProvider.from_site(config, channels, n_pulses)
    ratios = np.empty(trials)
    for trial in range(trials):
        target = sample_target(config, rcs_mean_dbsm, rcs_spread_dbsm, vel_range_mps, rng)
        Z = _clutter_block(scene, range_bin_of(config, target.range_m), provider, snapshots, rng)
        X = _target_block(target, provider, 1.0, snapshots, rng)
        factor = CovarianceFactor(sample_covariance(Z))
        ratios[trial] = factor.trace_quadratic(X) / factor.trace_quadratic(Z)
    return ratios


def _mean_db(ratios: np.ndarray, gain: float) -> float:
    return float(np.mean(10.0 * np.log10(gain * ratios)))


def mean_output_scnr(
    scene: ClutterScene,
    config: RadarSiteConfig,
    gain: float,
    rcs_mean_dbsm: float,
    trials: int,
    rng: np.random.Generator,
    n_pulses: int = 1,
    channels: int = 16,
    snapshots: int = 100,
    rcs_spread_dbsm: float = 10.0,
    vel_range_mps: Optional[Tuple[float, float]] = None,
) -> float:
    """Среднее по `trials` случайным целям выходное ОСПШ (дБ) при заданном усилении."""
    if not gain > 0:
        raise ValueError("Коэффициент усиления должен быть положительным")
    ratios = _unit_gain_ratios(
        scene, config, rcs_mean_dbsm, rcs_spread_dbsm, trials, rng,
        n_pulses, channels, snapshots, vel_range_mps,
    )
    return _mean_db(ratios, gain)


@debug_timing("SCENARIO: калибровка усиления")
def calibrate_rcs_gain(
    scene: ClutterScene,
    config: RadarSiteConfig,
    target_mean_output_scnr_db: float,
    rcs_mean_dbsm: float,
    trials: int,
    rng: np.random.Generator,
    n_pulses: int = 1,
    channels: int = 16,
    snapshots: int = 100,
    rcs_spread_dbsm: float = 10.0,
    vel_range_mps: Optional[Tuple[float, float]] = None,
    tolerance_db: float = 0.01,
    max_iter: int = 60,
) -> float:
    """Калибровка усиления ЭПР под заданное среднее выходное ОСПШ.

    Отношения следов измеряются один раз при единичном усилении, затем
    бисекцией по log-усилению подбирается значение, при котором среднее
    выходное ОСПШ совпадает с целевым с точностью tolerance_db.

    Args:
        scene: Сцена отражений
        config: Параметры радара и зоны обработки
        target_mean_output_scnr_db: Целевое среднее выходное ОСПШ, дБ
        rcs_mean_dbsm: Среднее ЭПР μ
        trials: Число случайных размещений цели (≥ 100)
        rng: Генератор случайных чисел
        n_pulses: Число импульсов Λ
        channels: Число каналов L
        snapshots: Число реализаций K
        rcs_spread_dbsm: Разброс ЭПР l
        vel_range_mps: Интервал скоростей цели
        tolerance_db: Допуск по ОСПШ, дБ
        max_iter: Предел числа итераций бисекции

    Returns:
        float: Коэффициент усиления

    Raises:
        ValueError: Если trials < 100
        RuntimeError: Если бисекция не сошлась
    """
    if trials < 100:
        raise ValueError("Для калибровки требуется не менее 100 испытаний")

    ratios = _unit_gain_ratios(
        scene, config, rcs_mean_dbsm, rcs_spread_dbsm, trials, rng,
        n_pulses, channels, snapshots, vel_range_mps,
    )

    low_db, high_db = GAIN_SEARCH_DB
    achieved = float("nan")
    for iteration in range(max_iter):
        mid_db = (low_db + high_db) / 2.0
        achieved = _mean_db(ratios, 10.0 ** (mid_db / 10.0))
        if abs(achieved - target_mean_output_scnr_db) <= tolerance_db:
            gain = 10.0 ** (mid_db / 10.0)
            logger.info(
                f"SCENARIO: усиление {gain:.6g} дает среднее выходное ОСПШ "
                f"{achieved:.3f} дБ (цель {target_mean_output_scnr_db} дБ, итераций {iteration + 1})"
            )
            return gain
        if achieved < target_mean_output_scnr_db:
            low_db = mid_db
        else:
            high_db = mid_db

    raise RuntimeError(
        f"Калибровка усиления не сошлась за {max_iter} итераций: "
        f"достигнуто {achieved:.3f} дБ при цели {target_mean_output_scnr_db} дБ"
    )


def displace_scenario(
    config: RadarSiteConfig,
    direction: str,
    scenarios: Optional[Mapping[str, ScenarioGeometry]] = None,
) -> RadarSiteConfig:
    """Конфигурация сценария со смещенной на 1 км платформой.

    Args:
        config: Конфигурация исходного сценария O
        direction: Направление смещения N, W, S или E
        scenarios: Геометрия сценариев; по умолчанию встроенные значения

    Returns:
        RadarSiteConfig: Конфигурация смещенного сценария
    """
    if config.scenario_id != "O":
        raise ValueError(f"Смещение допустимо только из сценария O, получен {config.scenario_id}")
    if direction not in DISPLACEMENT_DIRECTIONS:
        raise ValueError(f"Неизвестное направление смещения: {direction}")

    geometry = (scenarios or DEFAULT_SCENARIOS)[direction]
    return config.with_geometry(geometry, direction)


def scenario_seed(seed: int, scenario_id: str) -> int:
    """Seed сцены отражений, свой для каждого сценария."""
    return derive_seed(seed, ord(scenario_id))
