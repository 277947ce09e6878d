"""Выборочная ковариация, статистика NAMF, тепловые карты и выходное ОСПШ."""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigvalsh

from radarloc.config.schema import RadarSiteConfig
from radarloc.radar.steering import SpaceTimeSteeringVector, SteeringProvider

if TYPE_CHECKING:
    from radarloc.radar.scenario import RadarReturnSet

logger = logging.getLogger(__name__)

# Относительный порог минимального собственного значения
SINGULARITY_FLOOR = 1e-12

SteeringLike = Union[SpaceTimeSteeringVector, np.ndarray]


@dataclass(frozen=True)
class HeatmapGrid:
    """Сетка тепловой карты: элементы дальности × азимуты [× скорости].

    Азимуты берутся в точках θ_min + j·Δθ (включая θ_max), дальность в
    серединах элементов r_min + i·Δr.
    """

    r_min_m: float
    range_bin_m: float
    kappa: int
    theta_min_deg: float
    theta_step_deg: float
    n_azimuth: int
    theta_max_deg: float
    v_min_mps: Optional[float] = None
    v_step_mps: Optional[float] = None
    n_velocity: Optional[int] = None
    v_max_mps: Optional[float] = None

    @classmethod
    def from_config(
        cls,
        config: RadarSiteConfig,
        theta_step_deg: float,
        velocity: Optional[Tuple[float, float, float]] = None,
    ) -> "HeatmapGrid":
        """Сетка для зоны обработки.

        Args:
            config: Параметры радара и зоны обработки
            theta_step_deg: Шаг по азимуту Δθ
            velocity: (v_min, v_max, Δv) для доплеровского варианта

        Returns:
            HeatmapGrid: Сетка тепловой карты
        """
        if not theta_step_deg > 0:
            raise ValueError("Шаг по азимуту должен быть положительным")
        extent = config.theta_max_deg - config.theta_min_deg
        n_azimuth = int(math.floor(extent / theta_step_deg + 1e-9)) + 1

        v_fields = {}
        if velocity is not None:
            v_min, v_max, v_step = velocity
            if not (v_step > 0 and v_max > v_min):
                raise ValueError(f"Неверная сетка скоростей: {velocity}")
            v_fields = dict(
                v_min_mps=float(v_min),
                v_step_mps=float(v_step),
                n_velocity=int(math.floor((v_max - v_min) / v_step + 1e-9)) + 1,
                v_max_mps=float(v_max),
            )

        return cls(
            r_min_m=config.r_min_m,
            range_bin_m=config.range_bin_m,
            kappa=config.kappa,
            theta_min_deg=config.theta_min_deg,
            theta_step_deg=float(theta_step_deg),
            n_azimuth=n_azimuth,
            theta_max_deg=config.theta_max_deg,
            **v_fields,
        )

    @property
    def has_velocity(self) -> bool:
        return self.n_velocity is not None

    @property
    def shape(self) -> Tuple[int, ...]:
        if self.has_velocity:
            return (self.kappa, self.n_azimuth, self.n_velocity)
        return (self.kappa, self.n_azimuth)

    @property
    def label_dim(self) -> int:
        return 3 if self.has_velocity else 2

    @property
    def r_max_m(self) -> float:
        return self.r_min_m + (self.kappa - 1) * self.range_bin_m

    def range_centers(self) -> np.ndarray:
        return self.r_min_m + np.arange(self.kappa) * self.range_bin_m

    def azimuths(self) -> np.ndarray:
        return self.theta_min_deg + np.arange(self.n_azimuth) * self.theta_step_deg

    def velocities(self) -> np.ndarray:
        if not self.has_velocity:
            return np.zeros(1)
        return self.v_min_mps + np.arange(self.n_velocity) * self.v_step_mps

    def cell_size(self) -> np.ndarray:
        """Размер ячейки по каждой координате метки."""
        sizes = [self.range_bin_m, self.theta_step_deg]
        if self.has_velocity:
            sizes.append(self.v_step_mps)
        return np.asarray(sizes)

    def label_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Границы меток: дальность по краям крайних элементов, азимут и скорость по сетке."""
        half = self.range_bin_m / 2.0
        lower = [self.r_min_m - half, self.theta_min_deg]
        upper = [self.r_max_m + half, self.theta_max_deg]
        if self.has_velocity:
            lower.append(self.v_min_mps)
            upper.append(self.v_max_mps)
        return np.asarray(lower), np.asarray(upper)

    def normalize_label(self, label: np.ndarray) -> np.ndarray:
        """Перевод меток (r, θ[, v]) в [0, 1] по каждой координате."""
        lower, upper = self.label_bounds()
        return (np.asarray(label, dtype=float) - lower) / (upper - lower)

    def denormalize_label(self, normalized: np.ndarray, clamp: bool = True) -> np.ndarray:
        """Обратное преобразование нормированных меток с ограничением границами сетки."""
        lower, upper = self.label_bounds()
        normalized = np.asarray(normalized, dtype=float)
        if clamp:
            normalized = np.clip(normalized, 0.0, 1.0)
        return lower + normalized * (upper - lower)


@dataclass(frozen=True)
class HeatmapSample:
    """Тензор статистик NAMF κ×A[×V] с истинной меткой (r*, θ*[, v*])."""

    values: np.ndarray
    label: np.ndarray
    scenario_id: str = "O"
    mean_output_scnr_db: float = float("nan")
    seed: int = 0

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Тепловая карта содержит нечисловые значения")


def sample_covariance(Z: np.ndarray) -> np.ndarray:
    """Выборочная ковариация Z·Z^H / K, строго эрмитова."""
    Z = np.asarray(Z)
    if Z.ndim != 2 or Z.shape[1] < 1:
        raise ValueError("Ожидается матрица Λ·L × K с K ≥ 1")
    covariance = Z @ Z.conj().T / Z.shape[1]
    return (covariance + covariance.conj().T) / 2.0


class CovarianceFactor:
    """Разложение Холецкого эрмитовой ковариации для многократного решения Σ̂⁻¹·B."""

    def __init__(self, covariance: np.ndarray):
        covariance = np.asarray(covariance)
        if covariance.ndim != 2 or covariance.shape[0] != covariance.shape[1]:
            raise ValueError("Ковариационная матрица должна быть квадратной")

        eigenvalues = eigvalsh(covariance)
        if eigenvalues[-1] <= 0 or eigenvalues[0] <= SINGULARITY_FLOOR * eigenvalues[-1]:
            raise LinAlgError("singular covariance: need K ≥ ΛL samples")

        try:
            self._factor = cho_factor(covariance, lower=True)
        except LinAlgError as e:
            raise LinAlgError(f"singular covariance: need K ≥ ΛL samples ({e})") from e

        self.dimension = covariance.shape[0]

    @classmethod
    def from_returns(cls, Z: np.ndarray) -> "CovarianceFactor":
        return cls(sample_covariance(Z))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Σ̂⁻¹·rhs без явного обращения."""
        return cho_solve(self._factor, rhs)

    def trace_quadratic(self, B: np.ndarray) -> float:
        """Tr(B^H Σ̂⁻¹ B)."""
        return float(np.real(np.sum(B.conj() * self.solve(B))))


def _as_factor(covariance: Union[np.ndarray, CovarianceFactor]) -> CovarianceFactor:
    if isinstance(covariance, CovarianceFactor):
        return covariance
    return CovarianceFactor(covariance)


def _as_vector(steering: SteeringLike) -> np.ndarray:
    if isinstance(steering, SpaceTimeSteeringVector):
        return steering.values
    return np.asarray(steering)


def namf_statistic(
    Y: np.ndarray,
    covariance: Union[np.ndarray, CovarianceFactor],
    steering: SteeringLike,
) -> float:
    """Статистика NAMF.

    Γ = ‖ã^H Σ̂⁻¹ Y‖² / ((ã^H Σ̂⁻¹ ã) · ‖diag(Y^H Σ̂⁻¹ Y)‖).

    Args:
        Y: Матрица сигналов Λ·L × K
        covariance: Ковариация Σ̂ или ее разложение
        steering: Управляющий вектор ã

    Returns:
        float: Неотрицательное значение статистики; 0 для нулевой матрицы Y

    Raises:
        LinAlgError: Если Σ̂ вырождена
        ValueError: При несогласованных размерностях
    """
    factor = _as_factor(covariance)
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    a = _as_vector(steering)
    if Y.shape[0] != factor.dimension or a.shape[0] != factor.dimension:
        raise ValueError(
            f"Несогласованные размерности: Y {Y.shape}, ã {a.shape}, Σ̂ {factor.dimension}"
        )

    whitened = factor.solve(Y)
    numerator = np.sum(np.abs(a.conj() @ whitened) ** 2)
    steering_norm = np.real(a.conj() @ factor.solve(a))
    data_norm = np.linalg.norm(np.real(np.sum(Y.conj() * whitened, axis=0)))
    if data_norm == 0.0:
        return 0.0
    return float(numerator / (steering_norm * data_norm))


def _bin_statistics(Y: np.ndarray, factor: CovarianceFactor, steering: np.ndarray) -> np.ndarray:
    """Статистика NAMF по всем столбцам матрицы управляющих векторов."""
    whitened = factor.solve(Y)
    numerator = np.sum(np.abs(steering.conj().T @ whitened) ** 2, axis=1)
    steering_norm = np.real(np.sum(steering.conj() * factor.solve(steering), axis=0))
    data_norm = np.linalg.norm(np.real(np.sum(Y.conj() * whitened, axis=0)))
    if data_norm == 0.0:
        return np.zeros(steering.shape[1])
    return numerator / (steering_norm * data_norm)


def heatmap(
    returns: "RadarReturnSet",
    grid: HeatmapGrid,
    steering_provider: SteeringProvider,
    scenario_id: str = "O",
    mean_output_scnr_db: float = float("nan"),
    seed: int = 0,
) -> HeatmapSample:
    """Тепловая карта статистик NAMF по сетке.

    Ковариация каждого элемента дальности оценивается по его матрице Z и
    раскладывается один раз на весь перебор по сетке.

    Args:
        returns: Отраженные сигналы
        grid: Сетка тепловой карты
        steering_provider: Источник управляющих векторов
        scenario_id: Метка сценария
        mean_output_scnr_db: Номинальное среднее выходное ОСПШ
        seed: Seed образца

    Returns:
        HeatmapSample: Тензор κ×A[×V] и метка цели
    """
    if returns.kappa != grid.kappa:
        raise ValueError(f"Число элементов дальности {returns.kappa} не совпадает с сеткой {grid.kappa}")
    if returns.Y.shape[1] != steering_provider.dimension:
        raise ValueError("Размерность сигналов не совпадает с управляющими векторами")

    steering = steering_provider.matrix(grid.azimuths(), grid.velocities())
    values = np.stack([
        _bin_statistics(returns.Y[range_bin], CovarianceFactor.from_returns(returns.Z[range_bin]), steering)
        for range_bin in range(grid.kappa)
    ]).reshape(grid.shape)

    target = returns.target
    label = [target.range_m, target.azimuth_deg]
    if grid.has_velocity:
        label.append(target.velocity_mps)

    return HeatmapSample(
        values=values,
        label=np.asarray(label, dtype=float),
        scenario_id=scenario_id,
        mean_output_scnr_db=mean_output_scnr_db,
        seed=seed,
    )


def output_scnr(
    X: np.ndarray, Z: np.ndarray, covariance: Union[np.ndarray, CovarianceFactor]
) -> float:
    """Выходное ОСПШ 10·log10(Tr(X^H Σ̂⁻¹ X) / Tr(Z^H Σ̂⁻¹ Z)), дБ."""
    factor = _as_factor(covariance)
    denominator = factor.trace_quadratic(np.asarray(Z))
    if not denominator > 0:
        raise ValueError("Нулевой след в знаменателе выходного ОСПШ")
    numerator = factor.trace_quadratic(np.asarray(X))
    if numerator <= 0:
        return float("-inf")
    return float(10.0 * np.log10(numerator / denominator))


def breakdown_threshold(n_pulses: int, channels: int, snapshots: int) -> float:
    """Асимптотический порог срыва ОСПШ 10·log10(sqrt(Λ·L / K)), дБ."""
    if min(n_pulses, channels, snapshots) < 1:
        raise ValueError("Все размерности должны быть не меньше 1")
    return float(10.0 * np.log10(np.sqrt(n_pulses * channels / snapshots)))
