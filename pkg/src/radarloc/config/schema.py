"""Схема валидации конфигурации приложения."""

import logging
import math
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

logger = logging.getLogger(__name__)

# Скорость света, принятая в расчетах (дает Δr = 30 м ровно при B = 5 МГц)
SPEED_OF_LIGHT_MPS = 3.0e8

ScenarioId = Literal["O", "N", "W", "S", "E"]
ExperimentTag = Literal["threshold", "scnr_sweep", "size_sweep", "mismatch", "fsl", "doppler"]

SCENARIO_IDS: Tuple[str, ...] = ("O", "N", "W", "S", "E")


class ScenarioGeometry(BaseModel):
    """Геометрия зоны обработки одного сценария."""

    model_config = ConfigDict(frozen=True)

    platform_latlon: Tuple[float, float]
    r_min_m: float = Field(..., gt=0)
    r_max_m: float = Field(..., gt=0)
    theta_min_deg: float
    theta_max_deg: float

    @model_validator(mode="after")
    def check_bounds(self) -> "ScenarioGeometry":
        """Проверка порядка границ зоны обработки."""
        if self.r_max_m < self.r_min_m:
            raise ValueError("r_max_m должен быть не меньше r_min_m")
        if self.theta_max_deg <= self.theta_min_deg:
            raise ValueError("theta_max_deg должен быть больше theta_min_deg")
        return self


# Исходный сценарий и смещения платформы на 1 км
DEFAULT_SCENARIOS: Dict[str, ScenarioGeometry] = {
    "O": ScenarioGeometry(platform_latlon=(32.4005, -117.1993), r_min_m=14553.0,
                          r_max_m=14673.0, theta_min_deg=20.0, theta_max_deg=30.0),
    "N": ScenarioGeometry(platform_latlon=(32.4095, -117.1993), r_min_m=13800.0,
                          r_max_m=13920.0, theta_min_deg=20.0, theta_max_deg=30.0),
    "W": ScenarioGeometry(platform_latlon=(32.4005, -117.2099), r_min_m=15207.0,
                          r_max_m=15327.0, theta_min_deg=20.0, theta_max_deg=30.0),
    "S": ScenarioGeometry(platform_latlon=(32.3915, -117.1993), r_min_m=15321.0,
                          r_max_m=15441.0, theta_min_deg=20.0, theta_max_deg=30.0),
    "E": ScenarioGeometry(platform_latlon=(32.4005, -117.1887), r_min_m=13921.0,
                          r_max_m=14041.0, theta_min_deg=20.0, theta_max_deg=30.0),
}


class SiteConfig(BaseModel):
    """Общие параметры площадки и радара."""

    model_config = ConfigDict(frozen=True)

    carrier_freq_hz: float = Field(10.0e9, gt=0)
    bandwidth_hz: float = Field(5.0e6, gt=0)
    prf_hz: float = Field(1100.0, gt=0)
    array_h: int = Field(48, gt=0)
    array_v: int = Field(5, gt=0)
    element_spacing_m: float = Field(0.015, gt=0)
    platform_height_m: float = Field(1000.0, gt=0)


class RadarSiteConfig(BaseModel):
    """Параметры радара и геометрия зоны обработки одного сценария.

    Объединяет общие параметры площадки с геометрией сценария и числом
    элементов дальности κ. Значения неизменяемы после создания.
    """

    model_config = ConfigDict(frozen=True)

    carrier_freq_hz: float = Field(10.0e9, gt=0)
    bandwidth_hz: float = Field(5.0e6, gt=0)
    prf_hz: float = Field(1100.0, gt=0)
    array_h: int = Field(48, gt=0)
    array_v: int = Field(5, gt=0)
    element_spacing_m: float = Field(0.015, gt=0)
    platform_height_m: float = Field(1000.0, gt=0)
    platform_latlon: Tuple[float, float] = (32.4005, -117.1993)
    r_min_m: float = Field(14553.0, gt=0)
    r_max_m: float = Field(14673.0, gt=0)
    theta_min_deg: float = 20.0
    theta_max_deg: float = 30.0
    kappa: int = Field(5, ge=1)
    cnr_db: float = 20.0
    scenario_id: ScenarioId = "O"

    @field_validator("*")
    @classmethod
    def check_finite(cls, value: Any) -> Any:
        """Все числовые значения должны быть конечными."""
        values = value if isinstance(value, tuple) else (value,)
        for item in values:
            if isinstance(item, float) and not math.isfinite(item):
                raise ValueError(f"Недопустимое нечисловое значение: {item}")
        return value

    @model_validator(mode="after")
    def check_region(self) -> "RadarSiteConfig":
        """Проверка согласованности зоны обработки с шагом по дальности."""
        if self.theta_max_deg <= self.theta_min_deg:
            raise ValueError("theta_max_deg должен быть больше theta_min_deg")

        expected = (self.kappa - 1) * self.range_bin_m
        extent = self.r_max_m - self.r_min_m
        if abs(extent - expected) > 1e-6 * max(1.0, expected):
            raise ValueError(
                f"r_max - r_min = {extent} м не равно (kappa - 1) * Δr = {expected} м"
            )
        return self

    @property
    def range_bin_m(self) -> float:
        """Размер элемента дальности Δr = c / 2B."""
        return SPEED_OF_LIGHT_MPS / (2.0 * self.bandwidth_hz)

    @property
    def wavelength_m(self) -> float:
        """Длина волны λ = c / f_c."""
        return SPEED_OF_LIGHT_MPS / self.carrier_freq_hz

    @property
    def cnr_linear(self) -> float:
        return 10.0 ** (self.cnr_db / 10.0)

    def with_geometry(self, geometry: ScenarioGeometry, scenario_id: str) -> "RadarSiteConfig":
        """Копия конфигурации с геометрией другого сценария."""
        return self.model_copy(update={
            "platform_latlon": geometry.platform_latlon,
            "r_min_m": geometry.r_min_m,
            "r_max_m": geometry.r_max_m,
            "theta_min_deg": geometry.theta_min_deg,
            "theta_max_deg": geometry.theta_max_deg,
            "scenario_id": scenario_id,
        })


class ProcessingConfig(BaseModel):
    """Параметры обработки: подрешетки, импульсы, реализации, сетка."""

    kappa: int = Field(5, ge=1)
    pulses: int = Field(1, ge=1)
    channels: int = Field(16, ge=1)
    snapshots: int = Field(100, ge=1)
    theta_step_deg: float = Field(0.4, gt=0)
    velocity_min_mps: float = 175.0
    velocity_max_mps: float = 190.0
    velocity_step_mps: float = Field(0.5, gt=0)
    cnr_db: float = 20.0
    patches_per_bin: int = Field(32, ge=1)
    rcs_mean_dbsm: float = 0.0
    rcs_spread_dbsm: float = Field(10.0, ge=0)
    calibration_trials: int = Field(200, ge=100)

    @model_validator(mode="after")
    def check_velocity_interval(self) -> "ProcessingConfig":
        """Интервал скоростей должен быть непустым."""
        if self.velocity_max_mps <= self.velocity_min_mps:
            raise ValueError("velocity_max_mps должен быть больше velocity_min_mps")
        return self


class TrainConfig(BaseModel):
    """Гиперпараметры обучения регрессионной CNN."""

    learning_rate: float = Field(1e-3, gt=0)
    weight_decay: float = Field(1e-3, ge=0)
    adam_beta1: float = Field(0.9, gt=0, lt=1)
    adam_beta2: float = Field(0.999, gt=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    batch_size: int = Field(128, ge=1)
    epochs: int = Field(100, ge=1)
    seed: int = Field(0, ge=0)
    early_stop_patience: int = Field(10, ge=1)


class ExperimentConfig(BaseModel):
    """Параметры серии экспериментов."""

    experiment: Optional[ExperimentTag] = None
    scenario: ScenarioId = "O"
    n_samples: int = Field(10000, ge=1)
    n_validation: int = Field(2000, ge=1)
    seed: int = Field(0, ge=0)
    scnr_grid_db: List[float] = Field(
        default_factory=lambda: [-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]
    )
    size_grid: List[int] = Field(default_factory=lambda: [1000, 2000, 5000, 10000])
    threshold_snapshots: List[int] = Field(default_factory=lambda: [100, 500])
    reference_scnr_db: float = 20.0
    fsl_shots: int = Field(64, ge=1)
    fsl_epochs: int = Field(50, ge=1)
    doppler_pulses: int = Field(4, ge=1)
    doppler_snapshots: int = Field(400, ge=1)
    output_dir: str = "results"

    @field_validator("scnr_grid_db", "size_grid", "threshold_snapshots")
    @classmethod
    def check_nonempty(cls, value: List[Any]) -> List[Any]:
        """Сетки перебора не могут быть пустыми."""
        if not value:
            raise ValueError("Сетка перебора не может быть пустой")
        return value

    @field_validator("size_grid", "threshold_snapshots")
    @classmethod
    def check_positive(cls, value: List[int]) -> List[int]:
        if any(item <= 0 for item in value):
            raise ValueError("Все значения сетки должны быть положительными")
        return value


class AppConfig(BaseModel):
    """Основная модель конфигурации приложения."""

    site: SiteConfig = Field(default_factory=SiteConfig)
    scenarios: Dict[str, ScenarioGeometry] = Field(
        default_factory=lambda: dict(DEFAULT_SCENARIOS)
    )
    processing: ProcessingConfig = Field(default_factory=ProcessingConfig)
    training: TrainConfig = Field(default_factory=TrainConfig)
    experiments: ExperimentConfig = Field(default_factory=ExperimentConfig)

    @field_validator("scenarios")
    @classmethod
    def check_scenarios(cls, value: Dict[str, ScenarioGeometry]) -> Dict[str, ScenarioGeometry]:
        """Сценарии дополняются значениями по умолчанию."""
        unknown = set(value) - set(SCENARIO_IDS)
        if unknown:
            raise ValueError(f"Неизвестные сценарии: {sorted(unknown)}")
        return {**DEFAULT_SCENARIOS, **value}

    def site_config(self, scenario_id: str = "O") -> RadarSiteConfig:
        """Сборка RadarSiteConfig для выбранного сценария."""
        if scenario_id not in self.scenarios:
            raise ValueError(f"Сценарий не найден: {scenario_id}")
        geometry = self.scenarios[scenario_id]
        return RadarSiteConfig(
            carrier_freq_hz=self.site.carrier_freq_hz,
            bandwidth_hz=self.site.bandwidth_hz,
            prf_hz=self.site.prf_hz,
            array_h=self.site.array_h,
            array_v=self.site.array_v,
            element_spacing_m=self.site.element_spacing_m,
            platform_height_m=self.site.platform_height_m,
            platform_latlon=geometry.platform_latlon,
            r_min_m=geometry.r_min_m,
            r_max_m=geometry.r_max_m,
            theta_min_deg=geometry.theta_min_deg,
            theta_max_deg=geometry.theta_max_deg,
            kappa=self.processing.kappa,
            cnr_db=self.processing.cnr_db,
            scenario_id=scenario_id,
        )


def validate_config(config_data: Dict[str, Any]) -> AppConfig:
    """Валидация конфигурации по схеме.

    Args:
        config_data: Данные конфигурации для проверки

    Returns:
        AppConfig: Проверенная конфигурация

    Raises:
        ValueError: Если конфигурация не соответствует схеме
    """
    try:
        return AppConfig(**(config_data or {}))
    except Exception as e:
        logger.error(f"Ошибка валидации конфигурации: {str(e)}")
        raise ValueError(f"Ошибка валидации конфигурации: {str(e)}")
