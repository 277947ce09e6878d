"""Генерация наборов тепловых карт и бинарный формат "RLHM".

Формат (little-endian): магия "RLHM", версия u16, число образцов u32,
размерности тензора (u8 + u32...), размерность метки u8, сценарий (1 байт),
seed u64, номинальное ОСПШ f64, сетка (8 × f64, NaN без оси скорости).
Манифест: число проверочных образцов u32, их индексы u32, достигнутое
ОСПШ каждого образца f64. Далее образцы: тензор '<f4', метка '<f8'.
"""

import io
import logging
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from more_itertools import chunked

from radarloc.config.schema import AppConfig, RadarSiteConfig
from radarloc.radar.namf import CovarianceFactor, HeatmapGrid, HeatmapSample, heatmap, output_scnr, sample_covariance
from radarloc.radar.scenario import (
    ClutterScene,
    RadarReturnSet,
    build_clutter_scene,
    calibrate_rcs_gain,
    sample_target,
    scenario_seed,
    synthesize_returns,
)
from radarloc.radar.steering import SteeringProvider
from radarloc.utils.core import derive_seed, human_readable_size, make_rng
from radarloc.utils.logging import log_timing

logger = logging.getLogger(__name__)

MAGIC = b"RLHM"
VERSION = 1

VALIDATION_FRACTION = 0.1
CHUNK_SIZE = 64

# Номера независимых потоков случайных чисел
SAMPLE_STREAM = 0
CALIBRATION_STREAM = 1
SPLIT_STREAM = 2


@dataclass(frozen=True)
class SimulationSetup:
    """Все, что нужно для детерминированного синтеза образца по его номеру."""

    site: RadarSiteConfig
    scene: ClutterScene
    grid: HeatmapGrid
    provider: SteeringProvider
    snapshots: int
    gain: float
    nominal_scnr_db: float
    seed: int
    rcs_mean_dbsm: float
    rcs_spread_dbsm: float
    vel_range_mps: Optional[Tuple[float, float]] = None

    @property
    def n_pulses(self) -> int:
        return self.provider.n_pulses

    @property
    def channels(self) -> int:
        return self.provider.channels

    def simulate(self, index: int) -> Tuple[HeatmapSample, RadarReturnSet]:
        """Синтез образца `index`: цель, сигналы, тепловая карта.

        Ошибки синтеза повторно выбрасываются с номером образца.
        """
        try:
            rng = make_rng(self.seed, SAMPLE_STREAM, index)
            target = sample_target(self.site, self.rcs_mean_dbsm, self.rcs_spread_dbsm, self.vel_range_mps, rng)
            returns = synthesize_returns(
                self.scene, target, self.site, self.n_pulses, self.channels, self.snapshots, self.gain, rng
            )
            factor = CovarianceFactor(sample_covariance(returns.Z[returns.target_bin]))
            achieved = output_scnr(returns.X[returns.target_bin], returns.Z[returns.target_bin], factor)
            sample = heatmap(
                returns, self.grid, self.provider,
                scenario_id=self.site.scenario_id,
                mean_output_scnr_db=achieved,
                seed=derive_seed(self.seed, SAMPLE_STREAM, index),
            )
        except (ValueError, ArithmeticError, RuntimeError) as e:
            raise type(e)(f"образец {index}: {e}") from e
        return sample, returns


@dataclass
class DatasetFile:
    """Набор тепловых карт с метками и манифестом разбиения."""

    tensors: np.ndarray
    labels: np.ndarray
    achieved_scnr_db: np.ndarray
    validation_indices: np.ndarray
    scenario_id: str
    seed: int
    nominal_scnr_db: float
    grid: HeatmapGrid

    def __post_init__(self) -> None:
        self.tensors = np.asarray(self.tensors, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        self.achieved_scnr_db = np.asarray(self.achieved_scnr_db, dtype=np.float64)
        self.validation_indices = np.asarray(self.validation_indices, dtype=np.int64)
        count = self.tensors.shape[0]
        if self.labels.shape[0] != count or self.achieved_scnr_db.shape[0] != count:
            raise ValueError("Число тензоров, меток и значений ОСПШ не совпадает")
        if self.tensors.shape[1:] != self.grid.shape:
            raise ValueError(f"Форма тензоров {self.tensors.shape[1:]} не совпадает с сеткой {self.grid.shape}")

    @property
    def n_samples(self) -> int:
        return int(self.tensors.shape[0])

    @property
    def train_indices(self) -> np.ndarray:
        mask = np.ones(self.n_samples, dtype=bool)
        mask[self.validation_indices] = False
        return np.flatnonzero(mask)

    def subset(self, indices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Тензоры и метки для набора индексов."""
        return self.tensors[indices], self.labels[indices]


def prepare_simulation(
    app: AppConfig,
    scenario_id: str,
    nominal_scnr_db: float,
    seed: int,
    doppler: bool = False,
    snapshots: Optional[int] = None,
    site: Optional[RadarSiteConfig] = None,
    scene_seed: Optional[int] = None,
) -> SimulationSetup:
    """Сцена, сетка и калиброванное усиление для сценария.

    Args:
        app: Конфигурация приложения
        scenario_id: Сценарий O, N, W, S или E
        nominal_scnr_db: Целевое среднее выходное ОСПШ, дБ
        seed: Глобальный seed серии образцов
        doppler: Доплеровский вариант (Λ импульсов, ось скорости)
        snapshots: Число реализаций K вместо значения из конфигурации
        site: Готовая конфигурация площадки вместо app.site_config(scenario_id)
        scene_seed: Seed сцены отражений; по умолчанию производный от seed и сценария

    Returns:
        SimulationSetup: Параметры синтеза
    """
    processing = app.processing
    site = site or app.site_config(scenario_id)

    velocity = None
    vel_range = None
    if doppler:
        n_pulses = app.experiments.doppler_pulses
        snapshots = snapshots or app.experiments.doppler_snapshots
        velocity = (processing.velocity_min_mps, processing.velocity_max_mps, processing.velocity_step_mps)
        vel_range = (processing.velocity_min_mps, processing.velocity_max_mps)
    else:
        n_pulses = processing.pulses
        snapshots = snapshots or processing.snapshots

    if scene_seed is None:
        scene_seed = scenario_seed(seed, site.scenario_id)
    scene = build_clutter_scene(site, processing.patches_per_bin, scene_seed, processing.channels)
    grid = HeatmapGrid.from_config(site, processing.theta_step_deg, velocity)
    provider = SteeringProvider.from_site(site, processing.channels, n_pulses)

    gain = calibrate_rcs_gain(
        scene, site, nominal_scnr_db, processing.rcs_mean_dbsm, processing.calibration_trials,
        make_rng(seed, CALIBRATION_STREAM),
        n_pulses=n_pulses,
        channels=processing.channels,
        snapshots=snapshots,
        rcs_spread_dbsm=processing.rcs_spread_dbsm,
        vel_range_mps=vel_range,
    )

    return SimulationSetup(
        site=site,
        scene=scene,
        grid=grid,
        provider=provider,
        snapshots=snapshots,
        gain=gain,
        nominal_scnr_db=float(nominal_scnr_db),
        seed=int(seed),
        rcs_mean_dbsm=processing.rcs_mean_dbsm,
        rcs_spread_dbsm=processing.rcs_spread_dbsm,
        vel_range_mps=vel_range,
    )


def _simulate_chunk(setup: SimulationSetup, indices: List[int]) -> List[Tuple[np.ndarray, np.ndarray, float]]:
    results = []
    for index in indices:
        sample, _ = setup.simulate(index)
        results.append((sample.values.astype(np.float32), sample.label, sample.mean_output_scnr_db))
    return results


def split_indices(n_samples: int, seed: int) -> np.ndarray:
    """Отсортированные индексы проверочной выборки (10 % образцов)."""
    n_validation = int(n_samples * VALIDATION_FRACTION)
    permutation = make_rng(seed, SPLIT_STREAM).permutation(n_samples)
    return np.sort(permutation[:n_validation])


def generate_dataset(setup: SimulationSetup, n_samples: int, workers: int = 1) -> DatasetFile:
    """Генерация N независимых образцов.

    Образцы синтезируются в пуле потоков блоками; у каждого образца свой
    поток случайных чисел, поэтому результат не зависит от числа потоков.

    Args:
        setup: Параметры синтеза
        n_samples: Число образцов N
        workers: Число потоков

    Returns:
        DatasetFile: Набор данных с разбиением 90/10
    """
    if n_samples < 1:
        raise ValueError("Число образцов должно быть положительным")

    chunks = [list(chunk) for chunk in chunked(range(n_samples), CHUNK_SIZE)]
    with log_timing(f"DATASET: генерация {n_samples} образцов сценария {setup.site.scenario_id}"):
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                parts = list(executor.map(lambda chunk: _simulate_chunk(setup, chunk), chunks))
        else:
            parts = [_simulate_chunk(setup, chunk) for chunk in chunks]

    results = [item for part in parts for item in part]
    return DatasetFile(
        tensors=np.stack([values for values, _, _ in results]),
        labels=np.stack([label for _, label, _ in results]),
        achieved_scnr_db=np.asarray([scnr for _, _, scnr in results]),
        validation_indices=split_indices(n_samples, setup.seed),
        scenario_id=setup.site.scenario_id,
        seed=setup.seed,
        nominal_scnr_db=setup.nominal_scnr_db,
        grid=setup.grid,
    )


def _grid_values(grid: HeatmapGrid) -> Tuple[float, ...]:
    nan = float("nan")
    return (
        grid.r_min_m, grid.range_bin_m, grid.theta_min_deg, grid.theta_step_deg, grid.theta_max_deg,
        grid.v_min_mps if grid.has_velocity else nan,
        grid.v_step_mps if grid.has_velocity else nan,
        grid.v_max_mps if grid.has_velocity else nan,
    )


def encode_dataset(dataset: DatasetFile) -> bytes:
    """Сериализация набора данных в байты формата RLHM."""
    stream = io.BytesIO()
    dims = dataset.tensors.shape[1:]
    stream.write(MAGIC)
    stream.write(struct.pack("<HI", VERSION, dataset.n_samples))
    stream.write(struct.pack("<B", len(dims)))
    stream.write(struct.pack(f"<{len(dims)}I", *dims))
    stream.write(struct.pack("<B", dataset.labels.shape[1]))
    stream.write(dataset.scenario_id.encode("ascii")[:1])
    stream.write(struct.pack("<Qd", dataset.seed, dataset.nominal_scnr_db))
    stream.write(struct.pack("<8d", *_grid_values(dataset.grid)))

    stream.write(struct.pack("<I", dataset.validation_indices.size))
    stream.write(dataset.validation_indices.astype("<u4").tobytes())
    stream.write(dataset.achieved_scnr_db.astype("<f8").tobytes())

    for tensor, label in zip(dataset.tensors, dataset.labels):
        stream.write(tensor.astype("<f4").tobytes())
        stream.write(label.astype("<f8").tobytes())

    return stream.getvalue()


def decode_dataset(data: bytes) -> DatasetFile:
    """Восстановление набора данных из байтов формата RLHM.

    Raises:
        ValueError: При неверной сигнатуре, версии или несоответствии размера
    """
    stream = io.BytesIO(data)

    def read(fmt: str):
        size = struct.calcsize(fmt)
        chunk = stream.read(size)
        if len(chunk) != size:
            raise ValueError("Набор данных обрезан")
        return struct.unpack(fmt, chunk)

    if stream.read(4) != MAGIC:
        raise ValueError("Неверная сигнатура набора данных (ожидается RLHM)")
    version, count = read("<HI")
    if version != VERSION:
        raise ValueError(f"Неподдерживаемая версия набора данных: {version}")
    (ndim,) = read("<B")
    dims = read(f"<{ndim}I")
    (label_dim,) = read("<B")
    scenario_id = stream.read(1).decode("ascii")
    seed, nominal = read("<Qd")
    r_min, r_step, t_min, t_step, t_max, v_min, v_step, v_max = read("<8d")

    (n_validation,) = read("<I")
    validation = np.frombuffer(stream.read(4 * n_validation), dtype="<u4").astype(np.int64)
    achieved = np.frombuffer(stream.read(8 * count), dtype="<f8").astype(np.float64)
    if validation.size != n_validation or achieved.size != count:
        raise ValueError("Манифест набора данных обрезан")

    tensor_size = int(np.prod(dims))
    record = np.dtype([("tensor", "<f4", (tensor_size,)), ("label", "<f8", (label_dim,))])
    payload = stream.read()
    if len(payload) != count * record.itemsize:
        raise ValueError(
            f"Размер данных {len(payload)} не соответствует заявленному числу образцов {count}"
        )
    records = np.frombuffer(payload, dtype=record)

    velocity_fields = {}
    if not math.isnan(v_min):
        velocity_fields = dict(v_min_mps=v_min, v_step_mps=v_step, n_velocity=int(dims[2]), v_max_mps=v_max)
    grid = HeatmapGrid(
        r_min_m=r_min, range_bin_m=r_step, kappa=int(dims[0]),
        theta_min_deg=t_min, theta_step_deg=t_step, n_azimuth=int(dims[1]), theta_max_deg=t_max,
        **velocity_fields,
    )

    return DatasetFile(
        tensors=records["tensor"].reshape((count,) + tuple(dims)).astype(np.float32),
        labels=records["label"].astype(np.float64),
        achieved_scnr_db=achieved,
        validation_indices=validation,
        scenario_id=scenario_id,
        seed=int(seed),
        nominal_scnr_db=float(nominal),
        grid=grid,
    )


def write_dataset(dataset: DatasetFile, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_dataset(dataset)
    path.write_bytes(data)
    logger.info(f"DATASET: записано {dataset.n_samples} образцов в {path} ({human_readable_size(len(data))})")
    return path


def read_dataset(path: Union[str, Path]) -> DatasetFile:
    return decode_dataset(Path(path).read_bytes())
