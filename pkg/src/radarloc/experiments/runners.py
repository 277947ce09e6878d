"""Эксперименты: порог срыва NAMF, перебор ОСПШ и размера выборки, рассогласование сценариев, FSL и доплеровский вариант.

Каждый эксперимент полностью определяется конфигурацией (включая seed)
и записывает CSV в каталог результатов.
"""

import copy
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from more_itertools import chunked

from radarloc.config.schema import SCENARIO_IDS, AppConfig
from radarloc.experiments.dataset import (
    VALIDATION_FRACTION,
    DatasetFile,
    SimulationSetup,
    generate_dataset,
    prepare_simulation,
    read_dataset,
    write_dataset,
)
from radarloc.experiments.reporting import ResultRow, write_csv
from radarloc.nn.checkpoint import load_checkpoint, save_checkpoint
from radarloc.nn.model import RegressionCnn, build_model, count_trainable, freeze_feature_layers
from radarloc.nn.training import EpochRecord, predict_coordinates, train
from radarloc.radar.analysis import (
    breakdown_knee,
    chordal_distance,
    clutter_subspace,
    mismatch_report,
    pooled_clutter_covariance,
)
from radarloc.radar.estimators import ErrorKind, error_vector, gain_factor, local_search, mean_error, peak_cell_midpoint
from radarloc.radar.namf import breakdown_threshold
from radarloc.radar.scenario import DISPLACEMENT_DIRECTIONS, displace_scenario, scenario_seed
from radarloc.utils.core import derive_seed
from radarloc.utils.logging import error_logging, info_timing

logger = logging.getLogger(__name__)

# Потоки seed для разных назначений образцов
TRAIN_STREAM = 10
TEST_STREAM = 11
FSL_STREAM = 12
THRESHOLD_STREAM = 13

EVAL_CHUNK_SIZE = 32

THRESHOLD_COLUMNS = (
    "snapshots", "mean_output_scnr_db", "err_namf_m", "threshold_db",
    "err_namf_az_deg", "achieved_scnr_db",
)
THRESHOLD_KNEE_COLUMNS = ("snapshots", "threshold_db", "knee_scnr_db")
SCNR_SWEEP_COLUMNS = (
    "mean_output_scnr_db", "err_namf_m", "err_ls_az_deg", "err_cnn_m",
    "err_namf_az_deg", "err_cnn_az_deg", "err_ls_m", "gain_factor", "achieved_scnr_db",
)
SIZE_SWEEP_COLUMNS = (
    "n_samples", "err_cnn_m", "err_namf_m",
    "n_train", "err_cnn_az_deg", "err_namf_az_deg", "err_ls_az_deg", "gain_factor",
)
MISMATCH_COLUMNS = (
    "scenario", "err_cnn_m", "err_namf_m", "err_ls_az_deg", "gain_factor", "chordal_distance",
    "err_cnn_az_deg", "err_namf_az_deg", "az_gain_factor",
)
MISMATCH_SUMMARY_COLUMNS = ("experiment", "rank_correlation")
FSL_COLUMNS = MISMATCH_COLUMNS + ("err_cnn_unadapted_m", "err_cnn_unadapted_az_deg", "trainable_parameters")
DOPPLER_COLUMNS = (
    "mean_output_scnr_db", "err_cnn_m", "err_namf_m", "err_ls_v_mps",
    "err_namf_v_mps", "err_cnn_v_mps", "err_ls_az_deg", "gain_factor", "achieved_scnr_db",
)
HISTORY_COLUMNS = ("epoch", "train_loss", "validation_loss")
EVALUATION_COLUMNS = (
    "scenario", "n_evaluated", "err_namf_m", "err_ls_m", "err_cnn_m",
    "err_namf_az_deg", "err_ls_az_deg", "err_cnn_az_deg", "gain_factor",
)
EVALUATION_VELOCITY_COLUMNS = ("err_namf_v_mps", "err_ls_v_mps", "err_cnn_v_mps")


@dataclass(frozen=True)
class ClassicalEstimates:
    """Истинные метки и оценки классических методов (N × label_dim)."""

    labels: np.ndarray
    peak: np.ndarray
    local: Optional[np.ndarray]
    achieved_scnr_db: np.ndarray


def _estimate_chunk(setup: SimulationSetup, indices: List[int], refine: bool) -> List[Tuple[np.ndarray, ...]]:
    results = []
    for index in indices:
        sample, returns = setup.simulate(index)
        peak = peak_cell_midpoint(sample, setup.grid)
        local = local_search(returns, peak, setup.grid, setup.provider).coordinates() if refine else None
        results.append((sample.label, peak.coordinates(), local, sample.mean_output_scnr_db))
    return results


def classical_estimates(
    setup: SimulationSetup, indices: Sequence[int], workers: int = 1, refine: bool = True
) -> ClassicalEstimates:
    """Оценки по максимуму тепловой карты и локальным поиском для образцов `indices`.

    Образцы синтезируются заново по их номерам, поэтому совпадают с
    образцами набора данных, построенного из того же setup.
    """
    chunks = [list(chunk) for chunk in chunked([int(i) for i in indices], EVAL_CHUNK_SIZE)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            parts = list(executor.map(lambda chunk: _estimate_chunk(setup, chunk, refine), chunks))
    else:
        parts = [_estimate_chunk(setup, chunk, refine) for chunk in chunks]

    results = [item for part in parts for item in part]
    return ClassicalEstimates(
        labels=np.stack([item[0] for item in results]),
        peak=np.stack([item[1] for item in results]),
        local=np.stack([item[2] for item in results]) if refine else None,
        achieved_scnr_db=np.asarray([item[3] for item in results], dtype=float),
    )


def estimator_error(truth: np.ndarray, estimates: np.ndarray, kind: ErrorKind) -> float:
    """Средняя ошибка по строкам меток и оценок для выбранного вида вектора."""
    return mean_error(
        (error_vector(t, kind), error_vector(e, kind)) for t, e in zip(truth, estimates)
    )


def evaluate_estimators(
    classical: ClassicalEstimates, cnn: Optional[np.ndarray] = None, velocity: bool = False
) -> Dict[str, float]:
    """Ошибки всех методов по положению, азимуту (и скорости)."""
    truth = classical.labels
    errors = {
        "err_namf_m": estimator_error(truth, classical.peak, ErrorKind.LOCATION),
        "err_namf_az_deg": estimator_error(truth, classical.peak, ErrorKind.AZIMUTH),
    }
    if classical.local is not None:
        errors["err_ls_m"] = estimator_error(truth, classical.local, ErrorKind.LOCATION)
        errors["err_ls_az_deg"] = estimator_error(truth, classical.local, ErrorKind.AZIMUTH)
    if cnn is not None:
        errors["err_cnn_m"] = estimator_error(truth, cnn, ErrorKind.LOCATION)
        errors["err_cnn_az_deg"] = estimator_error(truth, cnn, ErrorKind.AZIMUTH)
    if velocity:
        errors["err_namf_v_mps"] = estimator_error(truth, classical.peak, ErrorKind.VELOCITY)
        if classical.local is not None:
            errors["err_ls_v_mps"] = estimator_error(truth, classical.local, ErrorKind.VELOCITY)
        if cnn is not None:
            errors["err_cnn_v_mps"] = estimator_error(truth, cnn, ErrorKind.VELOCITY)
    return errors


def train_on_dataset(
    app: AppConfig, dataset: DatasetFile, train_indices: Optional[np.ndarray] = None
) -> Tuple[RegressionCnn, List[EpochRecord]]:
    """Обучение сети на обучающей части набора с контролем по проверочной части."""
    indices = dataset.train_indices if train_indices is None else train_indices
    validation = None
    if dataset.validation_indices.size > 0:
        validation = dataset.subset(dataset.validation_indices)

    model = build_model(dataset.grid, seed=app.training.seed)
    return train(model, *dataset.subset(indices), dataset.grid, app.training, validation)


def _scene_seed(app: AppConfig, scenario_id: str) -> int:
    return scenario_seed(app.experiments.seed, scenario_id)


def _setup(
    app: AppConfig,
    scenario_id: str,
    scnr_db: float,
    stream: Tuple[int, ...],
    doppler: bool = False,
    snapshots: Optional[int] = None,
) -> SimulationSetup:
    """Setup с общей для сценария сценой и seed образцов, зависящим от назначения `stream`."""
    site = None
    if scenario_id != "O":
        site = displace_scenario(app.site_config("O"), scenario_id, app.scenarios)
    return prepare_simulation(
        app, scenario_id, scnr_db,
        seed=derive_seed(app.experiments.seed, *stream),
        doppler=doppler,
        snapshots=snapshots,
        site=site,
        scene_seed=_scene_seed(app, scenario_id),
    )


def _output_path(app: AppConfig, output_dir: Optional[Path], name: str) -> Path:
    return Path(output_dir or app.experiments.output_dir) / name


@info_timing("EXPERIMENT: порог срыва NAMF")
def run_threshold_experiment(
    app: AppConfig, output_dir: Optional[Path] = None, workers: int = 1
) -> List[ResultRow]:
    """Ошибка NAMF в зависимости от среднего выходного ОСПШ для каждого K.

    Рядом с кривой записывается асимптотический порог срыва и положение
    наибольшего спада ошибки (threshold_knee.csv).
    """
    exp = app.experiments
    rows, knees = [], []
    n_pulses, channels = app.processing.pulses, app.processing.channels

    for snapshots in exp.threshold_snapshots:
        threshold = breakdown_threshold(n_pulses, channels, snapshots)
        curve = []
        for scnr_db in sorted(exp.scnr_grid_db):
            with error_logging({"experiment": "threshold", "snapshots": snapshots, "scnr_db": scnr_db}):
                setup = _setup(app, exp.scenario, scnr_db, (THRESHOLD_STREAM, snapshots), snapshots=snapshots)
                classical = classical_estimates(setup, range(exp.n_validation), workers, refine=False)
                errors = evaluate_estimators(classical)

            curve.append(errors["err_namf_m"])
            rows.append({
                "snapshots": snapshots,
                "mean_output_scnr_db": scnr_db,
                "err_namf_m": errors["err_namf_m"],
                "threshold_db": threshold,
                "err_namf_az_deg": errors["err_namf_az_deg"],
                "achieved_scnr_db": float(np.mean(classical.achieved_scnr_db)),
            })
            logger.info(f"EXPERIMENT: K={snapshots}, ОСПШ {scnr_db} дБ, Err_NAMF = {errors['err_namf_m']:.2f} м")

        knee = breakdown_knee(sorted(exp.scnr_grid_db), curve) if len(curve) > 1 else float("nan")
        knees.append({"snapshots": snapshots, "threshold_db": threshold, "knee_scnr_db": knee})

    write_csv(_output_path(app, output_dir, "threshold.csv"), THRESHOLD_COLUMNS, rows)
    write_csv(_output_path(app, output_dir, "threshold_knee.csv"), THRESHOLD_KNEE_COLUMNS, knees)
    return rows


def _matched_point(
    app: AppConfig, scnr_db: float, workers: int, doppler: bool = False
) -> Tuple[Dict[str, float], float]:
    """Набор данных, обучение и оценка всех методов в одной точке ОСПШ."""
    exp = app.experiments
    setup = _setup(app, exp.scenario, scnr_db, (TRAIN_STREAM,), doppler=doppler)
    dataset = generate_dataset(setup, exp.n_samples, workers)
    model, _ = train_on_dataset(app, dataset)

    indices = dataset.validation_indices if dataset.validation_indices.size else dataset.train_indices
    classical = classical_estimates(setup, indices, workers)
    cnn = predict_coordinates(model, dataset.tensors[indices], dataset.grid)
    errors = evaluate_estimators(classical, cnn, velocity=doppler)
    return errors, float(np.mean(dataset.achieved_scnr_db[indices]))


@info_timing("EXPERIMENT: перебор ОСПШ")
def run_scnr_sweep(app: AppConfig, output_dir: Optional[Path] = None, workers: int = 1) -> List[ResultRow]:
    """Ошибки NAMF, локального поиска и CNN в каждой точке сетки ОСПШ."""
    rows = []
    for scnr_db in app.experiments.scnr_grid_db:
        with error_logging({"experiment": "scnr_sweep", "scnr_db": scnr_db}):
            errors, achieved = _matched_point(app, scnr_db, workers)
        rows.append({
            "mean_output_scnr_db": scnr_db,
            **errors,
            "gain_factor": gain_factor(errors["err_namf_m"], errors["err_cnn_m"]),
            "achieved_scnr_db": achieved,
        })
        logger.info(
            f"EXPERIMENT: ОСПШ {scnr_db} дБ, Err_NAMF = {errors['err_namf_m']:.2f} м, "
            f"Err_CNN = {errors['err_cnn_m']:.2f} м"
        )

    write_csv(_output_path(app, output_dir, "scnr_sweep.csv"), SCNR_SWEEP_COLUMNS, rows)
    return rows


@info_timing("EXPERIMENT: перебор размера выборки")
def run_size_sweep(app: AppConfig, output_dir: Optional[Path] = None, workers: int = 1) -> List[ResultRow]:
    """Ошибка CNN в зависимости от размера набора данных N.

    Все размеры берутся из одного набора максимального размера и
    оцениваются на его общей проверочной части.
    """
    exp = app.experiments
    setup = _setup(app, exp.scenario, exp.reference_scnr_db, (TRAIN_STREAM,))
    pool = generate_dataset(setup, max(exp.size_grid), workers)
    validation = pool.validation_indices
    if validation.size == 0:
        raise ValueError("Для перебора размера выборки нужен хотя бы один проверочный образец")

    classical = classical_estimates(setup, validation, workers)
    train_pool = pool.train_indices

    rows = []
    for n_samples in sorted(exp.size_grid):
        n_train = max(1, int(round(n_samples * (1.0 - VALIDATION_FRACTION))))
        with error_logging({"experiment": "size_sweep", "n_samples": n_samples}):
            model, _ = train_on_dataset(app, pool, train_pool[:n_train])
            cnn = predict_coordinates(model, pool.tensors[validation], pool.grid)
            errors = evaluate_estimators(classical, cnn)
        rows.append({
            "n_samples": n_samples,
            "n_train": n_train,
            **errors,
            "gain_factor": gain_factor(errors["err_namf_m"], errors["err_cnn_m"]),
        })
        logger.info(f"EXPERIMENT: N = {n_samples}, Err_CNN = {errors['err_cnn_m']:.2f} м")

    write_csv(_output_path(app, output_dir, "size_sweep.csv"), SIZE_SWEEP_COLUMNS, rows)
    return rows


@dataclass
class MismatchContext:
    """Сеть, обученная на сценарии O, и тестовые наборы всех сценариев."""

    model: RegressionCnn
    setups: Dict[str, SimulationSetup]
    datasets: Dict[str, DatasetFile]
    classical: Dict[str, ClassicalEstimates]
    distances: Dict[str, float]


def prepare_mismatch(app: AppConfig, workers: int = 1) -> MismatchContext:
    """Обучение на сценарии O, тестовые наборы 0.1·N для O, N, W, S, E и хордовые расстояния."""
    exp = app.experiments
    processing = app.processing

    train_setup = _setup(app, "O", exp.reference_scnr_db, (TRAIN_STREAM,))
    model, _ = train_on_dataset(app, generate_dataset(train_setup, exp.n_samples, workers))

    n_test = max(1, exp.n_samples // 10)
    reference = clutter_subspace(
        pooled_clutter_covariance(train_setup.scene, train_setup.site, processing.pulses, processing.channels),
        train_setup.scene.noise_power,
        source_scenario="O",
    )

    setups, datasets, classical, distances = {}, {}, {}, {}
    for scenario_id in SCENARIO_IDS:
        setup = _setup(app, scenario_id, exp.reference_scnr_db, (TEST_STREAM,))
        setups[scenario_id] = setup
        datasets[scenario_id] = generate_dataset(setup, n_test, workers)
        classical[scenario_id] = classical_estimates(setup, range(n_test), workers)

        subspace = clutter_subspace(
            pooled_clutter_covariance(setup.scene, setup.site, processing.pulses, processing.channels),
            setup.scene.noise_power,
            source_scenario=scenario_id,
        )
        distances[scenario_id] = chordal_distance(reference, subspace)
        logger.info(f"EXPERIMENT: хордовое расстояние O-{scenario_id}: {distances[scenario_id]:.4f}")

    return MismatchContext(model, setups, datasets, classical, distances)


def _mismatch_row(
    scenario_id: str, context: MismatchContext, model: RegressionCnn
) -> Tuple[ResultRow, Dict[str, float]]:
    """Оценка сети на тестовом наборе сценария.

    Нормированные предсказания переводятся в координаты сетки сценария:
    это аффинное отображение области исходного сценария на смещенную.
    """
    dataset = context.datasets[scenario_id]
    cnn = predict_coordinates(model, dataset.tensors, dataset.grid)
    errors = evaluate_estimators(context.classical[scenario_id], cnn)
    row = {
        "scenario": scenario_id,
        "err_cnn_m": errors["err_cnn_m"],
        "err_namf_m": errors["err_namf_m"],
        "err_ls_az_deg": errors["err_ls_az_deg"],
        "gain_factor": gain_factor(errors["err_namf_m"], errors["err_cnn_m"]),
        "chordal_distance": context.distances[scenario_id],
        "err_cnn_az_deg": errors["err_cnn_az_deg"],
        "err_namf_az_deg": errors["err_namf_az_deg"],
        "az_gain_factor": gain_factor(errors["err_namf_az_deg"], errors["err_cnn_az_deg"]),
    }
    return row, errors


@info_timing("EXPERIMENT: рассогласование сценариев")
def run_mismatch_experiment(
    app: AppConfig,
    output_dir: Optional[Path] = None,
    workers: int = 1,
    context: Optional[MismatchContext] = None,
) -> List[ResultRow]:
    """Сеть, обученная на O, проверяется на всех пяти сценариях."""
    context = context or prepare_mismatch(app, workers)

    rows = [_mismatch_row(scenario_id, context, context.model)[0] for scenario_id in SCENARIO_IDS]
    report = mismatch_report(
        list(SCENARIO_IDS),
        {row["scenario"]: row["err_cnn_m"] for row in rows},
        {row["scenario"]: row["err_namf_m"] for row in rows},
        context.distances,
    )

    write_csv(_output_path(app, output_dir, "mismatch.csv"), MISMATCH_COLUMNS, rows)
    write_csv(
        _output_path(app, output_dir, "mismatch_summary.csv"),
        MISMATCH_SUMMARY_COLUMNS,
        [{"experiment": "mismatch", "rank_correlation": report.rank_correlation}],
    )
    return rows


def fine_tune(app: AppConfig, model: RegressionCnn, shots: DatasetFile) -> RegressionCnn:
    """Копия сети с замороженными признаковыми слоями, дообученная на малой выборке."""
    adapted = freeze_feature_layers(copy.deepcopy(model))
    adapted, _ = train(
        adapted, shots.tensors, shots.labels, shots.grid, app.training,
        validation=None, epochs=app.experiments.fsl_epochs,
    )
    return adapted


@info_timing("EXPERIMENT: дообучение на малой выборке")
def run_fsl_experiment(
    app: AppConfig,
    output_dir: Optional[Path] = None,
    workers: int = 1,
    context: Optional[MismatchContext] = None,
) -> List[ResultRow]:
    """Дообучение полносвязных слоев на fsl_shots образцах каждого смещенного сценария."""
    exp = app.experiments
    context = context or prepare_mismatch(app, workers)

    rows = []
    for scenario_id in DISPLACEMENT_DIRECTIONS:
        with error_logging({"experiment": "fsl", "scenario": scenario_id}):
            unadapted, unadapted_errors = _mismatch_row(scenario_id, context, context.model)

            shots_setup = _setup(app, scenario_id, exp.reference_scnr_db, (FSL_STREAM,))
            shots = generate_dataset(shots_setup, exp.fsl_shots, workers)
            adapted = fine_tune(app, context.model, shots)
            row, _ = _mismatch_row(scenario_id, context, adapted)

        row.update({
            "err_cnn_unadapted_m": unadapted["err_cnn_m"],
            "err_cnn_unadapted_az_deg": unadapted_errors["err_cnn_az_deg"],
            "trainable_parameters": count_trainable(adapted),
        })
        rows.append(row)
        logger.info(
            f"EXPERIMENT: сценарий {scenario_id}, Err_CNN до дообучения {unadapted['err_cnn_m']:.2f} м, "
            f"после {row['err_cnn_m']:.2f} м"
        )

    report = mismatch_report(
        list(DISPLACEMENT_DIRECTIONS),
        {row["scenario"]: row["err_cnn_m"] for row in rows},
        {row["scenario"]: row["err_namf_m"] for row in rows},
        context.distances,
    )
    write_csv(_output_path(app, output_dir, "fsl.csv"), FSL_COLUMNS, rows)
    write_csv(
        _output_path(app, output_dir, "fsl_summary.csv"),
        MISMATCH_SUMMARY_COLUMNS,
        [{"experiment": "fsl", "rank_correlation": report.rank_correlation}],
    )
    return rows


@info_timing("EXPERIMENT: доплеровский вариант")
def run_doppler_experiment(app: AppConfig, output_dir: Optional[Path] = None, workers: int = 1) -> List[ResultRow]:
    """Доплеровская сеть на тензорах κ×A×V: ошибки положения и скорости."""
    rows = []
    for scnr_db in app.experiments.scnr_grid_db:
        with error_logging({"experiment": "doppler", "scnr_db": scnr_db}):
            errors, achieved = _matched_point(app, scnr_db, workers, doppler=True)
        rows.append({
            "mean_output_scnr_db": scnr_db,
            **errors,
            "gain_factor": gain_factor(errors["err_namf_m"], errors["err_cnn_m"]),
            "achieved_scnr_db": achieved,
        })
        logger.info(
            f"EXPERIMENT: ОСПШ {scnr_db} дБ, Err_NAMF = {errors['err_namf_m']:.2f} м, "
            f"(Err_LS)_v = {errors['err_ls_v_mps']:.3f} м/с"
        )

    write_csv(_output_path(app, output_dir, "doppler.csv"), DOPPLER_COLUMNS, rows)
    return rows


def run_generate(
    app: AppConfig,
    output_dir: Optional[Path] = None,
    workers: int = 1,
    doppler: bool = False,
    scnr_db: Optional[float] = None,
) -> Path:
    """Генерация набора данных для сценария из конфигурации и запись в dataset.rlhm."""
    exp = app.experiments
    scnr_db = exp.reference_scnr_db if scnr_db is None else scnr_db
    setup = prepare_simulation(app, exp.scenario, scnr_db, exp.seed, doppler=doppler)
    dataset = generate_dataset(setup, exp.n_samples, workers)
    return write_dataset(dataset, _output_path(app, output_dir, "dataset.rlhm"))


def run_train(app: AppConfig, dataset_path: Path, output_dir: Optional[Path] = None) -> Path:
    """Обучение сети на сохраненном наборе; контрольная точка model.rlnn и история history.csv."""
    dataset = read_dataset(dataset_path)
    model, history = train_on_dataset(app, dataset)
    write_csv(
        _output_path(app, output_dir, "history.csv"),
        HISTORY_COLUMNS,
        [
            {
                "epoch": entry.epoch,
                "train_loss": entry.train_loss,
                "validation_loss": entry.validation_loss if entry.validation_loss is not None else float("nan"),
            }
            for entry in history
        ],
    )
    return save_checkpoint(model, _output_path(app, output_dir, "model.rlnn"))


def run_evaluate(
    app: AppConfig,
    dataset_path: Path,
    checkpoint_path: Path,
    output_dir: Optional[Path] = None,
    workers: int = 1,
) -> List[ResultRow]:
    """Оценка сети и классических методов на проверочной части сохраненного набора.

    Образцы для локального поиска синтезируются заново по seed из заголовка
    набора, поэтому конфигурация должна совпадать с использованной при генерации.
    """
    dataset = read_dataset(dataset_path)
    model = load_checkpoint(checkpoint_path)
    if model.input_shape != dataset.grid.shape:
        raise ValueError(f"Вход сети {model.input_shape} не совпадает с набором данных {dataset.grid.shape}")

    setup = prepare_simulation(
        app, dataset.scenario_id, dataset.nominal_scnr_db, dataset.seed, doppler=dataset.grid.has_velocity
    )
    indices = dataset.validation_indices if dataset.validation_indices.size else dataset.train_indices
    classical = classical_estimates(setup, indices, workers)
    if not np.allclose(classical.labels, dataset.labels[indices]):
        raise ValueError("Набор данных не воспроизводится текущей конфигурацией")

    cnn = predict_coordinates(model, dataset.tensors[indices], dataset.grid)
    velocity = dataset.grid.has_velocity
    errors = evaluate_estimators(classical, cnn, velocity=velocity)
    rows = [{
        "scenario": dataset.scenario_id,
        "n_evaluated": int(len(indices)),
        **errors,
        "gain_factor": gain_factor(errors["err_namf_m"], errors["err_cnn_m"]),
    }]
    columns = EVALUATION_COLUMNS + (EVALUATION_VELOCITY_COLUMNS if velocity else ())
    write_csv(_output_path(app, output_dir, "evaluation.csv"), columns, rows)
    return rows
