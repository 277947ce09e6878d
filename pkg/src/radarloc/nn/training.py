"""Функция потерь, шаг оптимизации, обучение и предсказание регрессионной сети."""

import copy
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch
from torch.utils.data import DataLoader, TensorDataset

from radarloc.config.schema import TrainConfig
from radarloc.nn.model import RegressionCnn, forward, model_dtype
from radarloc.radar.estimators import Estimate, EstimateMethod
from radarloc.radar.namf import HeatmapGrid, HeatmapSample

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 512


@dataclass(frozen=True)
class EpochRecord:
    """Потери на обучающей и проверочной выборках после эпохи (эпоха 0 до обучения)."""

    epoch: int
    train_loss: float
    validation_loss: Optional[float]


def euclidean_loss(pred: torch.Tensor, truth: torch.Tensor) -> torch.Tensor:
    """Среднее евклидово расстояние (1/B)·Σ‖pred_b − truth_b‖.

    В точке pred = truth используется нулевой субградиент.
    """
    if pred.shape != truth.shape or pred.dim() != 2:
        raise ValueError(f"Несовпадение форм: {tuple(pred.shape)} и {tuple(truth.shape)}")
    squared = torch.sum((pred - truth) ** 2, dim=1)
    tiny = torch.finfo(pred.dtype).tiny
    distance = torch.where(squared > 0, torch.sqrt(squared.clamp_min(tiny)), torch.zeros_like(squared))
    return distance.mean()


def backward(model: RegressionCnn, loss: torch.Tensor) -> Dict[str, torch.Tensor]:
    """Обратное распространение; градиенты только для незамороженных параметров.

    Raises:
        RuntimeError: Если не было прямого прохода в режиме обучения
    """
    if not model.pending_backward:
        raise RuntimeError("backward без предшествующего прямого прохода в режиме обучения")
    model.zero_grad(set_to_none=True)
    loss.backward()
    model.pending_backward = False
    return {
        name: parameter.grad
        for name, parameter in model.named_parameters()
        if parameter.requires_grad and parameter.grad is not None
    }


def make_optimizer(model: RegressionCnn, config: TrainConfig) -> torch.optim.Adam:
    """Adam с L2-регуляризацией в градиенте (weight_decay в torch.optim.Adam)."""
    return torch.optim.Adam(
        [p for p in model.parameters() if p.requires_grad],
        lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2),
        eps=config.adam_eps,
        weight_decay=config.weight_decay,
    )


def adam_step(model: RegressionCnn, optimizer: torch.optim.Optimizer, step_index: int) -> RegressionCnn:
    """Один шаг Adam с коррекцией смещения моментов; замороженные параметры не меняются."""
    if step_index < 1:
        raise ValueError("Номер шага должен начинаться с 1")
    optimizer.step()
    return model


def _as_tensor(values: np.ndarray, dtype: torch.dtype) -> torch.Tensor:
    return torch.as_tensor(np.ascontiguousarray(values), dtype=dtype)


def evaluate_loss(model: RegressionCnn, inputs: torch.Tensor, targets: torch.Tensor) -> float:
    """Средняя евклидова потеря в режиме вывода."""
    total = 0.0
    for start in range(0, inputs.shape[0], EVAL_BATCH_SIZE):
        stop = start + EVAL_BATCH_SIZE
        output = forward(model, inputs[start:stop], mode="infer")
        total += float(euclidean_loss(output, targets[start:stop])) * output.shape[0]
    return total / inputs.shape[0]


def train(
    model: RegressionCnn,
    tensors: np.ndarray,
    labels: np.ndarray,
    grid: HeatmapGrid,
    config: TrainConfig,
    validation: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    epochs: Optional[int] = None,
) -> Tuple[RegressionCnn, List[EpochRecord]]:
    """Обучение сети на тепловых картах.

    Метки нормируются в [0, 1] по границам сетки. Пакеты перемешиваются
    генератором с seed из конфигурации. Возвращается снимок с наименьшей
    потерей на проверочной выборке (без нее на обучающей).

    Args:
        model: Сеть
        tensors: Тепловые карты (N, *grid.shape)
        labels: Физические метки (N, label_dim)
        grid: Сетка тепловой карты
        config: Гиперпараметры обучения
        validation: Проверочные тепловые карты и метки
        epochs: Число эпох вместо config.epochs

    Returns:
        Tuple[RegressionCnn, List[EpochRecord]]: Лучший снимок и история

    Raises:
        ValueError: Для пустого набора данных
        FloatingPointError: При расхождении обучения (с номером эпохи)
    """
    if len(tensors) == 0:
        raise ValueError("Пустой обучающий набор данных")
    if len(tensors) != len(labels):
        raise ValueError("Число тепловых карт и меток не совпадает")

    dtype = model_dtype(model) or torch.float32
    inputs = _as_tensor(tensors, dtype)
    targets = _as_tensor(grid.normalize_label(labels), dtype)

    val_inputs = val_targets = None
    if validation is not None and len(validation[0]) > 0:
        val_inputs = _as_tensor(validation[0], dtype)
        val_targets = _as_tensor(grid.normalize_label(validation[1]), dtype)

    batch_size = min(config.batch_size, len(inputs))
    generator = torch.Generator().manual_seed(config.seed)
    loader = DataLoader(TensorDataset(inputs, targets), batch_size=batch_size, shuffle=True, generator=generator)
    optimizer = make_optimizer(model, config)
    n_epochs = epochs if epochs is not None else config.epochs

    def record(epoch: int) -> EpochRecord:
        train_loss = evaluate_loss(model, inputs, targets)
        val_loss = evaluate_loss(model, val_inputs, val_targets) if val_inputs is not None else None
        return EpochRecord(epoch=epoch, train_loss=train_loss, validation_loss=val_loss)

    def monitored(entry: EpochRecord) -> float:
        return entry.validation_loss if entry.validation_loss is not None else entry.train_loss

    history = [record(0)]
    best_loss = monitored(history[0])
    best_state = copy.deepcopy(model.state_dict())
    since_best = 0
    step_index = 0

    for epoch in range(1, n_epochs + 1):
        try:
            for batch_inputs, batch_targets in loader:
                output = forward(model, batch_inputs, mode="train")
                loss = euclidean_loss(output, batch_targets)
                if not torch.isfinite(loss):
                    raise FloatingPointError("numerical divergence")
                backward(model, loss)
                step_index += 1
                adam_step(model, optimizer, step_index)
            entry = record(epoch)
        except FloatingPointError as e:
            raise FloatingPointError(f"Расхождение обучения на эпохе {epoch}: {e}") from e

        history.append(entry)
        logger.debug(
            f"TRAIN: эпоха {epoch}, потеря обучения {entry.train_loss:.6f}, "
            f"проверки {entry.validation_loss if entry.validation_loss is not None else '-'}"
        )

        if monitored(entry) < best_loss:
            best_loss = monitored(entry)
            best_state = copy.deepcopy(model.state_dict())
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.early_stop_patience:
                logger.info(f"TRAIN: ранняя остановка на эпохе {epoch}")
                break

    model.load_state_dict(best_state)
    logger.info(f"TRAIN: обучение завершено, лучшая потеря {best_loss:.6f} за {len(history) - 1} эпох")
    return model, history


def predict_normalized(model: RegressionCnn, tensors: np.ndarray) -> np.ndarray:
    """Нормированные предсказания сети для набора тепловых карт."""
    dtype = model_dtype(model) or torch.float32
    inputs = _as_tensor(tensors, dtype)
    outputs = [
        forward(model, inputs[start:start + EVAL_BATCH_SIZE], mode="infer")
        for start in range(0, inputs.shape[0], EVAL_BATCH_SIZE)
    ]
    return torch.cat(outputs).double().numpy()


def to_estimate(coordinates: np.ndarray) -> Estimate:
    return Estimate(
        range_m=float(coordinates[0]),
        azimuth_deg=float(coordinates[1]),
        velocity_mps=float(coordinates[2]) if coordinates.shape[0] > 2 else None,
        method=EstimateMethod.CNN,
    )


def predict_denormalized(model: RegressionCnn, sample: HeatmapSample, grid: HeatmapGrid) -> Estimate:
    """Оценка сети в физических координатах с ограничением границами сетки."""
    normalized = predict_normalized(model, np.asarray(sample.values)[None, ...])[0]
    return to_estimate(grid.denormalize_label(normalized))


def predict_coordinates(model: RegressionCnn, tensors: np.ndarray, grid: HeatmapGrid) -> np.ndarray:
    """Физические предсказания (N, label_dim) для набора тепловых карт."""
    return grid.denormalize_label(predict_normalized(model, tensors))
