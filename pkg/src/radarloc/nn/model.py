"""Регрессионные сверточные сети для оценки положения цели по тепловой карте.

Базовая сеть работает с картами κ×A, доплеровская с тензорами κ×A×V.
Свертки и подвыборка действуют вдоль азимута (и скорости), но не вдоль
дальности: при κ = 5 второй каскад вдоль дальности не помещается.
"""

import logging
from typing import Dict, Optional, Sequence, Tuple

import torch
from torch import nn

from radarloc.radar.namf import HeatmapGrid

logger = logging.getLogger(__name__)

DEFAULT_CHANNELS = (32, 64)
BASELINE_HIDDEN = 4
DOPPLER_HIDDEN = 13

MODEL_KINDS = ("baseline", "doppler")


def _stage_output(size: int) -> int:
    """Размер после свертки ширины 3 и подвыборки 2."""
    return (size - 2) // 2


class RegressionCnn(nn.Module):
    """Каскады conv → ReLU → BatchNorm → MaxPool, затем два полносвязных слоя."""

    def __init__(
        self,
        input_shape: Tuple[int, ...],
        channels: Sequence[int] = DEFAULT_CHANNELS,
        hidden: int = BASELINE_HIDDEN,
        output_dim: int = 2,
        seed: int = 0,
    ):
        super().__init__()
        if len(input_shape) not in (2, 3):
            raise ValueError(f"Ожидается вход κ×A или κ×A×V, получено {input_shape}")
        if not channels or hidden < 1 or output_dim < 1:
            raise ValueError("Число карт признаков, скрытых нейронов и выходов должно быть положительным")

        self.input_shape = tuple(int(s) for s in input_shape)
        self.channels = tuple(int(c) for c in channels)
        self.hidden = int(hidden)
        self.output_dim = int(output_dim)
        self.kind = "doppler" if len(input_shape) == 3 else "baseline"
        self.features_frozen = False
        self.pending_backward = False

        volumetric = self.kind == "doppler"
        conv = nn.Conv3d if volumetric else nn.Conv2d
        norm = nn.BatchNorm3d if volumetric else nn.BatchNorm2d
        pool = nn.MaxPool3d if volumetric else nn.MaxPool2d
        kernel = (1, 3, 3) if volumetric else (1, 3)
        window = (1, 2, 2) if volumetric else (1, 2)

        spatial = list(self.input_shape[1:])
        layers = []
        in_channels = 1
        for out_channels in self.channels:
            layers += [
                conv(in_channels, out_channels, kernel),
                nn.ReLU(),
                norm(out_channels, momentum=0.1),
                pool(window),
            ]
            spatial = [_stage_output(s) for s in spatial]
            if min(spatial) < 1:
                raise ValueError(
                    f"Сетка {self.input_shape} слишком мала для {len(self.channels)} каскадов свертки"
                )
            in_channels = out_channels

        flat = self.channels[-1] * self.input_shape[0]
        for s in spatial:
            flat *= s

        self.features = nn.Sequential(*layers)
        self.regressor = nn.Sequential(
            nn.Flatten(),
            nn.Linear(flat, self.hidden),
            nn.ReLU(),
            nn.Linear(self.hidden, self.output_dim),
        )
        self.reset_parameters(seed)

    def reset_parameters(self, seed: int) -> None:
        """Инициализация Ксавье (равномерная) для весов, нулевые смещения."""
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            for module in self.modules():
                if isinstance(module, (nn.Conv2d, nn.Conv3d, nn.Linear)):
                    nn.init.xavier_uniform_(module.weight)
                    nn.init.zeros_(module.bias)

    def train(self, mode: bool = True) -> "RegressionCnn":
        super().train(mode)
        if self.features_frozen:
            # замороженные слои нормализации всегда используют накопленную статистику
            self.features.eval()
        return self

    def forward(self, batch: torch.Tensor) -> torch.Tensor:
        return self.regressor(self.features(batch.unsqueeze(1)))


def build_baseline_cnn(
    grid: HeatmapGrid,
    seed: int = 0,
    channels: Sequence[int] = DEFAULT_CHANNELS,
    hidden: int = BASELINE_HIDDEN,
) -> RegressionCnn:
    """Базовая сеть для карт κ×A с двумя выходами (r, θ)."""
    if grid.has_velocity:
        raise ValueError("Базовая сеть требует сетку без оси скорости")
    model = RegressionCnn(grid.shape, channels, hidden, output_dim=2, seed=seed)
    logger.info(f"NN: базовая сеть для входа {grid.shape}, обучаемых параметров: {count_trainable(model)}")
    return model


def build_doppler_cnn(
    grid: HeatmapGrid,
    seed: int = 0,
    channels: Sequence[int] = DEFAULT_CHANNELS,
    hidden: int = DOPPLER_HIDDEN,
) -> RegressionCnn:
    """Доплеровская сеть для тензоров κ×A×V с тремя выходами (r, θ, v)."""
    if not grid.has_velocity:
        raise ValueError("Доплеровская сеть требует сетку с осью скорости")
    model = RegressionCnn(grid.shape, channels, hidden, output_dim=3, seed=seed)
    logger.info(f"NN: доплеровская сеть для входа {grid.shape}, обучаемых параметров: {count_trainable(model)}")
    return model


def build_model(grid: HeatmapGrid, seed: int = 0) -> RegressionCnn:
    """Сеть подходящего вида для сетки."""
    if grid.has_velocity:
        return build_doppler_cnn(grid, seed)
    return build_baseline_cnn(grid, seed)


def forward(model: RegressionCnn, batch: torch.Tensor, mode: str = "infer") -> torch.Tensor:
    """Прямой проход в режиме обучения или вывода.

    Args:
        model: Сеть
        batch: Пакет тензоров формы (B, *input_shape)
        mode: "train" (статистика пакета, обновление накопленной) или "infer"

    Returns:
        torch.Tensor: Нормированные предсказания (B, output_dim)

    Raises:
        ValueError: При несовпадении формы или неизвестном режиме
        FloatingPointError: При появлении NaN/Inf
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"Неизвестный режим: {mode}")
    if tuple(batch.shape[1:]) != model.input_shape:
        raise ValueError(f"Форма пакета {tuple(batch.shape)} не совпадает с входом {model.input_shape}")

    if mode == "train":
        model.train()
        output = model(batch)
    else:
        model.eval()
        with torch.no_grad():
            output = model(batch)

    if not torch.isfinite(output).all():
        model.pending_backward = False
        raise FloatingPointError("numerical divergence")

    model.pending_backward = mode == "train"
    return output


def freeze_feature_layers(model: RegressionCnn) -> RegressionCnn:
    """Заморозка сверточных слоев и слоев нормализации (включая накопленную статистику)."""
    for parameter in model.features.parameters():
        parameter.requires_grad_(False)
    model.features_frozen = True
    model.train(model.training)
    logger.info(f"NN: признаковые слои заморожены, обучаемых параметров: {count_trainable(model)}")
    return model


def count_trainable(model: nn.Module) -> int:
    """Число обучаемых параметров (накопленная статистика не учитывается)."""
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def parameter_snapshot(model: nn.Module, frozen_only: bool = False) -> Dict[str, torch.Tensor]:
    """Копия параметров и буферов для сравнения до и после обучения."""
    snapshot = {}
    for name, tensor in model.state_dict().items():
        if frozen_only and not name.startswith("features."):
            continue
        snapshot[name] = tensor.detach().clone()
    return snapshot


def model_dtype(model: nn.Module) -> Optional[torch.dtype]:
    for parameter in model.parameters():
        return parameter.dtype
    return None
