"""Бинарный формат контрольной точки сети "RLNN".

Заголовок: магия, версия, вид сети, форма входа, карты признаков, ширина
скрытого слоя, число выходов, исходный тип весов. Далее для каждого
тензора state_dict: имя, вид (параметр/буфер), флаг заморозки, тип и
форма, затем данные little-endian ('<f8' для вещественных, '<i8' для
целых). Одинаковые модели дают побайтно одинаковые файлы.
"""

import io
import logging
import struct
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np
import torch

from radarloc.nn.model import MODEL_KINDS, RegressionCnn, freeze_feature_layers, model_dtype

logger = logging.getLogger(__name__)

MAGIC = b"RLNN"
VERSION = 1

TENSOR_PARAMETER = 0
TENSOR_BUFFER = 1

DTYPE_CODES = {0: np.dtype("<f8"), 1: np.dtype("<i8")}
MODEL_DTYPES = {0: torch.float32, 1: torch.float64}


def _write(stream: BinaryIO, fmt: str, *values) -> None:
    stream.write(struct.pack("<" + fmt, *values))


def _read(stream: BinaryIO, fmt: str):
    size = struct.calcsize("<" + fmt)
    chunk = stream.read(size)
    if len(chunk) != size:
        raise ValueError("Контрольная точка обрезана")
    return struct.unpack("<" + fmt, chunk)


def _write_shape(stream: BinaryIO, shape) -> None:
    _write(stream, "B", len(shape))
    for dim in shape:
        _write(stream, "I", int(dim))


def _read_shape(stream: BinaryIO) -> tuple:
    (ndim,) = _read(stream, "B")
    return tuple(_read(stream, "I")[0] for _ in range(ndim))


def encode_checkpoint(model: RegressionCnn) -> bytes:
    """Сериализация сети в байты формата RLNN."""
    stream = io.BytesIO()
    stream.write(MAGIC)
    _write(stream, "H", VERSION)
    _write(stream, "B", MODEL_KINDS.index(model.kind))
    _write_shape(stream, model.input_shape)
    _write_shape(stream, model.channels)
    _write(stream, "II", model.hidden, model.output_dim)
    _write(stream, "B", 1 if model_dtype(model) == torch.float64 else 0)

    parameters = dict(model.named_parameters())
    state = model.state_dict()
    _write(stream, "I", len(state))
    for name, tensor in state.items():
        encoded = name.encode("utf-8")
        _write(stream, "H", len(encoded))
        stream.write(encoded)

        is_parameter = name in parameters
        frozen = is_parameter and not parameters[name].requires_grad
        integral = not torch.is_floating_point(tensor)
        _write(stream, "BBB", TENSOR_BUFFER if not is_parameter else TENSOR_PARAMETER, int(frozen), int(integral))
        _write_shape(stream, tuple(tensor.shape))

        payload = tensor.detach().cpu().numpy().astype(DTYPE_CODES[int(integral)])
        stream.write(payload.tobytes())

    return stream.getvalue()


def decode_checkpoint(data: bytes) -> RegressionCnn:
    """Восстановление сети из байтов формата RLNN.

    Raises:
        ValueError: При неверной магии, версии или структуре
    """
    stream = io.BytesIO(data)
    if stream.read(4) != MAGIC:
        raise ValueError("Неверная сигнатура контрольной точки (ожидается RLNN)")
    (version,) = _read(stream, "H")
    if version != VERSION:
        raise ValueError(f"Неподдерживаемая версия контрольной точки: {version}")

    (kind_code,) = _read(stream, "B")
    if kind_code >= len(MODEL_KINDS):
        raise ValueError(f"Неизвестный вид сети: {kind_code}")
    input_shape = _read_shape(stream)
    channels = _read_shape(stream)
    hidden, output_dim = _read(stream, "II")
    (dtype_code,) = _read(stream, "B")

    model = RegressionCnn(input_shape, channels, hidden, output_dim)
    if model.kind != MODEL_KINDS[kind_code]:
        raise ValueError("Вид сети не соответствует форме входа")
    model.to(MODEL_DTYPES.get(dtype_code, torch.float32))

    (count,) = _read(stream, "I")
    state = {}
    frozen_any = False
    for _ in range(count):
        (name_length,) = _read(stream, "H")
        name = stream.read(name_length).decode("utf-8")
        _, frozen, integral = _read(stream, "BBB")
        shape = _read_shape(stream)
        dtype = DTYPE_CODES[integral]
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        chunk = stream.read(size)
        if len(chunk) != size:
            raise ValueError(f"Контрольная точка обрезана на тензоре {name}")
        state[name] = torch.from_numpy(np.frombuffer(chunk, dtype=dtype).reshape(shape).copy())
        frozen_any = frozen_any or bool(frozen)

    if stream.read(1):
        raise ValueError("Лишние данные в конце контрольной точки")

    model.load_state_dict(state)
    if frozen_any:
        freeze_feature_layers(model)
    return model


def save_checkpoint(model: RegressionCnn, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(model))
    logger.info(f"NN: контрольная точка сохранена: {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> RegressionCnn:
    return decode_checkpoint(Path(path).read_bytes())
