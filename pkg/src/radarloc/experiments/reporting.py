"""Запись результатов экспериментов в CSV."""

import csv
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

logger = logging.getLogger(__name__)

ResultRow = Dict[str, Any]


def format_value(value: Any) -> str:
    """Числа с плавающей точкой с 6 значащими цифрами, остальное как есть."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, "dtype"):
        number = float(value)
        if math.isnan(number):
            return "nan"
        return f"{number:.6g}"
    return str(value)


def write_csv(path: Union[str, Path], columns: Sequence[str], rows: Iterable[ResultRow]) -> Path:
    """Запись строк результатов с заголовком в фиксированном порядке столбцов.

    Args:
        path: Путь к файлу
        columns: Порядок столбцов
        rows: Строки результатов

    Returns:
        Path: Путь к записанному файлу

    Raises:
        ValueError: Если в строке нет значения для столбца
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = list(rows)

    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            missing = [column for column in columns if column not in row]
            if missing:
                raise ValueError(f"В строке результатов нет столбцов: {missing}")
            writer.writerow([format_value(row[column]) for column in columns])

    logger.info(f"REPORT: записано {len(rows)} строк в {path}")
    return path


def read_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    """Чтение CSV результатов в список словарей (значения строками)."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
