"""Основные функции для работы с конфигурацией приложения."""

import logging
import os
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from radarloc.config import schema
from radarloc.config.settings import get_settings
from radarloc.utils import core as utils

logger = logging.getLogger(__name__)


def load_config_file(config_path: str) -> Dict[str, Any]:
    """Загрузка конфигурации из файла YAML или JSON.

    Args:
        config_path: Путь к файлу конфигурации

    Returns:
        Dict[str, Any]: Загруженная конфигурация

    Raises:
        FileNotFoundError: Если файл конфигурации не найден
        ValueError: Если произошла ошибка при парсинге конфигурации
    """
    config_file = Path(config_path)
    if not config_file.exists():
        logger.error(f"Файл конфигурации не найден: {config_path}")
        raise FileNotFoundError(f"Файл конфигурации не найден: {config_path}")

    try:
        with open(config_file, "r", encoding="utf-8") as f:
            config_data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        logger.error(f"Ошибка парсинга конфигурации: {str(e)}")
        raise ValueError(f"Ошибка парсинга конфигурации: {str(e)}")

    if config_data is None:
        config_data = {}
    if not isinstance(config_data, dict):
        raise ValueError(f"Конфигурация должна быть словарем: {config_path}")

    logger.info(f"Конфигурация загружена из файла: {config_path}")
    return config_data


def substitute_env_vars(config: Dict[str, Any]) -> Dict[str, Any]:
    """Подстановка переменных окружения в конфигурацию.

    Ищет значения вида "ENV:VAR_NAME" или "ENV:VAR_NAME:default" и
    заменяет их на значения соответствующих переменных окружения.

    Args:
        config: Конфигурация для обработки

    Returns:
        Dict[str, Any]: Обработанная конфигурация
    """
    def process_value(value: Any) -> Any:
        if isinstance(value, str) and value.startswith("ENV:"):
            parts = value[4:].split(":", 1)
            env_name = parts[0]
            default = parts[1] if len(parts) > 1 else None
            return os.environ.get(env_name, default)
        elif isinstance(value, dict):
            return {k: process_value(v) for k, v in value.items()}
        elif isinstance(value, list):
            return [process_value(item) for item in value]
        else:
            return value

    return process_value(config)


def build_config(
    config_data: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None
) -> schema.AppConfig:
    """Подстановка окружения, наложение переопределений и валидация.

    Args:
        config_data: Исходные данные конфигурации
        overrides: Переопределения (например, из аргументов CLI)

    Returns:
        schema.AppConfig: Проверенная конфигурация
    """
    config_data = substitute_env_vars(config_data)
    if overrides:
        config_data = utils.deep_merge(config_data, overrides)
    return schema.validate_config(config_data)


@lru_cache(maxsize=4)
def load_config(config_path: Optional[str] = None) -> schema.AppConfig:
    """Загрузка конфигурации с учетом переменных окружения.

    Путь берется из аргумента, иначе из RADARLOC_CONFIG_PATH.
    Если файла по умолчанию нет, используются значения схемы.

    Args:
        config_path: Путь к файлу конфигурации

    Returns:
        schema.AppConfig: Загруженная и валидированная конфигурация
    """
    settings = get_settings()
    path = config_path or settings.config_path

    if config_path is None and not Path(path).exists():
        logger.warning(f"Файл конфигурации {path} не найден, используются значения по умолчанию")
        return build_config({})

    return build_config(load_config_file(path))
