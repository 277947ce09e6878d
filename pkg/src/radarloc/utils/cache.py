"""Потокобезопасный кэш для повторно используемых результатов вычислений.

Матрицы управляющих векторов для сетки тепловой карты одинаковы для всех
образцов набора данных, поэтому вычисляются один раз на ключ.
"""

import logging
from functools import wraps
from threading import RLock
from typing import Any, Callable, Dict, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')

cache_store: Dict[str, Any] = {}
cache_lock = RLock()

# Ограничение числа записей; при переполнении кэш очищается целиком
MAX_ENTRIES = 256


def cache_get(cache_key: str) -> Optional[Any]:
    """Получение значения из кэша.

    Args:
        cache_key: Ключ кэша

    Returns:
        Optional[Any]: Значение из кэша или None, если запись не найдена
    """
    with cache_lock:
        value = cache_store.get(cache_key)
        if value is not None:
            logger.debug(f"CACHE: используются кэшированные данные для: {cache_key}")
        return value


def cache_put(cache_key: str, value: Any) -> Any:
    """Сохранение значения в кэше.

    Args:
        cache_key: Ключ кэша
        value: Значение для сохранения

    Returns:
        Any: Сохраненное значение
    """
    with cache_lock:
        if len(cache_store) >= MAX_ENTRIES:
            logger.debug(f"CACHE: достигнут предел {MAX_ENTRIES} записей, кэш очищен")
            cache_store.clear()
        cache_store[cache_key] = value
        return value


def with_cache(cache_key_prefix: str):
    """Декоратор для мемоизации по строковому представлению аргументов.

    Аргументы должны иметь детерминированный str (числа, кортежи,
    неизменяемые модели pydantic).

    Args:
        cache_key_prefix: Префикс ключа кэша

    Returns:
        Callable: Декорированная функция
    """
    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @wraps(func)
        def wrapper(*args, **kwargs) -> T:
            arg_str = "_".join(repr(arg) for arg in args)
            kwarg_str = "_".join(f"{k}={v!r}" for k, v in sorted(kwargs.items()))
            cache_key = f"{cache_key_prefix}_{arg_str}_{kwarg_str}"

            cached_value = cache_get(cache_key)
            if cached_value is not None:
                return cached_value

            result = func(*args, **kwargs)
            return cache_put(cache_key, result)

        return wrapper

    return decorator


def invalidate_all() -> None:
    """Полная инвалидация кэша."""
    with cache_lock:
        cache_store.clear()
        logger.debug("CACHE: весь кэш очищен")
