"""Переопределения времени выполнения из переменных окружения."""

from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict


class RuntimeSettings(BaseSettings):
    """Настройки запуска (RADARLOC_CONFIG_PATH, RADARLOC_LOG_LEVEL, ...)."""

    model_config = SettingsConfigDict(env_prefix="RADARLOC_", extra="ignore")

    config_path: str = "resources/config.yaml"
    log_level: str = "INFO"
    workers: int = 1
    deterministic: bool = False


@lru_cache(maxsize=1)
def get_settings() -> RuntimeSettings:
    """Кэшированный экземпляр настроек."""
    return RuntimeSettings()
