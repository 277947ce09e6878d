"""Модуль для работы с конфигурацией приложения."""
