"""Утилиты приложения."""
