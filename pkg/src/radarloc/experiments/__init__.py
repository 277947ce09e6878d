"""Генерация наборов данных и эксперименты."""
