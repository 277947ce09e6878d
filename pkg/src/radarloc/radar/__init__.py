"""Радиолокационная обработка: сцена, управляющие векторы, NAMF, оценки и анализ."""
