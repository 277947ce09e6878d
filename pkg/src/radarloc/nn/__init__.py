"""Регрессионные сверточные сети."""
