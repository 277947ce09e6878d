"""radarloc - локализация целей по тепловым картам NAMF и регрессионным CNN."""

__version__ = "0.1.0"
