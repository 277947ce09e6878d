"""Общие фикстуры тестов radarloc."""

import os
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

# Добавляем каталог src в путь для импорта
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

from radarloc.config.core import build_config, load_config
from radarloc.config.schema import AppConfig, RadarSiteConfig
from radarloc.config.settings import get_settings
from radarloc.radar.namf import HeatmapGrid
from radarloc.radar.scenario import build_clutter_scene
from radarloc.radar.steering import SteeringProvider
from radarloc.utils.cache import invalidate_all

# Уменьшенная конфигурация: те же площадка и сетка, малые объемы данных
SMALL_OVERRIDES = {
    "processing": {"calibration_trials": 100},
    "training": {"batch_size": 8, "epochs": 2, "early_stop_patience": 5},
    "experiments": {
        "n_samples": 20,
        "n_validation": 4,
        "scnr_grid_db": [0.0, 20.0],
        "size_grid": [10, 20],
        "threshold_snapshots": [100],
        "fsl_shots": 4,
        "fsl_epochs": 1,
        "doppler_pulses": 2,
        "doppler_snapshots": 64,
    },
}


@pytest.fixture(autouse=True)
def clean_cache():
    invalidate_all()
    load_config.cache_clear()
    get_settings.cache_clear()
    yield
    invalidate_all()
    load_config.cache_clear()
    get_settings.cache_clear()


@pytest.fixture
def small_config(tmp_path: Path) -> AppConfig:
    overrides = {**SMALL_OVERRIDES, "experiments": {**SMALL_OVERRIDES["experiments"], "output_dir": str(tmp_path)}}
    return build_config({}, overrides)


@pytest.fixture
def small_config_file(tmp_path: Path) -> Path:
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(SMALL_OVERRIDES), encoding="utf-8")
    return path


@pytest.fixture
def site() -> RadarSiteConfig:
    return RadarSiteConfig()


@pytest.fixture
def provider(site: RadarSiteConfig) -> SteeringProvider:
    return SteeringProvider.from_site(site, channels=16)


@pytest.fixture
def grid(site: RadarSiteConfig) -> HeatmapGrid:
    return HeatmapGrid.from_config(site, 0.4)


@pytest.fixture
def scene(site: RadarSiteConfig):
    return build_clutter_scene(site, patches_per_bin=32, seed=7, channels=16)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
