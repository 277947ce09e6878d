"""Тесты утилит: seed, объединение словарей, кэш, логирование."""

import logging

import numpy as np
import pytest

from radarloc.utils import cache
from radarloc.utils.core import deep_merge, derive_seed, human_readable_size, make_rng
from radarloc.utils.logging import error_logging, log_timing


def test_deep_merge_keeps_nested_values():
    merged = deep_merge({"a": {"b": 1, "c": 2}, "d": 3}, {"a": {"c": 5}})
    assert merged == {"a": {"b": 1, "c": 5}, "d": 3}


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1)
    assert 0 <= derive_seed(123) < 2 ** 63


def test_make_rng_streams_are_reproducible():
    first = make_rng(5, 0, 3).standard_normal(4)
    second = make_rng(5, 0, 3).standard_normal(4)
    other = make_rng(5, 1, 3).standard_normal(4)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, other)


def test_human_readable_size():
    assert human_readable_size(512) == "512.00 B"
    assert human_readable_size(2048) == "2.00 KB"


def test_with_cache_memoizes_by_arguments():
    calls = []

    @cache.with_cache("test_square")
    def square(x):
        calls.append(x)
        return x * x

    assert square(3) == 9
    assert square(3) == 9
    assert square(4) == 16
    assert calls == [3, 4]

    cache.invalidate_all()
    assert square(3) == 9
    assert calls == [3, 4, 3]


def test_cache_overflow_clears_store(monkeypatch):
    monkeypatch.setattr(cache, "MAX_ENTRIES", 2)
    cache.cache_put("a", 1)
    cache.cache_put("b", 2)
    cache.cache_put("c", 3)
    assert cache.cache_get("a") is None
    assert cache.cache_get("c") == 3


def test_error_logging_reraises(caplog):
    with caplog.at_level(logging.ERROR):
        with pytest.raises(RuntimeError):
            with error_logging({"stage": "unit"}):
                raise RuntimeError("boom")
    assert "stage" in caplog.text


def test_log_timing_reports_duration(caplog):
    with caplog.at_level(logging.INFO):
        with log_timing("TEST: блок"):
            pass
    assert "TEST: блок" in caplog.text
