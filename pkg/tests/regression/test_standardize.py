"""验证由统计量构造的标准化 Gram 系统。"""

from __future__ import annotations

import math

import numpy as np
import pytest

from src.ingest.stats import SufficientStats
from src.regression.errors import EmptyModelError, InsufficientDataError
from src.regression.standardize import loss_from_stats, standardize


def _direct_system(x: np.ndarray, y: np.ndarray):
    centered = x - x.mean(axis=0)
    norms = np.linalg.norm(centered, axis=0)
    scaled = centered / norms
    y_c = y - y.mean()
    return scaled.T @ scaled, scaled.T @ y_c, float(y_c @ y_c), scaled, y_c


def test_single_column_example() -> None:
    stats = SufficientStats.from_rows(np.array([[1.0], [2.0], [3.0]]), np.array([1.0, 2.0, 3.0]))
    problem = standardize(stats)
    np.testing.assert_allclose(problem.means, [2.0])
    assert problem.y_bar == pytest.approx(2.0)
    np.testing.assert_allclose(problem.norms, [math.sqrt(2.0)])
    np.testing.assert_allclose(problem.g, [[1.0]])
    np.testing.assert_allclose(problem.b, [math.sqrt(2.0)])
    assert problem.tss == pytest.approx(2.0)


def test_constant_column_is_dropped() -> None:
    x = np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]])
    problem = standardize(SufficientStats.from_rows(x, np.array([1.0, 0.0, 2.0])))
    assert problem.active_index == (1,)
    assert [item.index for item in problem.dropped] == [0]
    assert problem.norms[0] == 0.0
    assert problem.p_active == 1


def test_all_constant_columns() -> None:
    stats = SufficientStats.from_rows(np.full((4, 2), 3.0), np.arange(4.0))
    with pytest.raises(EmptyModelError):
        standardize(stats)
    problem = standardize(stats, allow_empty=True)
    assert problem.p_active == 0
    assert problem.g.shape == (0, 0)


def test_minimum_sample_count() -> None:
    one = SufficientStats.from_rows(np.array([[1.0, 2.0]]), np.array([3.0]))
    with pytest.raises(InsufficientDataError):
        standardize(one)
    problem = standardize(one, intercept=False)
    assert problem.n == 1


def test_pre_standardized_input_is_identity() -> None:
    rng = np.random.default_rng(0)
    raw = rng.standard_normal((50, 3))
    x = (raw - raw.mean(axis=0)) / np.linalg.norm(raw - raw.mean(axis=0), axis=0)
    y = rng.standard_normal(50)
    y = y - y.mean()
    stats = SufficientStats.from_rows(x, y)
    problem = standardize(stats)
    np.testing.assert_allclose(problem.means, 0.0, atol=1e-15)
    np.testing.assert_allclose(problem.g, stats.xtx, atol=1e-12)
    np.testing.assert_allclose(problem.b, stats.xty, atol=1e-12)


def test_matches_explicit_centering_and_scaling() -> None:
    rng = np.random.default_rng(1)
    x = rng.standard_normal((300, 8)) * rng.uniform(0.1, 50.0, 8) + rng.uniform(-20, 20, 8)
    y = x @ rng.standard_normal(8) + rng.standard_normal(300)
    g, b, tss, _, _ = _direct_system(x, y)
    problem = standardize(SufficientStats.from_rows(x, y))
    np.testing.assert_allclose(problem.g, g, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(problem.b, b, rtol=1e-9)
    assert problem.tss == pytest.approx(tss, rel=1e-9)
    np.testing.assert_allclose(np.diag(problem.g), 1.0, atol=1e-10)
    assert np.all(np.abs(problem.g) <= 1.0 + 1e-10)
    np.testing.assert_array_equal(problem.g, problem.g.T)


def test_column_scaling_leaves_system_unchanged() -> None:
    rng = np.random.default_rng(2)
    x = rng.standard_normal((100, 3))
    y = rng.standard_normal(100)
    base = standardize(SufficientStats.from_rows(x, y))
    scaled = x.copy()
    scaled[:, 1] *= 1000.0
    other = standardize(SufficientStats.from_rows(scaled, y))
    np.testing.assert_allclose(other.g, base.g, atol=1e-9)
    np.testing.assert_allclose(other.b, base.b, atol=1e-9)


def test_no_intercept_skips_centering() -> None:
    x = np.array([[1.0], [2.0], [3.0]])
    y = np.array([2.0, 4.0, 6.0])
    problem = standardize(SufficientStats.from_rows(x, y), intercept=False)
    assert problem.y_bar == 0.0
    np.testing.assert_array_equal(problem.means, [0.0])
    np.testing.assert_allclose(problem.norms, [math.sqrt(14.0)])
    assert problem.tss == 56.0


def test_loss_from_stats_matches_rows() -> None:
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.standard_normal((60, 4)) * 3 + 1
        y = rng.standard_normal(60) + 2
        _, _, _, scaled, y_c = _direct_system(x, y)
        problem = standardize(SufficientStats.from_rows(x, y))
        beta = rng.standard_normal(4)
        residual = y_c - scaled @ beta
        assert loss_from_stats(problem, beta) == pytest.approx(float(residual @ residual), rel=1e-9)


def test_loss_special_points() -> None:
    rng = np.random.default_rng(4)
    x = rng.standard_normal((40, 3))
    y = rng.standard_normal(40)
    problem = standardize(SufficientStats.from_rows(x, y))
    assert loss_from_stats(problem, np.zeros(3)) == pytest.approx(problem.tss)
    optimum = np.linalg.solve(problem.g, problem.b)
    expected = problem.tss - problem.b @ optimum
    assert loss_from_stats(problem, optimum) == pytest.approx(expected, rel=1e-9)
    with pytest.raises(ValueError):
        loss_from_stats(problem, np.zeros(2))
