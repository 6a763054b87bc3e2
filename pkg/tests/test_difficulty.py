import numpy as np
import pytest

from taskpace.difficulty import (
    ALPHA_PRESETS,
    ConsolidationWindow,
    LossReport,
    WindowError,
    divergence_vector,
    mean_difficulty,
    task_histograms,
)
from taskpace.histograms import HistogramGrid, build_histogram, fit_grid


def report(losses_by_task, iteration=0, cycle=1):
    ids, tasks, losses = [], [], []
    next_id = 0
    for t, ls in losses_by_task.items():
        for l in ls:
            ids.append(next_id)
            tasks.append(t)
            losses.append(l)
            next_id += 1
    return LossReport(iteration, cycle, np.array(ids), np.array(tasks), np.array(losses))


def test_report_validation():
    with pytest.raises(ValueError):
        LossReport(0, 1, np.array([0]), np.array([0]), np.array([-1.0]))
    with pytest.raises(ValueError):
        LossReport(0, 1, np.array([0]), np.array([0]), np.array([np.inf]))
    with pytest.raises(ValueError):
        LossReport(0, 1, np.array([], dtype=int), np.array([], dtype=int), np.array([]))


def test_task_histograms_cover_tasks():
    r = report({0: [0.1, 0.2], 3: [0.5]})
    grid = fit_grid(r.losses, 10)
    hists = task_histograms(r, grid)
    assert set(hists) == {0, 3}
    for h in hists.values():
        assert abs(h.mass.sum() - 1.0) < 1e-12


def test_divergence_vector_zero_for_identical():
    r = report({0: [0.1, 0.4], 1: [0.2, 0.9]})
    grid = fit_grid(r.losses, 20)
    h = task_histograms(r, grid)
    vec = divergence_vector(h, h)
    assert vec == {0: 0.0, 1: 0.0}


def test_divergence_vector_key_mismatch_lists_tasks():
    r1 = report({0: [0.1], 1: [0.2]})
    r2 = report({0: [0.1], 2: [0.2]})
    grid = HistogramGrid(10, 1.0)
    with pytest.raises(ValueError, match=r"\[1, 2\]"):
        divergence_vector(task_histograms(r1, grid), task_histograms(r2, grid))


def test_single_task_one_bin_drift():
    grid = HistogramGrid(10, 1.0)
    prev = {0: build_histogram(np.linspace(0.01, 0.39, 40), grid)}
    curr = {0: build_histogram(np.linspace(0.01, 0.39, 40) + grid.width, grid)}
    vec = divergence_vector(prev, curr)
    assert vec[0] == pytest.approx(grid.width ** 2, rel=1e-9)


def test_window_consolidation_weighted_sum():
    w = ConsolidationWindow(5, (0.1, 0.1, 0.3, 0.5))
    for v in (1.0, 2.0, 3.0, 4.0):
        w.push({7: v})
    out = w.consolidate()
    assert out.scores[7] == pytest.approx(3.2, abs=1e-15)


def test_window_all_equal_unit_scores():
    w = ConsolidationWindow(5, (0.1, 0.1, 0.3, 0.5))
    for _ in range(4):
        w.push({0: 1.0, 1: 1.0})
    out = w.consolidate()
    assert out.scores == {0: pytest.approx(1.0), 1: pytest.approx(1.0)}


def test_window_incomplete_raises():
    w = ConsolidationWindow(5, (0.1, 0.1, 0.3, 0.5))
    w.push({0: 1.0})
    with pytest.raises(WindowError):
        w.consolidate()


def test_window_rolls_beyond_capacity():
    w = ConsolidationWindow(3, (0.4, 0.6))
    for v in (10.0, 1.0, 2.0):
        w.push({0: v})
    # Oldest vector dropped: 0.4*1 + 0.6*2
    assert w.consolidate().scores[0] == pytest.approx(1.6)


def test_window_linearity_and_bounds():
    rng = np.random.default_rng(0)
    for _ in range(100):
        b = int(rng.integers(2, 7))
        alphas = rng.random(b - 1)
        alphas /= alphas.sum()
        w1 = ConsolidationWindow(b, tuple(alphas))
        w2 = ConsolidationWindow(b, tuple(alphas))
        vals = rng.random(b - 1) * 10
        c = float(rng.random() * 5)
        for v in vals:
            w1.push({0: float(v)})
            w2.push({0: float(c * v)})
        s1 = w1.consolidate().scores[0]
        s2 = w2.consolidate().scores[0]
        assert s2 == pytest.approx(c * s1, rel=1e-9)
        assert vals.min() - 1e-12 <= s1 <= vals.max() + 1e-12


def test_alpha_presets():
    assert ALPHA_PRESETS["increasing"] == (0.1, 0.1, 0.3, 0.5)
    assert ALPHA_PRESETS["decreasing"] == (0.5, 0.3, 0.1, 0.1)
    assert ALPHA_PRESETS["uniform"] == (0.25, 0.25, 0.25, 0.25)
    for alphas in ALPHA_PRESETS.values():
        ConsolidationWindow(5, alphas)  # all valid for the default window


def test_mean_difficulty():
    r = report({0: [1.0, 3.0], 1: [0.0], 2: [2.0, 2.0, 2.0]})
    out = mean_difficulty(r)
    assert out.scores == {0: 2.0, 1: 0.0, 2: 2.0}


def test_mean_difficulty_blind_to_spread():
    # Equal means, disjoint ranges: the mean cannot separate these tasks.
    r = report({0: [1.0, 1.0, 1.0], 1: [0.0, 1.0, 2.0]})
    out = mean_difficulty(r)
    assert out.scores[0] == out.scores[1] == 1.0


def test_difficulty_export_shape():
    out = mean_difficulty(report({2: [0.5], 0: [0.25]}))
    data = out.to_json(iteration=4)
    assert data == {"iteration": 4, "scores": {"0": 0.25, "2": 0.5}}


def test_full_vector_65_tasks_under_100ms():
    import time

    rng = np.random.default_rng(9)
    grid = HistogramGrid(100, 3.0)
    prev = {t: build_histogram(rng.exponential(1.0, 500), grid) for t in range(65)}
    curr = {t: build_histogram(rng.exponential(0.8, 500), grid) for t in range(65)}
    t0 = time.perf_counter()
    vec = divergence_vector(prev, curr)
    elapsed = time.perf_counter() - t0
    assert len(vec) == 65
    assert elapsed < 0.1
