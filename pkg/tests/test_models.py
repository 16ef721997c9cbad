import numpy as np
import pytest

from nuvssm import (
    NuvConfig,
    build_line_model,
    build_outlier_model,
    build_oscillator_model,
    build_poly_model,
    build_step_model,
    build_walk_model,
    fit,
    simulate_lines,
    simulate_outliers,
    simulate_steps,
    simulate_walk,
)


def test_builder_validation():
    with pytest.raises(ValueError):
        build_step_model(0, 1.0)
    with pytest.raises(ValueError):
        build_walk_model(10, 1.0, -0.5)
    with pytest.raises(ValueError):
        build_line_model(1, 1.0)
    with pytest.raises(ValueError):
        build_poly_model(10, 1.0, 3)
    with pytest.raises(ValueError):
        build_poly_model(2, 1.0, 2)  # horizon shorter than the chain


def test_constant_signal_one_segment():
    rng = np.random.default_rng(60)
    y = 3.0 + 0.1 * rng.standard_normal(80)
    res = fit(build_step_model(80, 0.25), y, "step", NuvConfig(max_iters=2000))
    assert res.events == []
    assert len(res.segments) == 1
    assert res.segments[0].start == 0 and res.segments[0].end == 79
    assert abs(res.segments[0].level - 3.0) < 0.1


def test_step_fit_recovers_single_jump():
    rng = np.random.default_rng(61)
    sim = simulate_steps(200, [(100, 10.0)], 0.1, rng)
    res = fit(build_step_model(200, 0.25), sim.y, "step", NuvConfig(max_iters=3000))
    assert [(e.index, e.kind) for e in res.events] == [(100, "jump")]
    assert abs(res.events[0].magnitude - 10.0) < 0.5
    assert len(res.segments) == 2
    assert abs(res.segments[0].level) < 0.1
    assert abs(res.segments[1].level - 10.0) < 0.1


def test_walk_degenerates_to_step():
    # with vanishing walk variance the walk fit finds the same jumps
    rng = np.random.default_rng(62)
    sim = simulate_steps(150, [(75, 8.0)], 0.1, rng)
    cfg = NuvConfig(max_iters=3000)
    r_step = fit(build_step_model(150, 0.25), sim.y, "step", cfg)
    r_walk = fit(build_walk_model(150, 0.25, 1e-8), sim.y, "walk", cfg)
    assert [e.index for e in r_step.events] == [e.index for e in r_walk.events] == [75]


def test_walk_fit_single_jump():
    rng = np.random.default_rng(63)
    sim = simulate_walk(200, 0.1, [(97, 3.0)], 0.1, rng)
    res = fit(build_walk_model(200, 0.25, 0.25), sim.y, "walk", NuvConfig(max_iters=3000))
    assert len(res.events) == 1
    assert abs(res.events[0].index - 97) <= 1
    assert abs(res.events[0].magnitude - 3.0) < 1.0


def test_jump_magnitude_sweep_monotone_detection():
    # larger jumps can only become easier to detect
    rng = np.random.default_rng(64)
    noise = 0.1 * rng.standard_normal(100)
    detected = []
    for size in (0.05, 0.2, 1.0, 5.0, 20.0):
        y = noise.copy()
        y[50:] += size
        res = fit(build_step_model(100, 0.25), y, "step", NuvConfig(max_iters=3000))
        detected.append(any(e.index == 50 for e in res.events))
    assert detected == sorted(detected)
    assert detected[-1]


def test_line_fit_recovers_knots():
    rng = np.random.default_rng(65)
    sim = simulate_lines(200, [(60, 0.5), (140, -0.8)], 0.1, rng)
    res = fit(build_line_model(200, 0.25), sim.y, "line", NuvConfig(max_iters=3000))
    idx = sorted(e.index for e in res.events)
    assert len(idx) == 2
    assert abs(idx[0] - 60) <= 1 and abs(idx[1] - 140) <= 1
    assert all(e.kind == "slope-change" for e in res.events)
    # the smoothed output tracks the truth away from the knots
    assert np.sqrt(np.mean((res.smoothed - sim.truth) ** 2)) < 0.2


def test_line_without_continuity_attributes_jump():
    rng = np.random.default_rng(66)
    truth = np.arange(120) * 0.1
    truth[60:] += 5.0  # level jump, slope unchanged
    y = truth + 0.05 * rng.standard_normal(120)
    res = fit(build_line_model(120, 0.1, continuity=False), y, "line",
              NuvConfig(max_iters=3000))
    jumps = [e for e in res.events if e.kind == "jump"]
    assert any(abs(e.index - 60) <= 1 for e in jumps)


def test_poly_model_frozen_trailing_steps():
    model = build_poly_model(50, 1.0, degree=2)
    assert model.nuv_frozen_input_steps == (0, 48, 49)
    assert model.n == 3


def test_outlier_fit_clean_signal_flags_nothing():
    rng = np.random.default_rng(67)
    sim = simulate_outliers(200, [], 0.05, rng)
    base = build_oscillator_model(200, 0.05)
    res = fit(build_outlier_model(base, 0.05), sim.y, "outlier", NuvConfig(max_iters=2000))
    assert res.events == []


def test_outlier_fit_flags_and_cleans():
    rng = np.random.default_rng(68)
    sim = simulate_outliers(200, [(40, 1.0), (120, -1.0)], 0.05, rng)
    base = build_oscillator_model(200, 0.05)
    res = fit(build_outlier_model(base, 0.05), sim.y, "outlier", NuvConfig(max_iters=2000))
    idx = sorted(e.index for e in res.events)
    assert idx == [40, 120]
    assert all(e.kind == "outlier" for e in res.events)
    # outliers do not split segments
    assert len(res.segments) == 1
    rmse_clean = np.sqrt(np.mean((res.smoothed - sim.truth) ** 2))
    rmse_raw = np.sqrt(np.mean((sim.y - sim.truth) ** 2))
    assert rmse_clean < rmse_raw


def test_sparsity_monotone_in_assumed_noise():
    rng = np.random.default_rng(69)
    sim = simulate_steps(150, [(75, 10.0)], 0.1, rng)
    counts = []
    for s2 in (0.01, 0.1, 0.25, 1.0, 4.0):
        res = fit(build_step_model(150, s2), sim.y, "step", NuvConfig(max_iters=3000))
        counts.append(len(res.events))
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    assert counts[2] >= 1  # the true jump survives at moderate noise levels


def test_event_count_matches_active_set():
    rng = np.random.default_rng(70)
    sim = simulate_steps(120, [(30, 6.0), (90, -4.0)], 0.1, rng)
    res = fit(build_step_model(120, 0.25), sim.y, "step", NuvConfig(max_iters=3000))
    assert len(res.events) == res.state.active_size


def test_simulators_basic_shapes():
    rng = np.random.default_rng(71)
    s = simulate_steps(50, [(10, 1.0)], 0.0, rng)
    np.testing.assert_array_equal(s.truth[:10], 0.0)
    np.testing.assert_array_equal(s.truth[10:], 1.0)
    np.testing.assert_array_equal(s.y, s.truth)

    w = simulate_walk(50, 0.0, [(5, 2.0)], 0.0, rng)
    np.testing.assert_allclose(w.truth[5:], 2.0)

    ln = simulate_lines(50, [(25, 1.0)], 0.0, rng, init_slope=0.0)
    assert np.allclose(np.diff(ln.truth[:24]), 0.0)
    assert np.allclose(np.diff(ln.truth[26:]), 1.0)

    o = simulate_outliers(50, [(7, 3.0)], 0.0, rng, process_std=0.0)
    np.testing.assert_allclose(o.y[7] - o.truth[7], 3.0)
