"""Metric formulas against analytic and independent oracles."""

import numpy as np
import pytest

from standup.evaluate.metrics import (
    episode_success, feet_travel, motion_smoothness, energy_used,
)
from standup.trace import Trace


# ------------------------------------------------------------------ success

def test_never_reaching_target_fails():
    h = np.full(100, 0.4)
    assert episode_success(h, 0.7) is False


def test_dip_after_crossing_fails():
    h = np.full(100, 0.8)
    h[:30] = 0.3
    h[60] = 0.69   # single dip below the target
    assert episode_success(h, 0.7) is False


def test_crossing_and_holding_succeeds():
    h = np.concatenate([np.linspace(0.1, 0.71, 300), np.full(200, 0.75)])
    assert episode_success(h, 0.7) is True


# --------------------------------------------------------------------- feet

def test_stationary_feet_travel_zero():
    h = np.full(50, 0.8)
    heel = np.tile([0.1, 0.0], (50, 1))
    toe = np.tile([0.3, 0.0], (50, 1))
    assert feet_travel(heel, toe, h, 0.7) == 0.0


def test_single_translation_counts_once():
    h = np.full(3, 0.8)
    heel = np.array([[0.0, 0.0], [0.1, 0.0], [0.1, 0.0]])
    toe = np.array([[0.2, 0.0], [0.2, 0.0], [0.2, 0.0]])
    assert feet_travel(heel, toe, h, 0.7) == pytest.approx(0.1, abs=1e-15)


def test_random_walk_matches_cumulative_distance_oracle():
    rng = np.random.default_rng(0)
    T = 400
    h = np.concatenate([np.linspace(0.0, 0.75, 100), np.full(T - 100, 0.8)])
    heel = np.cumsum(rng.normal(0, 0.01, (T, 2)), axis=0)
    toe = np.cumsum(rng.normal(0, 0.01, (T, 2)), axis=0)
    got = feet_travel(heel, toe, h, 0.7)
    c = int(np.argmax(h > 0.7))
    oracle = sum(abs(heel[t + 1, 0] - heel[t, 0]) for t in range(c, T - 1)) \
        + sum(abs(toe[t + 1, 0] - toe[t, 0]) for t in range(c, T - 1))
    assert got == pytest.approx(oracle, abs=1e-12)


def test_feet_travel_undefined_without_crossing():
    with pytest.raises(ValueError):
        feet_travel(np.zeros((10, 2)), np.zeros((10, 2)), np.zeros(10), 0.7)


# --------------------------------------------------------------- smoothness

def test_constant_trajectory_smoothness_zero():
    p = np.tile([0.3, -0.2, 0.1], (50, 1))
    assert motion_smoothness(p) == 0.0


def test_affine_trajectory_smoothness_zero():
    t = np.arange(60.0)[:, None]
    p = 0.02 * t + np.array([[0.1, -0.4]])
    # affine trajectories vanish up to float rounding of the differences
    assert motion_smoothness(p) < 1e-25


def test_sinusoid_matches_closed_form():
    # p_t = A sin(w t dt): the second difference is
    # -4 sin^2(w dt / 2) * A sin(w (t+1) dt), so the sum of squares has the
    # closed form (4 sin^2(w dt / 2))^2 A^2 * sum sin^2(w (t+1) dt)
    A, w, dt, T = 0.3, 7.0, 0.02, 200
    t = np.arange(T)
    p = (A * np.sin(w * t * dt))[:, None]
    k = 4.0 * np.sin(w * dt / 2.0) ** 2
    expected = k**2 * A**2 * np.sum(np.sin(w * (t[1:-1]) * dt) ** 2)
    assert motion_smoothness(p) == pytest.approx(expected, abs=1e-9)


def test_smoothness_window_restricts_steps():
    rng = np.random.default_rng(1)
    p = rng.normal(size=(300, 4))
    full = motion_smoothness(p)
    first = motion_smoothness(p, window=100)
    assert first == motion_smoothness(p[:100])
    assert first < full


def test_smoothness_needs_three_samples():
    with pytest.raises(ValueError):
        motion_smoothness(np.zeros((2, 3)))


# ------------------------------------------------------------------- energy

def test_zero_torque_energy_zero():
    assert energy_used(np.zeros((50, 6)), np.ones((50, 6)),
                       np.zeros(50), 0.65) == 0.0


def test_hand_energy_example_exact():
    # one joint, tau = 10 N*m, vel = 1 rad/s, 50 steps at dt = 0.02 -> 10 J
    tau = np.full((50, 1), 10.0)
    vel = np.ones((50, 1))
    h = np.zeros(50)  # never crosses the threshold: every step counts
    assert energy_used(tau, vel, h, 0.65) == 10.0


def test_energy_stops_at_first_crossing():
    tau = np.full((100, 1), 10.0)
    vel = np.ones((100, 1))
    h = np.zeros(100)
    h[40:] = 0.8
    assert energy_used(tau, vel, h, 0.65) == pytest.approx(10.0 * 1.0 * 0.02 * 40)


def test_energy_matches_independent_recomputation():
    rng = np.random.default_rng(2)
    tau = rng.normal(0, 40, (200, 6))
    vel = rng.normal(0, 3, (200, 6))
    h = np.linspace(0.0, 1.0, 200)
    got = energy_used(tau, vel, h, 0.65)
    c = int(np.argmax(h > 0.65))
    oracle = sum(sum(abs(tau[t, j]) * abs(vel[t, j]) for j in range(6))
                 for t in range(c)) * 0.02
    assert got == pytest.approx(oracle, rel=1e-12)


# -------------------------------------------------------------------- trace

def _toy_trace(T=40, seed=0) -> Trace:
    rng = np.random.default_rng(seed)
    return Trace(
        time=np.arange(T) * 0.02,
        base_pose=rng.normal(size=(T, 3)),
        base_vel=rng.normal(size=(T, 3)),
        joint_pos=rng.normal(size=(T, 6)),
        joint_vel=rng.normal(size=(T, 6)),
        torque=rng.normal(size=(T, 6)),
        action=rng.uniform(-1, 1, (T, 6)),
        h_base=rng.uniform(0, 1, T),
        h_head=rng.uniform(0, 1.4, T),
        stage=rng.integers(1, 4, T).astype(float),
        groups=rng.normal(size=(T, 4)),
        reward=rng.normal(size=T),
        heel=rng.normal(size=(T, 2)),
        toe=rng.normal(size=(T, 2)),
        contacts=rng.integers(0, 5, T).astype(float),
        pull_force=rng.uniform(0, 200, T),
    )


def test_trace_csv_roundtrip_is_bit_exact(tmp_path):
    trace = _toy_trace()
    path = str(tmp_path / "ep.csv")
    trace.to_csv(path)
    back = Trace.from_csv(path)
    for name, col in trace.columns().items():
        assert np.array_equal(col, back.columns()[name]), name


def test_metrics_identical_from_reloaded_trace(tmp_path):
    trace = _toy_trace(T=120, seed=3)
    trace.h_base = np.concatenate([np.linspace(0, 0.72, 60), np.full(60, 0.9)])
    path = str(tmp_path / "ep.csv")
    trace.to_csv(path)
    back = Trace.from_csv(path)
    assert episode_success(back.h_base, 0.7) == episode_success(trace.h_base, 0.7)
    assert feet_travel(back.heel, back.toe, back.h_base, 0.7) == \
        feet_travel(trace.heel, trace.toe, trace.h_base, 0.7)
    assert motion_smoothness(back.joint_pos) == motion_smoothness(trace.joint_pos)
    assert energy_used(back.torque, back.joint_vel, back.h_base, 0.65) == \
        energy_used(trace.torque, trace.joint_vel, trace.h_base, 0.65)
