import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radarlab.scenario import (
    Measurement,
    MotionModel,
    Scenario,
    ScenarioConfig,
    SpawnRecord,
    TargetTruth,
    advance_scenario,
    build_process_noise,
    build_transition,
    measure,
    measurement_function,
    measurement_jacobian,
    step_truth,
    wrap_angle,
)


def test_transition_identity_at_zero_dt():
    assert np.array_equal(build_transition(0.0), np.eye(4))


def test_zero_noise_propagation_is_linear():
    model = MotionModel.constant_velocity(2.5, 0.0)
    target = TargetTruth(id=0, spawn_time=0, despawn_time=10, state=[0.0, 0.0, 1.0, 1.0])
    stepped = step_truth(target, model)
    assert np.allclose(stepped.state, [2.5, 2.5, 1.0, 1.0])


def test_zero_dt_propagation_is_identity():
    model = MotionModel.constant_velocity(0.0, 0.0)
    state = np.array([3.0, -7.0, 0.5, 2.0])
    target = TargetTruth(id=0, spawn_time=0, despawn_time=10, state=state)
    assert np.array_equal(step_truth(target, model).state, state)


def test_multi_step_zero_noise_matches_matrix_power():
    model = MotionModel.constant_velocity(1.7, 0.0)
    target = TargetTruth(id=0, spawn_time=0, despawn_time=100, state=[5.0, -2.0, 3.0, 4.0])
    x = target.state.copy()
    for _ in range(6):
        target = step_truth(target, model)
    expected = np.linalg.matrix_power(model.transition_matrix, 6) @ x
    assert np.allclose(target.state, expected, atol=1e-9)


class TestProcessNoise:
    def test_zero_dt_gives_zero_matrix(self):
        assert np.array_equal(build_process_noise(0.0, 16.0), np.zeros((4, 4)))

    def test_zero_intensity_gives_zero_matrix(self):
        assert np.array_equal(build_process_noise(2.5, 0.0), np.zeros((4, 4)))

    def test_matches_white_noise_acceleration_form(self):
        dt, q = 2.5, 16.0
        expected = q * np.array(
            [
                [dt**4 / 4, 0, dt**3 / 2, 0],
                [0, dt**4 / 4, 0, dt**3 / 2],
                [dt**3 / 2, 0, dt**2, 0],
                [0, dt**3 / 2, 0, dt**2],
            ]
        )
        assert np.allclose(build_process_noise(dt, q), expected, rtol=1e-12)

    def test_symmetric_psd(self):
        cov = build_process_noise(1.3, 7.0)
        assert np.array_equal(cov, cov.T)
        assert np.linalg.eigvalsh(cov).min() >= -1e-12

    def test_monte_carlo_increment_covariance(self, rng):
        # Sample covariance of (x' - F x) over many draws should match Q.
        dt, q = 2.5, 16.0
        model = MotionModel.constant_velocity(dt, q)
        target = TargetTruth(id=0, spawn_time=0, despawn_time=10, state=[1e4, 2e4, 10.0, -5.0])
        fx = model.transition_matrix @ target.state
        draws = np.array([step_truth(target, model, rng).state - fx for _ in range(100_000)])
        sample_cov = np.cov(draws.T)
        expected = model.process_noise_cov
        scale = math.sqrt(expected[0, 0] * expected[2, 2])
        for i in range(4):
            for j in range(4):
                if expected[i, j] != 0.0:
                    assert abs(sample_cov[i, j] - expected[i, j]) <= 0.05 * abs(expected[i, j])
                else:
                    assert abs(sample_cov[i, j]) <= 0.02 * scale


class TestMeasure:
    def test_pythagorean_case(self):
        z = measure([3.0, 4.0, 0.0, 0.0], np.diag([1.0, 1.0]))
        assert z.range_m == pytest.approx(5.0)
        assert z.azimuth == pytest.approx(math.atan2(4.0, 3.0))

    def test_negative_axis_wraps_to_pi(self):
        z = measure([-1.0, 0.0, 0.0, 0.0], np.diag([1.0, 1.0]))
        assert z.range_m == pytest.approx(1.0)
        assert z.azimuth == pytest.approx(math.pi)

    def test_origin_raises(self):
        with pytest.raises(ValueError):
            measure([0.0, 0.0, 1.0, 1.0], np.diag([1.0, 1.0]))

    def test_noise_std_matches_configured_variance(self, rng):
        cov = np.diag([16.0, 1e-6])
        state = [8000.0, 6000.0, 0.0, 0.0]
        ranges = np.array([measure(state, cov, rng).range_m for _ in range(100_000)])
        assert np.std(ranges) == pytest.approx(4.0, rel=0.02)

    def test_empirical_covariance_converges_to_r(self, rng):
        cov = np.diag([16.0, 1e-6])
        state = np.array([8000.0, 6000.0, 0.0, 0.0])
        truth = measurement_function(state)
        zs = np.array(
            [
                [m.range_m - truth[0], wrap_angle(m.azimuth - truth[1])]
                for m in (measure(state, cov, rng) for _ in range(100_000))
            ]
        )
        sample = np.cov(zs.T)
        assert sample[0, 0] == pytest.approx(16.0, rel=0.05)
        assert sample[1, 1] == pytest.approx(1e-6, rel=0.05)

    def test_unit_draws_are_deterministic(self):
        cov = np.diag([16.0, 1e-6])
        a = measure([5e3, 1e3, 0, 0], cov, unit=[0.5, -1.5])
        b = measure([5e3, 1e3, 0, 0], cov, unit=[0.5, -1.5])
        assert a.range_m == b.range_m and a.azimuth == b.azimuth

    def test_noise_cov_must_be_positive(self):
        with pytest.raises(ValueError):
            Measurement(range_m=1.0, azimuth=0.0, noise_cov=np.diag([1.0, 0.0]))


class TestJacobian:
    def test_unit_x_axis(self):
        assert np.allclose(
            measurement_jacobian([1.0, 0.0, 0.0, 0.0]),
            [[1, 0, 0, 0], [0, 1, 0, 0]],
        )

    def test_y_axis_case(self):
        assert np.allclose(
            measurement_jacobian([0.0, 2.0, 0.0, 0.0]),
            [[0, 1, 0, 0], [-0.5, 0, 0, 0]],
        )

    def test_origin_raises(self):
        with pytest.raises(ValueError):
            measurement_jacobian([0.0, 0.0, 1.0, 0.0])

    def test_matches_finite_differences(self, rng):
        # Central finite differences of h as an independent oracle.
        for _ in range(50):
            state = np.concatenate([rng.uniform(-1e4, 1e4, 2), rng.uniform(-100, 100, 2)])
            if math.hypot(state[0], state[1]) < 1.0:
                continue
            jac = measurement_jacobian(state)
            eps = 1e-3
            fd = np.zeros((2, 4))
            for k in range(4):
                dx = np.zeros(4)
                dx[k] = eps
                hi = measurement_function(state + dx)
                lo = measurement_function(state - dx)
                diff = hi - lo
                diff[1] = wrap_angle(diff[1])
                fd[:, k] = diff / (2 * eps)
            assert np.allclose(jac, fd, rtol=1e-6, atol=1e-9)


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_wrap_angle_range_property(theta):
    w = float(wrap_angle(theta))
    assert -math.pi < w <= math.pi
    # Wrapped angle differs from the input by an integer number of turns.
    turns = (theta - w) / (2 * math.pi)
    assert abs(turns - round(turns)) < 1e-6


def test_wrap_angle_boundary_values():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


class TestScenario:
    def scripted_config(self, **kw):
        defaults = dict(
            max_targets=2,
            episode_length=50,
            cycle_duration=2.5,
            maneuver_intensity=16.0,
            rng_seed=7,
            schedule=(
                SpawnRecord(spawn=5, despawn=30, x=4e3, y=1e3, vx=10.0, vy=-5.0),
                SpawnRecord(spawn=10, despawn=50, x=-3e3, y=2e3, vx=-8.0, vy=12.0),
            ),
        )
        defaults.update(kw)
        return ScenarioConfig(**defaults)

    def test_no_targets_before_first_spawn(self):
        scenario = Scenario(self.scripted_config())
        assert advance_scenario(scenario, 2) == []

    def test_single_target_within_window(self):
        scenario = Scenario(self.scripted_config())
        active = advance_scenario(scenario, 7)
        assert len(active) == 1
        assert active[0].id == 0

    def test_spawn_state_is_initial_state(self):
        scenario = Scenario(self.scripted_config())
        (target,) = advance_scenario(scenario, 5)
        assert np.allclose(target.state, [4e3, 1e3, 10.0, -5.0])

    def test_despawn_is_exclusive(self):
        scenario = Scenario(self.scripted_config())
        ids = {t.id for t in advance_scenario(scenario, 29)}
        assert 0 in ids
        ids = {t.id for t in advance_scenario(scenario, 30)}
        assert 0 not in ids

    def test_out_of_episode_slot_raises(self):
        scenario = Scenario(self.scripted_config())
        with pytest.raises(IndexError):
            advance_scenario(scenario, 50)

    def test_same_seed_gives_identical_truth(self):
        config = ScenarioConfig(max_targets=3, episode_length=200, rng_seed=42, schedule=None)
        a, b = Scenario(config, seed_offset=3), Scenario(config, seed_offset=3)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.active, b.active)
        assert np.array_equal(a.meas_units, b.meas_units)
        assert np.array_equal(a.detect_uniforms, b.detect_uniforms)

    def test_different_offsets_differ(self):
        config = ScenarioConfig(max_targets=3, episode_length=200, rng_seed=42, schedule=None)
        a, b = Scenario(config, seed_offset=0), Scenario(config, seed_offset=1)
        assert not np.array_equal(a.meas_units, b.meas_units)

    def test_truth_states_finite_while_active(self):
        config = ScenarioConfig(max_targets=3, episode_length=300, rng_seed=11, schedule=None)
        scenario = Scenario(config)
        assert np.all(np.isfinite(scenario.states[scenario.active]))

    def test_arena_radius_despawns_targets(self):
        config = self.scripted_config(
            arena_radius=4.2e3,
            schedule=(SpawnRecord(spawn=0, despawn=50, x=4e3, y=0.0, vx=300.0, vy=0.0),),
        )
        scenario = Scenario(config)
        active_per_slot = scenario.active[:, 0]
        assert active_per_slot[0]
        assert not active_per_slot[-1]
        # Once inactive, never active again for this record.
        first_off = int(np.argmin(active_per_slot))
        assert not active_per_slot[first_off:].any()

    def test_slot_reuse_assigns_disjoint_windows(self):
        config = self.scripted_config(
            max_targets=1,
            schedule=(
                SpawnRecord(spawn=0, despawn=10, x=4e3, y=0.0, vx=0.0, vy=0.0),
                SpawnRecord(spawn=15, despawn=40, x=2e3, y=2e3, vx=0.0, vy=0.0),
            ),
        )
        scenario = Scenario(config)
        assert scenario.record_slots == (0, 0)
        assert scenario.ids[5, 0] == 0
        assert scenario.ids[20, 0] == 1
        assert not scenario.active[12, 0]

    def test_truth_rows_schema(self):
        scenario = Scenario(self.scripted_config())
        rows = list(scenario.truth_rows())
        assert all(len(r) == 6 for r in rows)
        slots = [r[0] for r in rows]
        assert slots == sorted(slots)


def test_spawn_after_despawn_rejected():
    with pytest.raises(ValueError):
        TargetTruth(id=0, spawn_time=10, despawn_time=10, state=[1.0, 1.0, 0.0, 0.0])
