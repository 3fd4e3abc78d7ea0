"""Stage operations, frame transforms, the session tick and the loop."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microbeam import (
    BeamState,
    DirectorFrame,
    InvalidArgumentError,
    LoadSet,
    static_solve,
)
from microbeam.pipeline import (
    ScaleMap,
    StylusSample,
    TraceCommandSource,
    compute_feedback,
    compute_total_force,
    measure_displacement_reference,
    run_dual_rate,
    scale_load_to_micro,
    transform_to_moving_frame,
    transform_to_reference,
)
from microbeam.service import CONFIG_DEFAULTS, build_session_config
from microbeam.session import (
    ApplyStylus,
    HapticSession,
    Pause,
    ResetFailure,
    Resume,
    SelectStructure,
    SetParameter,
    StructurePreset,
)

SCALE = ScaleMap()


def default_config(**overrides):
    values = dict(CONFIG_DEFAULTS)
    values.update(overrides)
    return build_session_config(values)


def _rotation_frame(angle):
    """General orthonormal frame: the global triad rotated about +z."""
    c, s = math.cos(angle), math.sin(angle)
    d1 = np.array([c, s, 0.0])
    d2 = np.array([-s, c, 0.0])
    return DirectorFrame(d1=d1, d2=d2, d3=np.cross(d1, d2),
                         origin=np.zeros(3))


class TestScaling:
    def test_device_to_micro_definition(self):
        micro = scale_load_to_micro(np.array([0.0, 1.0, 0.0]), SCALE)
        assert np.allclose(micro, [0.0, 1e-6, 0.0], rtol=1e-15)

    def test_zero_maps_to_zero(self):
        assert np.all(scale_load_to_micro(np.zeros(3), SCALE) == 0.0)

    def test_feedback_definition(self):
        device = compute_feedback(np.array([0.0, 1e-6, 0.0]), SCALE)
        assert np.allclose(device, [0.0, 1.0, 0.0], rtol=1e-15)

    def test_clamp_preserves_direction(self):
        device = compute_feedback(np.array([3e-6, 4e-6, 0.0]), SCALE)
        assert np.linalg.norm(device) == pytest.approx(SCALE.device_force_max,
                                                       rel=1e-12)
        assert device[0] / device[1] == pytest.approx(3.0 / 4.0, rel=1e-12)

    def test_round_trip_below_clamp(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            device = rng.uniform(-1.0, 1.0, size=3)  # well below the 3.3 N clamp
            back = compute_feedback(scale_load_to_micro(device, SCALE), SCALE)
            err = np.abs(back - device)
            assert np.all(err <= 1e-15 * np.maximum(np.abs(device), 1e-300))

    def test_scale_map_validation(self):
        with pytest.raises(InvalidArgumentError):
            ScaleMap(force_scale=0.0)
        with pytest.raises(InvalidArgumentError):
            ScaleMap(device_force_max=-1.0)


class TestFrameTransforms:
    def test_identity_frame(self):
        frame = DirectorFrame(d1=np.eye(3)[0], d2=np.eye(3)[1], d3=np.eye(3)[2],
                              origin=np.zeros(3))
        v = np.array([1.0, 2.0, 3.0])
        assert np.allclose(transform_to_moving_frame(v, frame), v, atol=1e-15)
        assert np.allclose(transform_to_reference(v, frame), v, atol=1e-15)

    def test_quarter_turn_maps_basis(self):
        frame = _rotation_frame(math.pi / 2.0)
        # the frame's first axis is e2, so local e1 lands on e2
        out = transform_to_reference(np.array([1.0, 0.0, 0.0]), frame)
        assert np.allclose(out, [0.0, 1.0, 0.0], atol=1e-15)

    @given(st.floats(-math.pi, math.pi),
           st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3))
    @settings(max_examples=300, deadline=None)
    def test_transforms_are_inverse_isometries(self, angle, vec):
        frame = _rotation_frame(angle)
        v = np.array(vec)
        local = transform_to_moving_frame(v, frame)
        assert abs(np.linalg.norm(local) - np.linalg.norm(v)) <= 1e-12 * max(
            1.0, np.linalg.norm(v))
        back = transform_to_reference(local, frame)
        assert np.abs(back - v).max() <= 1e-12 * max(1.0, np.abs(v).max())

    @given(st.floats(-10.0, 10.0), st.lists(st.floats(-1.0, 1.0),
                                            min_size=3, max_size=3))
    @settings(max_examples=300, deadline=None)
    def test_director_frame_round_trip(self, theta, vec):
        frame = DirectorFrame.from_tangent_angle(theta)
        v = np.array(vec)
        back = transform_to_reference(transform_to_moving_frame(v, frame), frame)
        assert np.abs(back - v).max() <= 1e-12


class TestStageThree:
    def setup_method(self):
        self.config = default_config().beam

    def test_zero_state_zero_load(self):
        state = BeamState.zeros(self.config)
        total, _ = compute_total_force(state, self.config, self.config.length,
                                       np.zeros(3))
        assert np.allclose(total, 0.0, atol=1e-30)

    def test_undeformed_beam_passes_external_through(self):
        state = BeamState.zeros(self.config)
        external = np.array([0.0, 2e-6, 0.0])
        total, frame = compute_total_force(state, self.config,
                                           self.config.length, external)
        assert np.allclose(transform_to_reference(total, frame), external,
                           rtol=1e-12)

    def test_equilibrium_total_vanishes(self):
        force = 1e-6
        attach = self.config.length
        state = static_solve(self.config, LoadSet.at_position(attach, force))
        external = np.array([0.0, force, 0.0])
        total, _ = compute_total_force(state, self.config, attach, external)
        assert np.linalg.norm(total) <= 1e-8 * force

    def test_equilibrium_total_vanishes_between_nodes(self):
        attach = 0.43 * self.config.length
        force = 5e-7
        state = static_solve(self.config, LoadSet.at_position(attach, force))
        total, _ = compute_total_force(state, self.config, attach,
                                       np.array([0.0, force, 0.0]))
        assert np.linalg.norm(total) <= 1e-8 * force


class TestMeasureDisplacement:
    def test_zero_state(self):
        config = default_config().beam
        state = BeamState.zeros(config)
        for s in (0.0, 0.3 * config.length, config.length):
            assert np.all(measure_displacement_reference(state, config, s) == 0.0)

    def test_attach_out_of_range(self):
        config = default_config().beam
        state = BeamState.zeros(config)
        with pytest.raises(InvalidArgumentError):
            measure_displacement_reference(state, config, -1e-6)
        with pytest.raises(InvalidArgumentError):
            measure_displacement_reference(state, config, 2 * config.length)

    def test_nodal_deflection(self):
        config = default_config().beam
        state = BeamState.zeros(config)
        state.q[2 * 5] = -1e-7
        disp = measure_displacement_reference(state, config,
                                              5 * config.element_length)
        assert disp[1] == pytest.approx(-1e-7, rel=1e-12)


def _press_and_drag_schedule(session_config, drag_device_y, start_tick=5,
                             hold_ticks=400):
    x_device = session_config.beam.length * session_config.scale_map.length_scale
    press = ApplyStylus(StylusSample((x_device, 0.0, 0.0), True, 0.0))
    drag = ApplyStylus(StylusSample((x_device, drag_device_y, 0.0), True, 1e-3))
    release = ApplyStylus(StylusSample((x_device, drag_device_y, 0.0), False, 2e-3))
    return {start_tick: [press], start_tick + 1: [drag],
            start_tick + hold_ticks: [release]}


class TestSessionCommands:
    def test_command_validation_and_ordering(self):
        session = HapticSession(default_config())
        ok, err = session.apply_command(SetParameter("youngs_modulus", -5.0))
        assert not ok and "youngs_modulus" in err
        ok, err = session.apply_command(SetParameter("nonsense", 1.0))
        assert not ok
        ok, err = session.apply_command(SetParameter("youngs_modulus", 200e9))
        assert ok
        assert session.beam.material.youngs_modulus == 200e9

    def test_stylus_timestamps_must_be_monotone(self):
        session = HapticSession(default_config())
        assert session.apply_command(
            ApplyStylus(StylusSample((0.0, 0.0, 0.0), True, 1.0)))[0]
        ok, err = session.apply_command(
            ApplyStylus(StylusSample((0.0, 0.0, 0.0), True, 0.5)))
        assert not ok and "non-decreasing" in err

    def test_doubling_modulus_halves_response(self):
        config = default_config()
        x_device = config.beam.length * config.scale_map.length_scale
        tip_defl = {}
        for scale in (1.0, 2.0):
            session = HapticSession(config)
            session.apply_command(SetParameter(
                "youngs_modulus", scale * config.beam.material.youngs_modulus))
            session.apply_command(ApplyStylus(
                StylusSample((x_device, 0.0, 0.0), True, 0.0)))
            session.apply_command(ApplyStylus(
                StylusSample((x_device, -0.005, 0.0), True, 1e-3)))
            for _ in range(400):
                session.advance()
            tip_defl[scale] = session.state.q[-2]
        assert tip_defl[1.0] < 0.0
        assert tip_defl[2.0] == pytest.approx(tip_defl[1.0] / 2.0, rel=1e-3)

    def test_remesh_reinterpolates_state(self):
        session = HapticSession(default_config())
        schedule = _press_and_drag_schedule(session_config=default_config(),
                                            drag_device_y=-0.005)
        for tick, commands in sorted(schedule.items()):
            while session.tick < tick:
                session.advance()
            for command in commands:
                session.apply_command(command)
        for _ in range(200):
            session.advance()
        tip_before = session.state.q[-2]
        ok, err = session.apply_command(SetParameter("n_elements", 48))
        assert ok, err
        assert session.beam.n_elements == 48
        assert session.state.q.shape == (2 * 49,)
        assert session.state.q[-2] == pytest.approx(tip_before, rel=1e-9)

    def test_select_structure_switches_boundary(self):
        session = HapticSession(default_config())
        ok, _ = session.apply_command(SelectStructure(StructurePreset.MICROBRIDGE))
        assert ok
        assert session.preset is StructurePreset.MICROBRIDGE
        assert session.beam.boundary.name == "CLAMPED_CLAMPED"
        assert np.all(session.state.q == 0.0)

    def test_pause_and_resume(self):
        session = HapticSession(default_config())
        session.apply_command(Pause())
        session.advance()
        session.advance()
        assert session.tick == 0
        assert session.sim_time == 0.0
        session.apply_command(Resume())
        session.advance()
        assert session.tick == 1


def _drive_until_stuck(session, config):
    x_device = config.beam.length * config.scale_map.length_scale
    session.apply_command(ApplyStylus(StylusSample((x_device, 0.0, 0.0), True, 0.0)))
    session.apply_command(ApplyStylus(StylusSample((x_device, -0.2, 0.0), True, 1e-3)))
    for _ in range(2000):
        session.advance()
        if session.status.is_stuck:
            return True
    return False


class TestSessionStiction:
    def test_contact_sticks_and_pins(self):
        config = default_config()
        session = HapticSession(config)
        assert _drive_until_stuck(session, config)
        gap = config.substrate.initial_gap
        for node in session.status.nodes:
            assert session.state.q[2 * node] == pytest.approx(-gap, rel=1e-12)
        # release: stuck nodes stay on the substrate
        x_device = config.beam.length * config.scale_map.length_scale
        session.apply_command(ApplyStylus(StylusSample((x_device, -0.2, 0.0),
                                                       False, 2e-3)))
        stuck = set(session.status.nodes)
        for _ in range(300):
            session.advance()
        assert session.status.is_stuck
        assert set(session.status.nodes) >= stuck
        for node in stuck:
            assert session.state.q[2 * node] == pytest.approx(-gap, rel=1e-12)

    def test_remesh_rejected_while_stuck(self):
        config = default_config()
        session = HapticSession(config)
        assert _drive_until_stuck(session, config)
        ok, err = session.apply_command(SetParameter("n_elements", 16))
        assert not ok and "reset" in err
        ok, err = session.apply_command(SetParameter("gap", 3e-6))
        assert not ok and "reset" in err

    def test_reset_failure_round_trip(self):
        config = default_config()
        session = HapticSession(config)
        assert _drive_until_stuck(session, config)
        session.apply_command(ResetFailure())
        fresh = HapticSession(config)
        assert np.array_equal(session.state.q, fresh.state.q)
        assert np.array_equal(session.state.q_dot, fresh.state.q_dot)
        assert np.array_equal(session.state.q_ddot, fresh.state.q_ddot)
        assert session.state.t == fresh.state.t == 0.0
        assert session.status == fresh.status
        assert session.stylus is None and session.attach is None
        assert session.matrices.constraints == fresh.matrices.constraints
        # idempotent
        before = session.state.q.copy()
        session.apply_command(ResetFailure())
        assert np.array_equal(session.state.q, before)


class TestDualRateLoop:
    def test_zero_duration_zero_ticks(self):
        session = HapticSession(default_config())
        stats = run_dual_rate(session, 0.0, realtime=False)
        assert stats.physics_ticks == 0
        assert stats.display_frames == 0
        assert stats.tick_compute_seconds == []

    def test_tick_and_frame_counts(self):
        session = HapticSession(default_config())
        stats = run_dual_rate(session, 2.0, realtime=False)
        assert stats.physics_ticks == 2000
        assert abs(stats.display_frames - 60) <= 1

    def test_free_run_trajectory_is_reproducible(self):
        config = default_config()
        schedule = _press_and_drag_schedule(config, -0.01)
        results = []
        for _ in range(2):
            session = HapticSession(config)
            run_dual_rate(session, 1.0,
                          command_source=TraceCommandSource(dict(schedule)),
                          realtime=False)
            results.append(session.state.q.copy())
        assert np.array_equal(results[0], results[1])

    def test_commands_counted(self):
        config = default_config()
        session = HapticSession(config)
        schedule = {3: [SetParameter("youngs_modulus", 100e9)],
                    5: [SetParameter("youngs_modulus", -1.0)]}
        stats = run_dual_rate(session, 0.02,
                              command_source=TraceCommandSource(schedule),
                              realtime=False)
        assert stats.commands_applied == 1
        assert stats.commands_rejected == 1
