"""Live simulation session: state ownership, command handling, snapshots.

A session owns one beam, its substrate, the stiction status and the
transient solver. Commands arrive at tick boundaries in arrival order;
snapshots are immutable value objects handed to observers. Everything the
session does is a deterministic function of the command/tick sequence.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels, model, pipeline, solver, stiction
from .errors import InvalidArgumentError, InvalidConfigError


class StructurePreset(enum.Enum):
    CANTILEVER = "Cantilever"
    MICROBRIDGE = "Microbridge"

    @property
    def boundary(self):
        if self is StructurePreset.CANTILEVER:
            return model.BoundaryCondition.CLAMPED_FREE
        return model.BoundaryCondition.CLAMPED_CLAMPED


@dataclass(frozen=True)
class SessionConfig:
    """Everything needed to start a session."""

    beam: model.BeamConfig
    substrate: stiction.SubstrateConfig
    scale_map: pipeline.ScaleMap
    options: solver.SolveOptions
    preset: StructurePreset

    def __post_init__(self):
        if self.preset.boundary is not self.beam.boundary:
            raise InvalidConfigError(
                f"preset {self.preset.value} requires boundary {self.preset.boundary}, "
                f"got {self.beam.boundary}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

PARAMETER_NAMES = ("youngs_modulus", "density", "n_elements", "length",
                   "width", "thickness", "gap")


@dataclass(frozen=True)
class ApplyStylus:
    sample: pipeline.StylusSample


@dataclass(frozen=True)
class SetParameter:
    name: str
    value: float


@dataclass(frozen=True)
class SelectStructure:
    preset: StructurePreset


@dataclass(frozen=True)
class ResetFailure:
    pass


@dataclass(frozen=True)
class Pause:
    pass


@dataclass(frozen=True)
class Resume:
    pass


# ---------------------------------------------------------------------------
# Snapshot
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Snapshot:
    """Immutable view of the session published at the display rate."""

    tick: int
    sim_time: float
    deflections: tuple
    rotations: tuple
    directors: tuple          # per node ((d1), (d2), (d3))
    gaps: tuple
    contact: tuple
    stiction_state: int
    stuck_nodes: tuple
    stick_time: float | None
    feedback_device: tuple
    applied: bool
    attach_position: float | None
    attach_displacement: float
    parameters: dict
    stats: dict | None

    def to_dict(self):
        return {
            "tick": self.tick,
            "sim_time": self.sim_time,
            "deflections": list(self.deflections),
            "rotations": list(self.rotations),
            "directors": [[list(d) for d in node] for node in self.directors],
            "gaps": list(self.gaps),
            "contact": list(self.contact),
            "stiction_state": self.stiction_state,
            "stuck_nodes": list(self.stuck_nodes),
            "stick_time": self.stick_time,
            "feedback_device": list(self.feedback_device),
            "applied": self.applied,
            "attach_position": self.attach_position,
            "attach_displacement": self.attach_displacement,
            "parameters": dict(self.parameters),
            "stats": dict(self.stats) if self.stats is not None else None,
        }


# ---------------------------------------------------------------------------
# Session
# ---------------------------------------------------------------------------

class HapticSession:
    """Owner of one live simulation; drive it with apply_command / advance."""

    def __init__(self, config: SessionConfig, surface_model=None):
        self.beam = config.beam
        self.substrate = config.substrate
        self.scale_map = config.scale_map
        self.options = config.options
        self.preset = config.preset
        self.surface_model = surface_model or stiction.NullSurfaceForce()
        self.state = model.BeamState.zeros(self.beam)
        self.status = stiction.StictionStatus.free()
        self.paused = False
        self.tick = 0
        self.stylus = None
        self.grab_position = None
        self.attach = None
        self.latest_snapshot = None
        self.last_frame = self._idle_frame()
        self._rebuild()

    # -- construction ------------------------------------------------------

    @property
    def sim_time(self):
        return self.state.t

    def _idle_frame(self):
        return pipeline.HapticFrame(
            tick=self.tick, attach_position=None, micro_load=np.zeros(3),
            total_force_moving=np.zeros(3), feedback_device=np.zeros(3),
            stiction_state=int(self.status.state))

    def _effective_options(self, matrices):
        modes = self.options.modal_modes
        if modes:
            modes = min(modes, matrices.free_dofs.size)
        return replace(self.options, modal_modes=modes)

    def _rebuild(self):
        matrices = model.assemble_system(self.beam)
        if self.status.is_stuck:
            matrices = stiction.apply_stuck_constraints(
                matrices, self.status.nodes, self.substrate)
        self.matrices = matrices
        self.solver = solver.TransientSolver(
            self.beam, self._effective_options(matrices), matrices)

    def warmup(self):
        """Compile/jit-prime every per-tick path before deadline pacing starts."""
        kernels.warmup()
        probe = HapticSession.__new__(HapticSession)
        probe.__dict__.update(self.__dict__)
        probe.state = self.state.copy()
        probe.last_frame = self.last_frame
        probe.advance()
        probe.snapshot(None)

    # -- commands ----------------------------------------------------------

    def apply_command(self, command):
        """Apply one command; returns (ok, error_message)."""
        try:
            if isinstance(command, ApplyStylus):
                return self._apply_stylus(command.sample)
            if isinstance(command, SetParameter):
                return self._set_parameter(command.name, command.value)
            if isinstance(command, SelectStructure):
                return self._select_structure(command.preset)
            if isinstance(command, ResetFailure):
                self.reset_failure()
                return True, None
            if isinstance(command, Pause):
                self.paused = True
                return True, None
            if isinstance(command, Resume):
                self.paused = False
                return True, None
        except (InvalidConfigError, InvalidArgumentError) as exc:
            return False, str(exc)
        return False, f"unknown command {type(command).__name__}"

    def _apply_stylus(self, sample):
        if self.stylus is not None and sample.timestamp < self.stylus.timestamp:
            return False, "stylus timestamps must be non-decreasing"
        rising = sample.applied and (self.stylus is None or not self.stylus.applied
                                     or self.grab_position is None)
        self.stylus = sample
        if rising:
            self.grab_position = np.asarray(sample.position, dtype=float)
            micro_x = sample.position[0] / self.scale_map.length_scale
            self.attach = min(max(micro_x, 0.0), self.beam.length)
        elif not sample.applied:
            self.grab_position = None
            self.attach = None
        return True, None

    def _set_parameter(self, name, value):
        if name not in PARAMETER_NAMES:
            return False, f"unknown parameter {name!r}"
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            return False, f"parameter {name} must be a finite number"
        if name == "gap":
            if self.status.is_stuck:
                return False, "cannot change the gap while stuck; reset failure first"
            self.substrate = stiction.SubstrateConfig(float(value),
                                                      self.substrate.warn_fraction)
            return True, None
        if name == "n_elements":
            if self.status.is_stuck:
                return False, "cannot remesh while stuck; reset failure first"
            n = int(value)
            if n != value:
                return False, "n_elements must be an integer"
            new_beam = replace(self.beam, n_elements=n)
            self._remesh(new_beam)
            return True, None
        material, section = self.beam.material, self.beam.section
        if name == "youngs_modulus":
            material = model.MaterialProperties(float(value), material.density)
        elif name == "density":
            material = model.MaterialProperties(material.youngs_modulus, float(value))
        elif name == "width":
            section = model.CrossSection(float(value), section.thickness)
        elif name == "thickness":
            section = model.CrossSection(section.width, float(value))
        new_beam = replace(self.beam, material=material, section=section,
                           length=float(value) if name == "length" else self.beam.length)
        self.beam = new_beam
        self._rebuild()
        return True, None

    def _remesh(self, new_beam):
        """Re-interpolate the state onto a new mesh via the shape functions."""
        old_beam, old_state = self.beam, self.state
        n = new_beam.n_dof
        vectors = []
        for source in (old_state.q, old_state.q_dot, old_state.q_ddot):
            probe = model.BeamState(source, np.zeros_like(source), np.zeros_like(source),
                                    0.0)
            out = np.empty(n)
            for i, x in enumerate(np.linspace(0.0, new_beam.length, new_beam.n_nodes)):
                w, theta = model.interpolate_deflection(probe, old_beam, x)
                out[2 * i] = w
                out[2 * i + 1] = theta
            vectors.append(out)
        self.beam = new_beam
        self.state = model.BeamState(vectors[0], vectors[1], vectors[2], old_state.t)
        self._rebuild()

    def _select_structure(self, preset):
        if not isinstance(preset, StructurePreset):
            return False, f"unknown structure preset {preset!r}"
        self.preset = preset
        self.beam = replace(self.beam, boundary=preset.boundary)
        self.state = model.BeamState.zeros(self.beam)
        self.status = stiction.StictionStatus.free()
        self.stylus = None
        self.grab_position = None
        self.attach = None
        self._rebuild()
        self.last_frame = self._idle_frame()
        return True, None

    def reset_failure(self):
        """Restore the pristine session: zero state, Free status, no load."""
        self.state = model.BeamState.zeros(self.beam)
        self.status = stiction.StictionStatus.free()
        self.stylus = None
        self.grab_position = None
        self.attach = None
        self._rebuild()
        self.last_frame = self._idle_frame()

    # -- per-tick pipeline ---------------------------------------------------

    def advance(self):
        """One physics tick: stages 1-4, integrate, stiction update, stage 5."""
        if self.paused:
            return self.last_frame

        applied = (self.stylus is not None and self.stylus.applied
                   and self.grab_position is not None and self.attach is not None)
        device_force = np.zeros(3)
        if applied:
            drag = np.asarray(self.stylus.position, dtype=float) - self.grab_position
            device_force = self.scale_map.drag_stiffness * drag
        micro_force = pipeline.scale_load_to_micro(device_force, self.scale_map)

        profile = stiction.evaluate_gaps(self.state, self.beam, self.substrate)
        f_surface = np.zeros(self.beam.n_dof)
        f_surface[0::2] = self.surface_model.per_node_force(profile.gaps)
        f_vector = f_surface
        if applied:
            f_vector = f_vector + micro_force[1] * model.consistent_point_load(
                self.beam, self.attach, 1.0)

        axial_n = model.axial_force(self.state, self.beam)
        if applied:
            displacement = pipeline.measure_displacement_reference(
                self.state, self.beam, self.attach)
            total_moving, frame = pipeline.compute_total_force(
                self.state, self.beam, self.attach, micro_force,
                surface_forces=f_surface, matrices=self.matrices, axial_n=axial_n)
            total_reference = pipeline.transform_to_reference(total_moving, frame)
            attach_displacement = float(displacement[1])
        else:
            total_moving = np.zeros(3)
            total_reference = np.zeros(3)
            attach_displacement = 0.0

        self.state = self.solver.step(self.state, f_vector)

        profile = stiction.evaluate_gaps(self.state, self.beam, self.substrate)
        new_status = stiction.update_stiction(self.status, profile, self.substrate,
                                              self.state.t)
        if new_status.is_stuck and new_status.nodes != self.status.nodes:
            self._pin_stuck_nodes(new_status.nodes)
        self.status = new_status

        feedback = pipeline.compute_feedback(total_reference, self.scale_map)
        self.tick += 1
        self.last_frame = pipeline.HapticFrame(
            tick=self.tick,
            attach_position=self.attach if applied else None,
            micro_load=micro_force if applied else np.zeros(3),
            total_force_moving=total_moving,
            feedback_device=feedback,
            stiction_state=int(new_status.state),
        )
        return self.last_frame

    def _pin_stuck_nodes(self, nodes):
        already = {dof for dof, _ in self.matrices.constraints}
        for node in nodes:
            dof = 2 * int(node)
            if dof in already:
                continue
            self.state.q[dof] = -self.substrate.initial_gap
            self.state.q_dot[dof] = 0.0
            self.state.q_ddot[dof] = 0.0
        self.matrices = stiction.apply_stuck_constraints(
            model.assemble_system(self.beam), nodes, self.substrate)
        self.solver = solver.TransientSolver(
            self.beam, self._effective_options(self.matrices), self.matrices)

    # -- observation ---------------------------------------------------------

    def parameters(self):
        return {
            "structure": self.preset.value,
            "length_m": self.beam.length,
            "width_m": self.beam.section.width,
            "thickness_m": self.beam.section.thickness,
            "youngs_modulus_pa": self.beam.material.youngs_modulus,
            "density_kgm3": self.beam.material.density,
            "n_elements": self.beam.n_elements,
            "gap_m": self.substrate.initial_gap,
            "warn_fraction": self.substrate.warn_fraction,
        }

    def snapshot(self, stats=None):
        directors = model.director_array(self.state, self.beam).tolist()
        profile = stiction.evaluate_gaps(self.state, self.beam, self.substrate)
        frame = self.last_frame
        return Snapshot(
            tick=self.tick,
            sim_time=self.state.t,
            deflections=tuple(self.state.deflections().tolist()),
            rotations=tuple(self.state.rotations().tolist()),
            directors=tuple(tuple(tuple(d) for d in node) for node in directors),
            gaps=tuple(profile.gaps.tolist()),
            contact=tuple(bool(c) for c in profile.contact),
            stiction_state=int(self.status.state),
            stuck_nodes=tuple(sorted(self.status.nodes)),
            stick_time=self.status.stick_time,
            feedback_device=tuple(frame.feedback_device.tolist()),
            applied=bool(self.stylus.applied) if self.stylus else False,
            attach_position=frame.attach_position,
            attach_displacement=float(
                model.interpolate_deflection(self.state, self.beam,
                                             frame.attach_position)[0])
            if frame.attach_position is not None else 0.0,
            parameters=self.parameters(),
            stats=stats.summary() if stats is not None else None,
        )

    def publish(self, snapshot):
        self.latest_snapshot = snapshot
