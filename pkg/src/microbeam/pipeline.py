"""The per-tick haptic pipeline and the dual-rate loop.

Each physics tick runs five stages around the integrator: (1) scale the
device-space load down to the micro world, (2) measure the attach-point
displacement in the reference frame, (3) sum external, elastic-restoring and
surface forces in the moving frame of the attach point, (4) transform the
total back to the reference frame, (5) scale it up and clamp it into the
device feedback range. The loop drives physics at 1 kHz and publishes
display snapshots at 30 Hz; simulation time advances strictly by the fixed
step, never by the wall clock, so trajectories are replayable bit-exactly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import model
from .errors import InvalidArgumentError

PHYSICS_RATE_HZ = 1000.0
DISPLAY_RATE_HZ = 30.0

# catching up more than this many ticks behind the wall clock flags the run
# as degraded (the loop never skips a tick)
MAX_BACKLOG_TICKS = 4


@dataclass(frozen=True)
class ScaleMap:
    """Device-world <-> micro-world scale factors and the feedback clamp.

    ``drag_stiffness`` converts stylus drag distance (device meters) into a
    device-space force; the default makes a 10 cm drag saturate the clamp.
    """

    length_scale: float = 1e3      # device meters per micro meter
    force_scale: float = 1e6       # device newtons per micro newton
    device_force_max: float = 3.3  # N
    drag_stiffness: float = 33.0   # N per device meter of drag

    def __post_init__(self):
        for name in ("length_scale", "force_scale", "device_force_max", "drag_stiffness"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise InvalidArgumentError(f"{name} must be finite and positive")


@dataclass(frozen=True)
class StylusSample:
    """One stylus pose: device-space position, contact flag, session time."""

    position: tuple
    applied: bool
    timestamp: float

    def __post_init__(self):
        if len(self.position) != 3 or not all(math.isfinite(c) for c in self.position):
            raise InvalidArgumentError("stylus position must be a finite 3-vector")


@dataclass(frozen=True)
class HapticFrame:
    """Per-tick exchange record: applied micro load and rendered feedback."""

    tick: int
    attach_position: float | None
    micro_load: np.ndarray          # micro-world force vector actually applied
    total_force_moving: np.ndarray  # stage-3 sum in the attach frame
    feedback_device: np.ndarray     # stage-5 clamped device-space force
    stiction_state: int


# ---------------------------------------------------------------------------
# Stage operations
# ---------------------------------------------------------------------------

def scale_load_to_micro(device_force, scale_map):
    """Stage 1: device-space force to micro-world force."""
    return np.asarray(device_force, dtype=float) / scale_map.force_scale


def measure_displacement_reference(state, config, attach):
    """Stage 2: interpolated centroid displacement at the attach position."""
    w, _ = model.interpolate_deflection(state, config, attach)
    return np.array([0.0, w, 0.0])


def transform_to_moving_frame(vec, frame):
    """Stage 3 helper: express a reference-frame vector in the director triad."""
    v = np.asarray(vec, dtype=float)
    return np.array([v @ frame.d1, v @ frame.d2, v @ frame.d3])


def transform_to_reference(local, frame):
    """Stage 4: inverse of transform_to_moving_frame."""
    return local[0] * frame.d1 + local[1] * frame.d2 + local[2] * frame.d3


def compute_total_force(state, config, attach, external_micro,
                        surface_forces=None, matrices=None, axial_n=None):
    """Stage 3: external + elastic restoring + surface force at the attach point.

    The elastic and surface contributions are felt at the attach point
    through the consistent-load pairing (projection onto the unit point-load
    vector), which makes the total vanish identically at a converged
    equilibrium. Out-of-plane components of the external load pass through
    unreacted (planar model). Returned in the attach point's moving frame.
    """
    matrices = matrices if matrices is not None else model.assemble_system(config)
    if axial_n is None:
        axial_n = model.axial_force(state, config)
    p = model.consistent_point_load(config, attach, 1.0)
    internal = matrices.k_lin @ state.q
    if axial_n != 0.0:
        internal = internal - axial_n * (matrices.k_geo @ state.q)
    reaction = -internal
    if surface_forces is not None:
        reaction = reaction + surface_forces
    felt = (p @ reaction) / (p @ p)
    total_ref = np.asarray(external_micro, dtype=float) + np.array([0.0, felt, 0.0])
    _, theta = model.interpolate_deflection(state, config, attach)
    frame = model.DirectorFrame.from_tangent_angle(theta)
    return transform_to_moving_frame(total_ref, frame), frame


def compute_feedback(total_micro, scale_map):
    """Stage 5: scale the total micro force up and clamp its magnitude."""
    device = np.asarray(total_micro, dtype=float) * scale_map.force_scale
    magnitude = float(np.linalg.norm(device))
    if magnitude > scale_map.device_force_max:
        device = device * (scale_map.device_force_max / magnitude)
    return device


# ---------------------------------------------------------------------------
# Loop statistics
# ---------------------------------------------------------------------------

@dataclass
class LoopStats:
    """Deadline accounting for one dual-rate run."""

    physics_period_target: float = 1.0 / PHYSICS_RATE_HZ
    display_period_target: float = 1.0 / DISPLAY_RATE_HZ
    physics_ticks: int = 0
    display_frames: int = 0
    commands_applied: int = 0
    commands_rejected: int = 0
    missed_deadlines: int = 0
    late_start_ticks: int = 0
    max_backlog_ticks: int = 0
    degraded: bool = False
    degraded_events: int = 0
    wall_duration: float = 0.0
    tick_compute_seconds: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        import collections
        self._recent = collections.deque(maxlen=1024)
        self._worst = 0.0
        self._recent_missed = collections.deque(maxlen=1024)

    def record_tick(self, duration):
        self.physics_ticks += 1
        self.tick_compute_seconds.append(duration)
        self._recent.append(duration)
        if duration > self._worst:
            self._worst = duration

    @property
    def worst_tick_latency(self):
        return self._worst

    @property
    def p99_tick_latency(self):
        """Exact p99 over the whole run (full sort; call after the loop)."""
        if not self.tick_compute_seconds:
            return 0.0
        return float(np.percentile(self.tick_compute_seconds, 99.0))

    @property
    def missed_deadline_rate(self):
        return self.missed_deadlines / self.physics_ticks if self.physics_ticks else 0.0

    def summary(self, exact=False):
        """Counters plus latency percentiles.

        In-loop callers (snapshots) get the p99 of a bounded recent window so
        the cost stays O(1) in run length; pass exact=True after the run for
        the whole-run percentile.
        """
        if exact:
            p99 = self.p99_tick_latency
        else:
            p99 = float(np.percentile(self._recent, 99.0)) if self._recent else 0.0
        return {
            "physics_ticks": self.physics_ticks,
            "display_frames": self.display_frames,
            "commands_applied": self.commands_applied,
            "commands_rejected": self.commands_rejected,
            "missed_deadlines": self.missed_deadlines,
            "missed_deadline_rate": self.missed_deadline_rate,
            "late_start_ticks": self.late_start_ticks,
            "worst_tick_latency_s": self.worst_tick_latency,
            "p99_tick_latency_s": p99,
            "max_backlog_ticks": self.max_backlog_ticks,
            "degraded": self.degraded,
            "degraded_events": self.degraded_events,
            "wall_duration_s": self.wall_duration,
        }

    def to_text(self):
        lines = ["loop-stats/1"]
        for key, value in self.summary(exact=True).items():
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Dual-rate loop
# ---------------------------------------------------------------------------

class TraceCommandSource:
    """Deterministic command schedule: tick index -> list of commands."""

    def __init__(self, schedule):
        self.schedule = dict(schedule)

    def drain(self, tick):
        return self.schedule.pop(tick, [])


class QueueCommandSource:
    """Thread-safe FIFO for live sessions; drained fully at each tick start."""

    def __init__(self):
        import collections
        import threading
        self._items = collections.deque()
        self._lock = threading.Lock()

    def put(self, command):
        with self._lock:
            self._items.append(command)

    def drain(self, tick):
        with self._lock:
            items = list(self._items)
            self._items.clear()
        return items


def _sleep_until(deadline):
    # time.sleep granularity is far above 1 ms on stock kernels; sleep only
    # for the coarse part and spin the rest. No sched_yield in the spin: under
    # a loaded host a single yield can stall for milliseconds. Cross-thread
    # GIL fairness is handled by the interpreter switch interval instead.
    while True:
        remaining = deadline - time.perf_counter()
        if remaining <= 0.0:
            return
        if remaining > 0.0035:
            time.sleep(remaining - 0.003)
        # spin


def run_dual_rate(session, duration, command_source=None, snapshot_sink=None,
                  realtime=True, tick_sink=None, applied_log=None):
    """Run the dual-rate loop for ``duration`` seconds of simulation time.

    The physics loop executes {drain commands -> stages 1-4 -> step ->
    stiction update -> stage 5} per tick; snapshots are emitted whenever
    simulation time crosses a display-frame boundary, so a real-time run
    publishes at the display rate and a free run preserves the identical
    emission schedule. Late ticks are counted, never skipped; falling more
    than MAX_BACKLOG_TICKS behind flags the run as degraded.

    Command-source entries may be bare commands or (command, reply_callback)
    pairs; accepted commands are appended to ``applied_log`` as (tick,
    command) when a log list is supplied.
    """
    import gc

    dt = session.options.dt
    n_ticks = int(round(duration / dt))
    stats = LoopStats(physics_period_target=dt)
    display_period = 1.0 / DISPLAY_RATE_HZ
    next_frame_time = 0.0

    session.warmup()
    # collector pauses show up as multi-ms deadline misses; the loop's
    # allocations are acyclic, so refcounting alone reclaims them
    gc_was_enabled = gc.isenabled()
    gc.disable()
    t_start = time.perf_counter()
    for k in range(n_ticks):
        tick_started = time.perf_counter()
        if command_source is not None:
            for item in command_source.drain(k):
                command, callback = item if isinstance(item, tuple) else (item, None)
                ok, err = session.apply_command(command)
                if ok:
                    stats.commands_applied += 1
                    if applied_log is not None:
                        applied_log.append((k, command))
                else:
                    stats.commands_rejected += 1
                if callback is not None:
                    callback(ok, err)
        frame = session.advance()
        if tick_sink is not None:
            tick_sink(session, frame)
        if session.sim_time + 0.5 * dt >= next_frame_time:
            snapshot = session.snapshot(stats)
            session.publish(snapshot)
            if snapshot_sink is not None:
                snapshot_sink(snapshot)
            stats.display_frames += 1
            next_frame_time += display_period
        done = time.perf_counter()
        compute = done - tick_started
        stats.record_tick(compute)
        if realtime:
            # absolute schedule: tick k is due at t_start + (k+1)*dt and the
            # loop always catches a backlog up (ticks are never skipped). A
            # deadline is charged as missed when this tick's own compute
            # window overran dt; ticks that merely *started* late because the
            # host stalled the process show up in late_start_ticks and the
            # backlog high-water mark instead.
            scheduled_start = t_start + k * dt
            deadline = scheduled_start + dt
            if tick_started > deadline:
                stats.late_start_ticks += 1
            missed = done > max(deadline, tick_started + dt)
            if missed:
                stats.missed_deadlines += 1
            stats._recent_missed.append(missed)
            if done > deadline:
                backlog = int((done - deadline) / dt)
                stats.max_backlog_ticks = max(stats.max_backlog_ticks, backlog)
            if (len(stats._recent_missed) == stats._recent_missed.maxlen
                    and sum(stats._recent_missed) > MAX_BACKLOG_TICKS):
                # sustained compute overruns: signal that the session should
                # shed cost (fewer elements or stronger modal truncation)
                if not stats.degraded:
                    stats.degraded_events += 1
                stats.degraded = True
            else:
                stats.degraded = False
            if done < deadline:
                _sleep_until(deadline)
    stats.wall_duration = time.perf_counter() - t_start
    if gc_was_enabled:
        gc.enable()
    return stats
