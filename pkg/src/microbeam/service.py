"""Session hosting: config files, wire protocol, recordings, headless runs.

The wire protocol is JSON text messages (one per WebSocket frame) with a
``type`` field; docs/protocol.md documents every message. Config files are
plain ``key = value`` text with a fixed key set. Recordings are JSONL:
header, tick-stamped commands, end marker; replays reproduce trajectories
bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import replace

import numpy as np

from . import model, pipeline, solver, stiction
from .errors import InvalidConfigError, ProtocolError, RecordingError
from .session import (
    ApplyStylus,
    HapticSession,
    Pause,
    ResetFailure,
    Resume,
    SelectStructure,
    SessionConfig,
    SetParameter,
    Snapshot,
    StructurePreset,
)

PROTOCOL_VERSION = 1
RECORDING_VERSION = 1

CONFIG_KEYS = (
    "structure", "length_m", "width_m", "thickness_m", "youngs_modulus_pa",
    "density_kgm3", "n_elements", "gap_m", "warn_fraction", "length_scale",
    "force_scale", "device_force_max", "dt_s", "modal_modes",
    "damping_alpha", "damping_beta",
)

CONFIG_DEFAULTS = {
    "structure": "Cantilever",
    "length_m": 300e-6,
    "width_m": 20e-6,
    "thickness_m": 2e-6,
    "youngs_modulus_pa": 169e9,
    "density_kgm3": 2330.0,
    "n_elements": 32,
    "gap_m": 2e-6,
    "warn_fraction": 0.1,
    "length_scale": 1e3,
    "force_scale": 1e6,
    "device_force_max": 3.3,
    "dt_s": 1e-3,
    "modal_modes": 8,          # 0 disables modal reduction
    "damping_alpha": 0.0,
    "damping_beta": 1e-5,
}


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines into a SessionConfig; unknown keys rejected."""
    values = dict(CONFIG_DEFAULTS)
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ProtocolError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_KEYS:
            raise ProtocolError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ProtocolError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        if key == "structure":
            values[key] = value
        elif key in ("n_elements", "modal_modes"):
            try:
                values[key] = int(value)
            except ValueError as exc:
                raise ProtocolError(f"{source}:{lineno}: {key} must be an integer") from exc
        else:
            try:
                values[key] = float(value)
            except ValueError as exc:
                raise ProtocolError(f"{source}:{lineno}: {key} must be a number") from exc
    return build_session_config(values, source)


def build_session_config(values, source="<config>"):
    try:
        preset = StructurePreset(values["structure"])
    except ValueError:
        raise InvalidConfigError(
            f"{source}: structure must be one of "
            f"{[p.value for p in StructurePreset]}, got {values['structure']!r}")
    try:
        beam = model.BeamConfig(
            length=values["length_m"],
            material=model.MaterialProperties(values["youngs_modulus_pa"],
                                              values["density_kgm3"]),
            section=model.CrossSection(values["width_m"], values["thickness_m"]),
            n_elements=values["n_elements"],
            boundary=preset.boundary,
        )
        substrate = stiction.SubstrateConfig(values["gap_m"], values["warn_fraction"])
        scale_map = pipeline.ScaleMap(
            length_scale=values["length_scale"],
            force_scale=values["force_scale"],
            device_force_max=values["device_force_max"],
        )
        options = solver.SolveOptions(
            dt=values["dt_s"],
            damping_alpha=values["damping_alpha"],
            damping_beta=values["damping_beta"],
            modal_modes=values["modal_modes"] or None,
        )
    except InvalidConfigError as exc:
        raise InvalidConfigError(f"{source}: {exc}") from exc
    return SessionConfig(beam=beam, substrate=substrate, scale_map=scale_map,
                         options=options, preset=preset)


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=str(path))


def config_values(config):
    """The flat key/value view of a SessionConfig (the file and wire format)."""
    return {
        "structure": config.preset.value,
        "length_m": config.beam.length,
        "width_m": config.beam.section.width,
        "thickness_m": config.beam.section.thickness,
        "youngs_modulus_pa": config.beam.material.youngs_modulus,
        "density_kgm3": config.beam.material.density,
        "n_elements": config.beam.n_elements,
        "gap_m": config.substrate.initial_gap,
        "warn_fraction": config.substrate.warn_fraction,
        "length_scale": config.scale_map.length_scale,
        "force_scale": config.scale_map.force_scale,
        "device_force_max": config.scale_map.device_force_max,
        "dt_s": config.options.dt,
        "modal_modes": config.options.modal_modes or 0,
        "damping_alpha": config.options.damping_alpha,
        "damping_beta": config.options.damping_beta,
    }


def serialize_config(config):
    lines = []
    for key, value in config_values(config).items():
        rendered = value if isinstance(value, str) else repr(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Wire protocol
# ---------------------------------------------------------------------------

def encode_message(payload):
    return json.dumps(payload, separators=(",", ":"), allow_nan=False)


def decode_message(text):
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed message: {exc}") from exc
    if not isinstance(payload, dict) or "type" not in payload:
        raise ProtocolError("message must be an object with a 'type' field")
    return payload


def hello_message(config):
    return {"type": "hello", "protocol_version": PROTOCOL_VERSION,
            "config": config_values(config)}


def snapshot_message(snapshot):
    body = snapshot.to_dict()
    body["type"] = "snapshot"
    return body


def stats_message(stats):
    return {"type": "stats", **stats.summary()}


def encode_command(command):
    if isinstance(command, ApplyStylus):
        s = command.sample
        return {"kind": "apply_stylus", "x": s.position[0], "y": s.position[1],
                "z": s.position[2], "applied": s.applied, "timestamp": s.timestamp}
    if isinstance(command, SetParameter):
        return {"kind": "set_parameter", "name": command.name, "value": command.value}
    if isinstance(command, SelectStructure):
        return {"kind": "select_structure", "preset": command.preset.value}
    if isinstance(command, ResetFailure):
        return {"kind": "reset_failure"}
    if isinstance(command, Pause):
        return {"kind": "pause"}
    if isinstance(command, Resume):
        return {"kind": "resume"}
    raise ProtocolError(f"unencodable command {command!r}")


def decode_command(body):
    if not isinstance(body, dict) or "kind" not in body:
        raise ProtocolError("command body must be an object with a 'kind' field")
    kind = body["kind"]
    try:
        if kind == "apply_stylus":
            sample = pipeline.StylusSample(
                position=(float(body["x"]), float(body["y"]), float(body["z"])),
                applied=bool(body["applied"]), timestamp=float(body["timestamp"]))
            return ApplyStylus(sample)
        if kind == "set_parameter":
            return SetParameter(str(body["name"]), body["value"])
        if kind == "select_structure":
            return SelectStructure(StructurePreset(body["preset"]))
        if kind == "reset_failure":
            return ResetFailure()
        if kind == "pause":
            return Pause()
        if kind == "resume":
            return Resume()
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed {kind} command: {exc}") from exc
    raise ProtocolError(f"unknown command kind {kind!r}")


# ---------------------------------------------------------------------------
# Stylus traces and CSV recordings
# ---------------------------------------------------------------------------

def parse_trace(text, dt, source="<trace>"):
    """Scripted stylus trace -> {tick: [ApplyStylus]} schedule.

    One sample per line: ``time_s x y z applied_flag`` (whitespace or comma
    separated; '#' comments).
    """
    schedule = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip().replace(",", " ")
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ProtocolError(
                f"{source}:{lineno}: expected 'time_s x y z applied_flag'")
        try:
            t, x, y, z = (float(v) for v in parts[:4])
            applied = parts[4] in ("1", "true", "True")
        except ValueError as exc:
            raise ProtocolError(f"{source}:{lineno}: {exc}") from exc
        tick = int(round(t / dt))
        sample = pipeline.StylusSample(position=(x, y, z), applied=applied,
                                       timestamp=t)
        schedule.setdefault(tick, []).append(ApplyStylus(sample))
    return schedule


def load_trace(path, dt):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace(fh.read(), dt, source=str(path))


class CsvRecorder:
    """Fixed-column per-tick CSV: tick, t, q..., gaps..., status, feedback."""

    def __init__(self, fh, n_dof, n_nodes):
        self.fh = fh
        header = (["tick", "t"] + [f"q{i}" for i in range(n_dof)]
                  + [f"gap{i}" for i in range(n_nodes)]
                  + ["status", "fb_x", "fb_y", "fb_z"])
        fh.write(",".join(header) + "\n")

    def record(self, session, frame):
        profile = stiction.evaluate_gaps(session.state, session.beam, session.substrate)
        row = [str(session.tick), repr(session.state.t)]
        row += [repr(v) for v in session.state.q.tolist()]
        row += [repr(v) for v in profile.gaps.tolist()]
        row.append(str(int(session.status.state)))
        row += [repr(v) for v in frame.feedback_device.tolist()]
        self.fh.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# Recordings (config + tick-stamped commands)
# ---------------------------------------------------------------------------

def write_recording(path, config, applied_commands, total_ticks):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(encode_message({"type": "recording", "version": RECORDING_VERSION,
                                 "config": config_values(config)}) + "\n")
        for tick, command in applied_commands:
            fh.write(encode_message({"type": "command", "tick": tick,
                                     "command": encode_command(command)}) + "\n")
        fh.write(encode_message({"type": "end", "commands": len(applied_commands),
                                 "ticks": total_ticks}) + "\n")


def read_recording(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line for line in fh.read().splitlines() if line.strip()]
    except OSError as exc:
        raise RecordingError(f"{path}: {exc}") from exc
    if not lines:
        raise RecordingError(f"{path}: empty recording")
    header = decode_message(lines[0])
    if header.get("type") != "recording":
        raise RecordingError(f"{path}: not a recording file")
    if header.get("version") != RECORDING_VERSION:
        raise RecordingError(
            f"{path}: recording version {header.get('version')} is incompatible "
            f"with supported version {RECORDING_VERSION}")
    footer = decode_message(lines[-1])
    if footer.get("type") != "end":
        raise RecordingError(f"{path}: truncated recording (missing end marker)")
    commands = []
    for line in lines[1:-1]:
        entry = decode_message(line)
        if entry.get("type") != "command":
            raise RecordingError(f"{path}: unexpected entry {entry.get('type')!r}")
        commands.append((int(entry["tick"]), decode_command(entry["command"])))
    if len(commands) != footer.get("commands"):
        raise RecordingError(f"{path}: truncated recording (command count mismatch)")
    config = build_session_config({**CONFIG_DEFAULTS, **header["config"]},
                                  source=str(path))
    return config, commands, int(footer["ticks"])


# ---------------------------------------------------------------------------
# Session runners
# ---------------------------------------------------------------------------

class ExitReport:
    def __init__(self, stats, session, applied_commands):
        self.stats = stats
        self.session = session
        self.applied_commands = applied_commands


def run_session(config, duration, command_schedule=None, command_source=None,
                snapshot_sink=None, tick_sink=None, realtime=True):
    """Host one session for ``duration`` seconds; returns an ExitReport.

    ``command_schedule`` is a deterministic {tick: [commands]} map (traces and
    replays); ``command_source`` a live queue whose entries may be bare
    commands or (command, reply_callback) pairs.
    """
    session = HapticSession(config)
    applied = []

    class _Source:
        def drain(self, tick):
            items = []
            if command_schedule is not None:
                items.extend(command_schedule.pop(tick, []))
            if command_source is not None:
                items.extend(command_source.drain(tick))
            return items

    stats = pipeline.run_dual_rate(session, duration, command_source=_Source(),
                                   snapshot_sink=snapshot_sink, realtime=realtime,
                                   tick_sink=tick_sink, applied_log=applied)
    return ExitReport(stats, session, applied)


def run_headless(config, duration, trace_schedule=None, csv_path=None,
                 record_path=None, realtime=True, snapshot_sink=None):
    """Headless run: scripted trace in, CSV + stats out."""
    csv_fh = open(csv_path, "w", encoding="utf-8") if csv_path else None
    try:
        recorder = (CsvRecorder(csv_fh, config.beam.n_dof, config.beam.n_nodes)
                    if csv_fh else None)
        tick_sink = recorder.record if recorder else None
        report = run_session(config, duration,
                             command_schedule=dict(trace_schedule or {}),
                             snapshot_sink=snapshot_sink,
                             tick_sink=tick_sink, realtime=realtime)
    finally:
        if csv_fh:
            csv_fh.close()
    if record_path:
        write_recording(record_path, config, report.applied_commands,
                        report.stats.physics_ticks)
    return report


def replay_session(path, csv_path=None):
    """Re-run a recording unpaced; returns the ExitReport."""
    config, commands, total_ticks = read_recording(path)
    schedule = {}
    for tick, command in commands:
        schedule.setdefault(tick, []).append(command)
    duration = total_ticks * config.options.dt
    csv_fh = open(csv_path, "w", encoding="utf-8") if csv_path else None
    try:
        recorder = (CsvRecorder(csv_fh, config.beam.n_dof, config.beam.n_nodes)
                    if csv_fh else None)
        tick_sink = recorder.record if recorder else None
        return run_session(config, duration, command_schedule=schedule,
                           tick_sink=tick_sink, realtime=False)
    finally:
        if csv_fh:
            csv_fh.close()
