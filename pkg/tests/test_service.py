"""Config files, wire protocol, recordings, headless runs and the endpoint."""

import asyncio
import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microbeam import InvalidConfigError, ProtocolError, RecordingError
from microbeam.pipeline import StylusSample
from microbeam.service import (
    CONFIG_DEFAULTS,
    build_session_config,
    config_values,
    decode_command,
    decode_message,
    encode_command,
    encode_message,
    hello_message,
    parse_config_text,
    parse_trace,
    read_recording,
    replay_session,
    run_headless,
    serialize_config,
    snapshot_message,
    write_recording,
)
from microbeam.session import (
    ApplyStylus,
    Pause,
    ResetFailure,
    Resume,
    SelectStructure,
    SetParameter,
    StructurePreset,
)


class TestConfigFiles:
    def test_minimal_file_gets_documented_defaults(self):
        config = parse_config_text("structure = Cantilever\n")
        values = config_values(config)
        assert values == dict(CONFIG_DEFAULTS)

    def test_overrides(self):
        config = parse_config_text(
            "structure = Microbridge\nn_elements = 16\nyoungs_modulus_pa = 150e9\n")
        assert config.preset is StructurePreset.MICROBRIDGE
        assert config.beam.n_elements == 16
        assert config.beam.material.youngs_modulus == 150e9

    def test_negative_modulus_names_the_field(self):
        with pytest.raises(InvalidConfigError, match="youngs_modulus"):
            parse_config_text("youngs_modulus_pa = -1.0\n")

    def test_unknown_key_rejected_with_line(self):
        with pytest.raises(ProtocolError, match=":2"):
            parse_config_text("structure = Cantilever\nbogus_key = 3\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ProtocolError, match="duplicate"):
            parse_config_text("n_elements = 8\nn_elements = 16\n")

    def test_malformed_line_rejected(self):
        with pytest.raises(ProtocolError, match=":1"):
            parse_config_text("what even is this\n")

    def test_round_trip(self):
        config = parse_config_text(
            "structure = Microbridge\nn_elements = 24\ndt_s = 5e-4\n"
            "damping_beta = 2e-6\n")
        again = parse_config_text(serialize_config(config))
        assert again == config

    def test_comments_and_blank_lines(self):
        config = parse_config_text(
            "# a comment\n\nstructure = Cantilever  # trailing\n")
        assert config.preset is StructurePreset.CANTILEVER


def command_strategy():
    finite = st.floats(-1e3, 1e3, allow_nan=False)
    stylus = st.builds(
        lambda x, y, z, applied, t: ApplyStylus(
            StylusSample((x, y, z), applied, abs(t))),
        finite, finite, finite, st.booleans(), finite)
    setp = st.builds(SetParameter,
                     st.sampled_from(("youngs_modulus", "density", "n_elements",
                                      "length", "width", "thickness", "gap")),
                     finite)
    select = st.builds(SelectStructure, st.sampled_from(list(StructurePreset)))
    return st.one_of(stylus, setp, select, st.just(ResetFailure()),
                     st.just(Pause()), st.just(Resume()))


class TestProtocol:
    @given(command_strategy())
    @settings(max_examples=300, deadline=None)
    def test_command_round_trip(self, command):
        wire = decode_message(encode_message(
            {"type": "command", "seq": 1, "command": encode_command(command)}))
        assert decode_command(wire["command"]) == command

    def test_malformed_messages(self):
        with pytest.raises(ProtocolError):
            decode_message("not json")
        with pytest.raises(ProtocolError):
            decode_message("[1,2,3]")
        with pytest.raises(ProtocolError):
            decode_command({"kind": "warp_drive"})
        with pytest.raises(ProtocolError):
            decode_command({"kind": "apply_stylus", "x": 0.0})

    def test_hello_and_snapshot_encode(self):
        config = build_session_config(dict(CONFIG_DEFAULTS))
        hello = decode_message(encode_message(hello_message(config)))
        assert hello["type"] == "hello"
        assert hello["protocol_version"] == 1
        assert hello["config"]["n_elements"] == 32

        from microbeam.session import HapticSession
        snap = HapticSession(config).snapshot()
        message = decode_message(encode_message(snapshot_message(snap)))
        assert message["type"] == "snapshot"
        assert len(message["deflections"]) == 33
        assert message["parameters"]["structure"] == "Cantilever"


class TestTraces:
    def test_parse_trace(self):
        schedule = parse_trace("0.0 0.3 0 0 1\n0.002, 0.3, -0.01, 0, 1\n# done\n",
                               dt=1e-3)
        assert set(schedule) == {0, 2}
        assert schedule[0][0].sample.applied is True

    def test_malformed_trace(self):
        with pytest.raises(ProtocolError, match=":1"):
            parse_trace("1 2 3\n", dt=1e-3)


def _tip_press_trace(config, drag=-0.01, t_press=0.005, t_drag=0.01):
    x_device = config.beam.length * config.scale_map.length_scale
    return (f"{t_press} {x_device} 0.0 0.0 1\n"
            f"{t_drag} {x_device} {drag} 0.0 1\n")


class TestHeadlessRuns:
    def test_csv_row_count_and_columns(self, tmp_path):
        config = build_session_config(dict(CONFIG_DEFAULTS))
        csv_path = tmp_path / "run.csv"
        schedule = parse_trace(_tip_press_trace(config), config.options.dt)
        report = run_headless(config, 0.5, trace_schedule=schedule,
                              csv_path=str(csv_path), realtime=False)
        assert report.stats.physics_ticks == 500
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 501  # header + one row per tick
        header = lines[0].split(",")
        assert header[:2] == ["tick", "t"]
        assert header.count("status") == 1
        assert len(header) == 2 + config.beam.n_dof + config.beam.n_nodes + 1 + 3

    def test_identical_traces_identical_csv(self, tmp_path):
        config = build_session_config(dict(CONFIG_DEFAULTS))
        outputs = []
        for name in ("a.csv", "b.csv"):
            schedule = parse_trace(_tip_press_trace(config), config.options.dt)
            run_headless(config, 0.3, trace_schedule=schedule,
                         csv_path=str(tmp_path / name), realtime=False)
            outputs.append((tmp_path / name).read_bytes())
        assert outputs[0] == outputs[1]


class TestRecordings:
    def test_record_then_replay_reproduces_csv(self, tmp_path):
        config = build_session_config(dict(CONFIG_DEFAULTS))
        schedule = parse_trace(_tip_press_trace(config), config.options.dt)
        rec = tmp_path / "session.rec"
        first = tmp_path / "first.csv"
        run_headless(config, 0.3, trace_schedule=schedule, csv_path=str(first),
                     record_path=str(rec), realtime=False)
        second = tmp_path / "second.csv"
        report = replay_session(str(rec), csv_path=str(second))
        assert report.stats.physics_ticks == 300
        assert first.read_bytes() == second.read_bytes()

    def test_empty_command_stream(self, tmp_path):
        config = build_session_config(dict(CONFIG_DEFAULTS))
        rec = tmp_path / "quiet.rec"
        run_headless(config, 0.05, csv_path=None, record_path=str(rec),
                     realtime=False)
        loaded_config, commands, ticks = read_recording(str(rec))
        assert commands == []
        assert ticks == 50
        assert loaded_config == config
        report = replay_session(str(rec))
        assert np.all(report.session.state.q == 0.0)

    def test_truncated_recording_rejected(self, tmp_path):
        config = build_session_config(dict(CONFIG_DEFAULTS))
        rec = tmp_path / "cut.rec"
        write_recording(str(rec), config, [], 100)
        text = rec.read_text().splitlines()
        rec.write_text("\n".join(text[:-1]) + "\n")  # drop the end marker
        with pytest.raises(RecordingError, match="truncated"):
            read_recording(str(rec))

    def test_version_mismatch_rejected(self, tmp_path):
        config = build_session_config(dict(CONFIG_DEFAULTS))
        rec = tmp_path / "old.rec"
        write_recording(str(rec), config, [], 10)
        text = rec.read_text().replace('"version":1', '"version":99')
        rec.write_text(text)
        with pytest.raises(RecordingError, match="version"):
            read_recording(str(rec))


class TestServerEndpoint:
    def test_connect_command_and_snapshots(self):
        import websockets
        from microbeam.server import SessionServer

        values = dict(CONFIG_DEFAULTS)
        values["n_elements"] = 16
        config = build_session_config(values)
        server = SessionServer(config, port=0, duration=5.0)
        port_holder = {}

        async def scenario():
            async def client():
                while "port" not in port_holder:
                    await asyncio.sleep(0.01)
                uri = f"ws://127.0.0.1:{port_holder['port']}"
                async with websockets.connect(uri) as ws:
                    hello = decode_message(await ws.recv())
                    assert hello["type"] == "hello"
                    assert hello["config"]["n_elements"] == 16
                    await ws.send(encode_message({
                        "type": "command", "seq": 7,
                        "command": {"kind": "set_parameter",
                                    "name": "youngs_modulus", "value": 100e9}}))
                    await ws.send(encode_message({
                        "type": "command", "seq": 8,
                        "command": {"kind": "set_parameter",
                                    "name": "youngs_modulus", "value": -1.0}}))
                    acks = {}
                    snapshots = 0
                    while len(acks) < 2 or snapshots < 2:
                        message = decode_message(await asyncio.wait_for(
                            ws.recv(), timeout=10.0))
                        if message["type"] in ("command_ack", "command_err"):
                            acks[message["seq"]] = message
                        elif message["type"] == "snapshot":
                            snapshots += 1
                            assert message["parameters"]["structure"] == "Cantilever"
                    assert acks[7]["type"] == "command_ack"
                    assert acks[8]["type"] == "command_err"
                    assert "youngs_modulus" in acks[8]["error"]

            server_task = asyncio.create_task(
                server.run(ready=lambda p: port_holder.update(port=p)))
            await asyncio.wait_for(client(), timeout=30.0)
            report = await asyncio.wait_for(server_task, timeout=30.0)
            assert report.stats.physics_ticks == 5000
            assert report.stats.commands_applied == 1
            assert report.stats.commands_rejected == 1

        asyncio.run(scenario())


class TestCli:
    def test_verify_passes(self, capsys):
        from microbeam.cli import main
        assert main(["verify"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert out.count("PASS") >= 9

    def test_headless_cli(self, tmp_path, capsys):
        from microbeam.cli import main
        out_csv = tmp_path / "out.csv"
        code = main(["headless", "--duration", "0.2", "--out", str(out_csv),
                     "--no-realtime"])
        assert code == 0
        assert "physics_ticks = 200" in capsys.readouterr().out
        assert len(out_csv.read_text().splitlines()) == 201

    def test_unknown_flag_usage_error(self, capsys):
        from microbeam.cli import main
        assert main(["headless", "--nope"]) != 0

    def test_replay_missing_file(self, capsys):
        from microbeam.cli import main
        assert main(["replay", "--in", "/nonexistent.rec"]) != 0
