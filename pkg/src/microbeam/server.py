"""WebSocket endpoint hosting one live session.

The physics loop runs in a dedicated thread and owns all mutable state;
clients talk JSON text frames (see docs/protocol.md). Snapshots reach
clients through a latest-value slot (stale frames are dropped, never
queued); command acknowledgements are never dropped. A client disconnect
leaves the session running headless.
"""

from __future__ import annotations

import asyncio
import collections
import threading

from websockets.asyncio.server import serve as ws_serve

from . import pipeline, service
from .errors import ProtocolError


class _ClientBox:
    """Per-client outbound mailbox; touched only from the asyncio thread."""

    def __init__(self):
        self.acks = collections.deque()
        self.snapshot = None
        self.stats = None
        self.event = asyncio.Event()
        self.closed = False

    def put_ack(self, message):
        self.acks.append(message)
        self.event.set()

    def put_snapshot(self, message):
        self.snapshot = message  # replace: latest-value semantics
        self.event.set()

    def put_stats(self, message):
        self.stats = message
        self.event.set()

    async def get_batch(self):
        await self.event.wait()
        self.event.clear()
        messages = list(self.acks)
        self.acks.clear()
        if self.snapshot is not None:
            messages.append(self.snapshot)
            self.snapshot = None
        if self.stats is not None:
            messages.append(self.stats)
            self.stats = None
        return messages


class SessionServer:
    """One session, many read/command clients."""

    def __init__(self, config, host="127.0.0.1", port=8765, duration=None):
        self.config = config
        self.host = host
        self.port = port
        self.duration = duration
        self.commands = pipeline.QueueCommandSource()
        self.clients = set()
        self.loop = None
        self.finished = None
        self.report = None

    # -- physics thread ------------------------------------------------------

    def _physics_main(self):
        try:
            self.report = service.run_session(
                self.config,
                self.duration if self.duration is not None else 1e9,
                command_source=self.commands,
                snapshot_sink=self._on_snapshot,
                realtime=True,
            )
        finally:
            if self.loop is not None:
                self.loop.call_soon_threadsafe(self._on_physics_done)

    def _on_snapshot(self, snapshot):
        message = service.encode_message(service.snapshot_message(snapshot))
        self.loop.call_soon_threadsafe(self._broadcast_snapshot, message)

    # -- asyncio thread ------------------------------------------------------

    def _broadcast_snapshot(self, message):
        for box in self.clients:
            box.put_snapshot(message)

    def _on_physics_done(self):
        if self.report is not None:
            message = service.encode_message(service.stats_message(self.report.stats))
            for box in self.clients:
                box.put_stats(message)
        if self.finished is not None:
            self.finished.set()

    async def _send_loop(self, websocket, box):
        while True:
            for message in await box.get_batch():
                await websocket.send(message)

    async def _handler(self, websocket):
        await websocket.send(service.encode_message(
            service.hello_message(self.config)))
        box = _ClientBox()
        self.clients.add(box)
        sender = asyncio.create_task(self._send_loop(websocket, box))
        try:
            async for raw in websocket:
                seq = None
                try:
                    payload = service.decode_message(raw)
                    seq = payload.get("seq")
                    if payload["type"] != "command":
                        raise ProtocolError(f"unexpected message type {payload['type']!r}")
                    command = service.decode_command(payload.get("command"))
                except ProtocolError as exc:
                    box.put_ack(service.encode_message(
                        {"type": "command_err", "seq": seq, "error": str(exc)}))
                    continue

                def reply(ok, err, seq=seq, box=box):
                    if ok:
                        message = {"type": "command_ack", "seq": seq}
                    else:
                        message = {"type": "command_err", "seq": seq, "error": err}
                    encoded = service.encode_message(message)
                    self.loop.call_soon_threadsafe(box.put_ack, encoded)

                self.commands.put((command, reply))
        finally:
            sender.cancel()
            self.clients.discard(box)

    async def run(self, ready=None):
        """Serve until the physics run finishes (or forever without duration)."""
        import sys
        # the physics thread spin-waits between ticks; a short switch interval
        # keeps the protocol thread responsive without yield syscalls
        sys.setswitchinterval(0.002)
        self.loop = asyncio.get_running_loop()
        self.finished = asyncio.Event()
        physics = threading.Thread(target=self._physics_main, name="physics-loop",
                                   daemon=True)
        async with ws_serve(self._handler, self.host, self.port) as server:
            port = next(iter(server.sockets)).getsockname()[1]
            print(f"listening on ws://{self.host}:{port}", flush=True)
            if ready is not None:
                ready(port)
            physics.start()
            await self.finished.wait()
        return self.report


def serve(config, host="127.0.0.1", port=8765, duration=None):
    """Blocking entry point for the CLI."""
    server = SessionServer(config, host=host, port=port, duration=duration)
    return asyncio.run(server.run())
