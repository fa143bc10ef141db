"""Wall-clock driver and JSON-lines socket front end for a :class:`Relay`."""

from __future__ import annotations

import json
import logging
import socketserver
import threading

from .relay import Relay, WallClock, handle_request

log = logging.getLogger(__name__)


class RelayService:
    """Runs the builder on a background thread; callers act as the collector.

    Submissions only take the relay's collector lock, so they never wait on a
    trie build in progress.
    """

    def __init__(self, relay: Relay, poll_ms: float = 5.0):
        if not isinstance(relay.clock, WallClock):
            relay.clock = WallClock()
        self.relay = relay
        self.poll_ms = poll_ms
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.errors: list[BaseException] = []

    def start(self) -> "RelayService":
        self._thread = threading.Thread(target=self._run, name="relay-builder", daemon=True)
        self._thread.start()
        return self

    def _run(self):
        while not self._stop.wait(self.poll_ms / 1000.0):
            try:
                self.relay.advance_to(self.relay.clock())
            except Exception as exc:  # keep the builder alive; surfaced via .errors
                log.exception("builder failed")
                self.errors.append(exc)

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        for line in self.rfile:
            line = line.strip()
            if not line:
                continue
            try:
                request = json.loads(line)
            except json.JSONDecodeError as exc:
                response = {"error": "BadRequest", "message": str(exc)}
            else:
                response = handle_request(self.server.relay, request)
            self.wfile.write(json.dumps(response).encode() + b"\n")
            self.wfile.flush()


class RelayServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, relay: Relay, address=("127.0.0.1", 0)):
        super().__init__(address, _Handler)
        self.relay = relay
