"""Live service: a timing thread driving the clock and generate cycle,
and a WebSocket endpoint speaking newline-free JSON messages (one object
per frame).

Client -> server: control messages (see session.Session.handle).
Server -> client: ack (after every applied control), pattern (each bar
boundary), transport (throttled to 4/s), metrics (1/s), error.

The timing thread is the sole session mutator. Model evaluation for the
bar cycle runs on a single helper thread and hands its result back before
the boundary; a late result increments the deadline-miss metric and the
previous pattern persists. Per-client send queues are bounded: a slow
consumer drops frames (counted), it never stalls the clock.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import replace
from typing import Dict, Optional

from websockets.sync.server import serve

from .hvo import STEPS_PER_BAR, HvoPattern
from .model import DensityMap
from .records import format_note_line
from .session import Session, compute_pattern
from .transport import tick

log = logging.getLogger(__name__)

DEFAULT_PORT = 8962
TRANSPORT_BROADCAST_S = 0.25  # 4/s
METRICS_BROADCAST_S = 1.0
CLIENT_QUEUE_MAX = 64
TICK_SLEEP_S = 0.005


def pattern_message(bar_index: int, pattern: HvoPattern, densities) -> dict:
    return {"type": "pattern", "bar_index": bar_index,
            "hits": pattern.hits.astype(int).tolist(),
            "velocities": [[round(float(v), 4) for v in row] for row in pattern.velocities],
            "offsets": [[round(float(o), 4) for o in row] for row in pattern.offsets],
            "densities": densities}


class _Client:
    """One connection with a bounded outbound queue and writer thread."""

    def __init__(self, ws, on_drop):
        self.ws = ws
        self.outbox: queue.Queue = queue.Queue(maxsize=CLIENT_QUEUE_MAX)
        self.on_drop = on_drop
        self.alive = True
        self.writer = threading.Thread(target=self._write_loop, daemon=True)
        self.writer.start()

    def send(self, message: dict) -> None:
        if not self.alive:
            return
        try:
            self.outbox.put_nowait(json.dumps(message))
        except queue.Full:
            self.on_drop()

    def _write_loop(self) -> None:
        while self.alive:
            try:
                payload = self.outbox.get(timeout=0.5)
            except queue.Empty:
                continue
            try:
                self.ws.send(payload)
            except Exception:
                self.alive = False

    def close(self) -> None:
        self.alive = False


class EngineServer:
    """Owns the session, the clock thread and the socket endpoint."""

    def __init__(self, session: Session, host: str = "127.0.0.1",
                 port: int = DEFAULT_PORT, log_path: Optional[str] = None):
        self.session = session
        self.host = host
        self.port = port
        self.inbox: queue.Queue = queue.Queue()
        self.clients: Dict[int, _Client] = {}
        self._clients_lock = threading.Lock()
        self._stop = threading.Event()
        self._server = None
        self._threads = []
        self._worker = ThreadPoolExecutor(max_workers=1)
        self._pending: Optional[Future] = None
        self._pending_bar = -1
        self._log_fh = open(log_path, "w") if log_path else None

    # -- socket side -----------------------------------------------------

    def _handler(self, ws) -> None:
        client = _Client(ws, on_drop=self._count_drop)
        with self._clients_lock:
            self.clients[id(ws)] = client
        client.send(self.session.control_state())
        try:
            for raw in ws:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError as exc:
                    client.send({"type": "error", "code": "bad_json", "detail": str(exc)})
                    continue
                self.inbox.put(msg)
        finally:
            client.close()
            with self._clients_lock:
                self.clients.pop(id(ws), None)

    def _count_drop(self) -> None:
        self.session.metrics.dropped_frames += 1

    def broadcast(self, message: dict) -> None:
        with self._clients_lock:
            clients = list(self.clients.values())
        for client in clients:
            client.send(message)

    # -- timing side -----------------------------------------------------

    def _drain_controls(self, now_s: float) -> None:
        while True:
            try:
                msg = self.inbox.get_nowait()
            except queue.Empty:
                return
            reply = self.session.handle(msg, now_s=now_s)
            self.broadcast(reply)

    def _submit_cycle(self, bar_index: int) -> None:
        session = self.session
        session.refresh_live_reference(bar_index)
        session.step_autonomy()
        # snapshot the inputs so later control messages cannot tear the job
        refs, pos, grouping = session.refs, session.pos, session.grouping
        densities = DensityMap(values=dict(session.densities.values),
                               default=session.densities.default)
        self._pending = self._worker.submit(
            compute_pattern, session.model, refs, pos, densities, grouping)
        self._pending_bar = bar_index

    def _apply_boundary(self, bar_index: int) -> None:
        if self._pending is not None and self._pending_bar == bar_index:
            if self._pending.done():
                self.session.playing = self._pending.result()
            else:
                self.session.metrics.deadline_misses += 1
                self._pending.cancel()
            self._pending = None
        outputs = self.session.emit(self.session.playing, bar_index)
        if self._log_fh:
            for n in outputs.notes:
                self._log_fh.write(format_note_line(n.time_s, n.voice, n.velocity) + "\n")
            self._log_fh.flush()
        self.broadcast(pattern_message(bar_index, self.session.playing,
                                       self.session.control_state()["densities"]))

    def _clock_loop(self) -> None:
        session = self.session
        # prime bar 0 before the clock starts
        session.refresh_live_reference(0)
        session.step_autonomy()
        session.playing = session.compute_pattern()
        session.transport = replace(session.transport, running=True)
        last = time.monotonic()
        last_transport = 0.0
        last_metrics = 0.0
        while not self._stop.is_set():
            time.sleep(TICK_SLEEP_S)
            now = time.monotonic()
            dt = now - last
            last = now
            self._drain_controls(now)
            session.transport, crossed = tick(session.transport, dt)
            for step in crossed:
                in_bar = step % STEPS_PER_BAR
                bar = step // STEPS_PER_BAR
                if in_bar == STEPS_PER_BAR // 2:
                    self._submit_cycle(bar + 1)
                elif in_bar == 0:
                    self._apply_boundary(bar)
            if now - last_transport >= TRANSPORT_BROADCAST_S:
                last_transport = now
                self.broadcast({"type": "transport", "bpm": session.transport.bpm,
                                "bar": session.transport.bar_index,
                                "step": session.transport.step_index % STEPS_PER_BAR})
            if now - last_metrics >= METRICS_BROADCAST_S:
                last_metrics = now
                self.broadcast({"type": "metrics", **session.metrics.as_dict()})

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> int:
        """Start socket + clock threads; returns the bound port."""
        self._server = serve(self._handler, self.host, self.port)
        self.port = self._server.socket.getsockname()[1]
        sock_thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        clock_thread = threading.Thread(target=self._clock_loop, daemon=True)
        self._threads = [sock_thread, clock_thread]
        sock_thread.start()
        clock_thread.start()
        log.info("engine serving on ws://%s:%d", self.host, self.port)
        return self.port

    def stop(self) -> None:
        self._stop.set()
        if self._server is not None:
            self._server.shutdown()
        self._worker.shutdown(wait=False)
        if self._log_fh:
            self._log_fh.close()

    def run_forever(self) -> None:
        self.start()
        try:
            while True:
                time.sleep(0.5)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()
