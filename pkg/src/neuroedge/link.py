"""Cloud-edge channel: message schema, transports, and traffic accounting.

Wire format: one UTF-8 JSON object per message, canonical key order
("kind", "step", "data"), compact separators, floats rendered with Python's
shortest round-trip representation (exact float64 round-trip).  The socket
transport prefixes each frame with a 4-byte big-endian length; the in-process
transport carries the same encoded bytes without framing.  Both transports
serve exactly one edge/cloud pair with blocking FIFO delivery, so a scenario
run must not depend on which one carries it.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedMessage

_KINDS = ("request", "control", "state")


@dataclass(frozen=True)
class SupervisionRequest:
    step: int


@dataclass(frozen=True)
class ControlSignal:
    step: int
    u: tuple

    def vector(self) -> np.ndarray:
        return np.asarray(self.u, dtype=float)


@dataclass(frozen=True)
class StateReport:
    step: int
    x: tuple

    def vector(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)


LinkMessage = SupervisionRequest | ControlSignal | StateReport


@dataclass
class LinkStats:
    """Monotone per-kind message and payload counters."""

    messages_sent: dict = field(
        default_factory=lambda: {kind: 0 for kind in _KINDS}
    )
    payload_bytes: int = 0

    def record(self, kind: str, n_bytes: int) -> None:
        self.messages_sent[kind] += 1
        self.payload_bytes += n_bytes


def _kind_and_data(msg: LinkMessage) -> tuple[str, list[float]]:
    if isinstance(msg, SupervisionRequest):
        return "request", []
    if isinstance(msg, ControlSignal):
        return "control", [float(v) for v in msg.u]
    if isinstance(msg, StateReport):
        return "state", [float(v) for v in msg.x]
    raise MalformedMessage(f"unknown message type {type(msg)!r}")


def encode_message(msg: LinkMessage) -> bytes:
    """Serialize to canonical JSON bytes (no length prefix)."""
    kind, data = _kind_and_data(msg)
    if msg.step < 0:
        raise MalformedMessage("step must be >= 0")
    if not all(np.isfinite(v) for v in data):
        raise MalformedMessage("message vectors must be finite")
    payload = {"kind": kind, "step": int(msg.step), "data": data}
    return json.dumps(payload, separators=(",", ":")).encode("utf-8")


def decode_message(raw: bytes) -> LinkMessage:
    """Inverse of ``encode_message``; raises ``MalformedMessage`` on any
    schema violation (bad JSON, unknown kind, wrong arity, non-finite data)."""
    try:
        payload = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedMessage(f"undecodable frame: {exc}") from exc
    if not isinstance(payload, dict) or set(payload) != {"kind", "step", "data"}:
        raise MalformedMessage("message must have exactly kind/step/data fields")
    kind, step, data = payload["kind"], payload["step"], payload["data"]
    if not isinstance(step, int) or step < 0:
        raise MalformedMessage("step must be a non-negative integer")
    if not isinstance(data, list) or not all(
        isinstance(v, (int, float)) and np.isfinite(v) for v in data
    ):
        raise MalformedMessage("data must be a list of finite numbers")
    if kind == "request":
        if data:
            raise MalformedMessage("request carries no data")
        return SupervisionRequest(step=step)
    if kind == "control":
        if not data:
            raise MalformedMessage("control signal must carry a vector")
        return ControlSignal(step=step, u=tuple(float(v) for v in data))
    if kind == "state":
        if not data:
            raise MalformedMessage("state report must carry a vector")
        return StateReport(step=step, x=tuple(float(v) for v in data))
    raise MalformedMessage(f"unknown message kind {kind!r}")


def frame(raw: bytes) -> bytes:
    """Prefix an encoded message with its 4-byte big-endian length."""
    return struct.pack(">I", len(raw)) + raw


def read_frame(recv_exact) -> bytes:
    """Read one length-prefixed frame via ``recv_exact(n) -> bytes``."""
    header = recv_exact(4)
    if len(header) != 4:
        raise MalformedMessage("truncated frame header")
    (length,) = struct.unpack(">I", header)
    body = recv_exact(length)
    if len(body) != length:
        raise MalformedMessage("truncated frame body")
    return body


class InprocTransport:
    """Same-process request/reply channel.

    Messages still pass through the codec so that numeric behavior is
    identical to the socket transport.
    """

    def __init__(self, service, stats: LinkStats | None = None):
        self._service = service
        self.stats = stats or LinkStats()

    def exchange(self, requests: list[LinkMessage]) -> LinkMessage:
        reply = None
        for msg in requests:
            raw = encode_message(msg)
            kind, _ = _kind_and_data(msg)
            self.stats.record(kind, len(raw))
            reply = self._service.handle(decode_message(raw))
        if reply is None:
            raise MalformedMessage("service produced no reply")
        raw = encode_message(reply)
        kind, _ = _kind_and_data(reply)
        self.stats.record(kind, len(raw))
        return decode_message(raw)

    def close(self) -> None:
        pass


class TcpTransport:
    """Loopback TCP request/reply channel with length-prefixed frames.

    ``serve`` starts a single-connection server thread around a service
    object exposing ``handle(msg) -> reply-or-None``; the constructor
    connects as the edge-side client.
    """

    def __init__(self, host: str, port: int, stats: LinkStats | None = None):
        self.stats = stats or LinkStats()
        self._sock = socket.create_connection((host, port), timeout=30.0)

    @staticmethod
    def serve(service, host: str = "127.0.0.1", port: int = 0):
        """Start a server thread; returns (bound_port, stop_callable)."""
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((host, port))
        listener.listen(1)
        bound_port = listener.getsockname()[1]

        def run() -> None:
            try:
                conn, _ = listener.accept()
            except OSError:
                return
            with conn:
                recv = _make_recv_exact(conn)
                while True:
                    try:
                        raw = read_frame(recv)
                    except MalformedMessage:
                        break
                    reply = service.handle(decode_message(raw))
                    if reply is not None:
                        conn.sendall(frame(encode_message(reply)))
            listener.close()

        thread = threading.Thread(target=run, daemon=True)
        thread.start()

        def stop() -> None:
            try:
                listener.close()
            except OSError:
                pass
            thread.join(timeout=5.0)

        return bound_port, stop

    def exchange(self, requests: list[LinkMessage]) -> LinkMessage:
        for msg in requests:
            raw = encode_message(msg)
            kind, _ = _kind_and_data(msg)
            self.stats.record(kind, len(raw))
            self._sock.sendall(frame(raw))
        recv = _make_recv_exact(self._sock)
        reply = decode_message(read_frame(recv))
        kind, _ = _kind_and_data(reply)
        self.stats.record(kind, len(encode_message(reply)))
        return reply

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


def _make_recv_exact(conn: socket.socket):
    def recv_exact(n: int) -> bytes:
        chunks = b""
        while len(chunks) < n:
            part = conn.recv(n - len(chunks))
            if not part:
                return chunks
            chunks += part
        return chunks

    return recv_exact


def supervision_count(total_steps: int, cfg, relearn_windows) -> int:
    """Supervision messages implied by the gate schedule.

    warmup steps + autonomous check steps not swallowed by relearning +
    every step inside a relearn window.  Must equal the observed
    ControlSignal counter of a run realizing the given windows.
    """
    in_relearn = set()
    for start, end in relearn_windows:
        in_relearn.update(range(max(start, 0), min(end, total_steps)))
    warmup = min(cfg.warmup_steps, total_steps)
    checks = sum(
        1
        for s in range(warmup, total_steps)
        if s % cfg.check_interval == 0 and s not in in_relearn
    )
    return warmup + checks + len(in_relearn)
