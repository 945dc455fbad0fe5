"""Topic-based TCP pub/sub bridge.

Wire grammar: every frame is a 4-byte big-endian length prefix followed by a
UTF-8 JSON object with keys op, topic, seq, stamp, msg.  Ops: advertise,
subscribe, publish, status.  Frames above 16 MiB are rejected.  Extra JSON
keys are ignored on decode; the five required keys are mandatory.

Delivery: each published envelope reaches every current subscriber except
the publisher, exactly once, preserving per-publisher order.  A slow
subscriber overflows its own bounded outbound queue (capacity 256) and is
disconnected; nobody else blocks.  The server pings every connection with a
status frame (topic "/status", msg {"event": "ping"}) and drops clients
silent for longer than the liveness timeout.
"""

from __future__ import annotations

import json
import logging
import socket
import struct
import threading
import time
from dataclasses import dataclass, field

log = logging.getLogger("viloop.bridge")

MAX_FRAME = 16 * 1024 * 1024
MAX_TOPIC_BYTES = 256
OPS = ("advertise", "subscribe", "publish", "status")
STATUS_TOPIC = "/status"

DEFAULT_PORT = 9870
OUTBOUND_QUEUE = 256
PING_INTERVAL = 2.0
LIVENESS_TIMEOUT = 10.0


class ProtocolError(ValueError):
    pass


class OversizeFrame(ProtocolError):
    pass


class MalformedJson(ProtocolError):
    pass


class UnknownOp(ProtocolError):
    pass


class ConnectionLost(ConnectionError):
    pass


@dataclass(frozen=True)
class Envelope:
    op: str
    topic: str
    seq: int
    stamp: float
    msg: object = None


def validate_envelope(e: Envelope) -> Envelope:
    if e.op not in OPS:
        raise UnknownOp(f"unknown op {e.op!r}")
    if not isinstance(e.topic, str) or not e.topic:
        raise MalformedJson("topic must be a non-empty string")
    if len(e.topic.encode("utf-8")) > MAX_TOPIC_BYTES:
        raise MalformedJson("topic exceeds 256 bytes")
    if not isinstance(e.seq, int) or isinstance(e.seq, bool) or e.seq < 0:
        raise MalformedJson("seq must be a non-negative integer")
    if not isinstance(e.stamp, (int, float)) or isinstance(e.stamp, bool):
        raise MalformedJson("stamp must be a number")
    return e


def frame_encode(e: Envelope) -> bytes:
    """Length-prefixed canonical encoding (fixed key order, no whitespace)."""
    validate_envelope(e)
    body = json.dumps(
        {"op": e.op, "topic": e.topic, "seq": e.seq, "stamp": e.stamp, "msg": e.msg},
        separators=(",", ":"),
        ensure_ascii=False,
    ).encode("utf-8")
    if len(body) > MAX_FRAME:
        raise OversizeFrame(f"frame body {len(body)} exceeds {MAX_FRAME}")
    return struct.pack(">I", len(body)) + body


def frame_decode(data: bytes) -> Envelope:
    """Decode one complete frame (prefix + body); inverse of frame_encode."""
    if len(data) < 4:
        raise MalformedJson("frame shorter than the length prefix")
    (n,) = struct.unpack(">I", data[:4])
    if n > MAX_FRAME:
        raise OversizeFrame(f"declared length {n} exceeds {MAX_FRAME}")
    if len(data) != 4 + n:
        raise MalformedJson(f"frame length {len(data) - 4} != declared {n}")
    return body_decode(data[4:])


def body_decode(body: bytes) -> Envelope:
    try:
        obj = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedJson(str(exc)) from exc
    if not isinstance(obj, dict):
        raise MalformedJson("frame body is not a JSON object")
    try:
        env = Envelope(obj["op"], obj["topic"], obj["seq"], obj["stamp"], obj["msg"])
    except KeyError as exc:
        raise MalformedJson(f"missing key {exc}") from exc
    if not isinstance(env.op, str):
        raise MalformedJson("op must be a string")
    return validate_envelope(env)


def standard_topics() -> dict[str, str]:
    """Fixed topic catalog: name -> schema tag.

    Synthetic sensor topics are deliberately distinct from physical ones so
    the robot's own sensor traffic never collides with simulator output.
    """
    return {
        # robot -> sim
        "/odom": "pose",
        "/simprive/reset": "bool",
        "/simprive/pause": "bool",
        "/simprive/resume": "bool",
        "/cmd_vel": "twist",  # internal-kinematics mode only
        # sim -> robot
        "/simprive/pose_digital": "pose",
        "/simprive/collision": "collision",
        "/simprive/lidar": "lidar",
        "/simprive/camera_depth": "image_f32",
        "/simprive/camera_semantic": "image_u8",
    }


# ---------------------------------------------------------------------------
# Routing table.

@dataclass
class TopicEntry:
    publishers: set = field(default_factory=set)
    subscribers: set = field(default_factory=set)
    schema: str | None = None


class TopicTable:
    def __init__(self):
        self.topics: dict[str, TopicEntry] = {}

    def entry(self, topic: str) -> TopicEntry:
        return self.topics.setdefault(topic, TopicEntry())

    def advertise(self, conn_id, topic: str) -> None:
        self.entry(topic).publishers.add(conn_id)

    def subscribe(self, conn_id, topic: str) -> None:
        self.entry(topic).subscribers.add(conn_id)

    def drop(self, conn_id) -> None:
        for entry in self.topics.values():
            entry.publishers.discard(conn_id)
            entry.subscribers.discard(conn_id)

    def route(self, publisher_conn, e: Envelope) -> list:
        """Delivery set: every subscriber except the publisher itself."""
        entry = self.topics.get(e.topic)
        if entry is None:
            return []
        return [c for c in entry.subscribers if c != publisher_conn]


# ---------------------------------------------------------------------------
# Server.

class _Peer:
    """One attached endpoint: a TCP connection or an in-process client."""

    _ids = iter(range(1, 1 << 62))

    def __init__(self, server, sock=None, on_message=None, name=""):
        self.id = next(self._ids)
        self.server = server
        self.sock = sock
        self.on_message = on_message  # in-process delivery callback
        self.name = name or f"conn{self.id}"
        self.alive = True
        self.closing = False  # flush outbound queue, then close
        self.last_rx = time.monotonic()
        self.last_seq: dict[str, int] = {}
        self._status_seq = 0
        if sock is not None:
            self._queue: list[bytes] = []
            self._cv = threading.Condition()
            self._writer = threading.Thread(target=self._write_loop, daemon=True)
            self._writer.start()

    def send_bytes(self, frame: bytes) -> None:
        if not self.alive or self.closing:
            return
        if self.on_message is not None:
            try:
                self.on_message(frame_decode(frame))
            except Exception:
                log.exception("local endpoint %s callback failed", self.name)
            return
        with self._cv:
            if len(self._queue) >= OUTBOUND_QUEUE:
                log.warning("%s outbound queue overflow; disconnecting", self.name)
                self.server._close_peer(self, "slow subscriber")
                return
            self._queue.append(frame)
            self._cv.notify()

    def send_status(self, event: str, **extra) -> None:
        self._status_seq += 1
        env = Envelope("status", STATUS_TOPIC, self._status_seq, time.time(),
                       {"event": event, **extra})
        try:
            self.send_bytes(frame_encode(env))
        except Exception:
            pass

    def _write_loop(self):
        while True:
            with self._cv:
                while not self._queue and self.alive and not self.closing:
                    self._cv.wait(0.5)
                batch = self._queue[:]
                self._queue.clear()
                drained_close = self.closing and not self._queue
                dead = not self.alive
            if batch and not dead:
                try:
                    self.sock.sendall(b"".join(batch))
                except OSError:
                    self.server._close_peer(self, "send failed")
                    return
            if dead or drained_close:
                self.alive = False
                try:
                    self.sock.close()
                except OSError:
                    pass
                return


class BridgeServer:
    """Threaded TCP bridge; also hosts in-process endpoints (the orchestrator
    attaches as one so it exchanges envelopes like any external client)."""

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT,
                 ping_interval: float = PING_INTERVAL,
                 liveness_timeout: float = LIVENESS_TIMEOUT):
        self.host = host
        self.port = port
        self.ping_interval = ping_interval
        self.liveness_timeout = liveness_timeout
        self.table = TopicTable()
        self._lock = threading.RLock()
        self._peers: dict[int, _Peer] = {}
        self._listener: socket.socket | None = None
        self._stopped = threading.Event()

    def start(self) -> int:
        self._listener = socket.create_server((self.host, self.port))
        self.port = self._listener.getsockname()[1]
        threading.Thread(target=self._accept_loop, daemon=True).start()
        threading.Thread(target=self._heartbeat_loop, daemon=True).start()
        log.info("bridge listening on %s:%d", self.host, self.port)
        return self.port

    def stop(self) -> None:
        self._stopped.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            peers = list(self._peers.values())
        for p in peers:
            self._close_peer(p, "server shutdown")

    # -- endpoint management -------------------------------------------------

    def attach_local(self, on_message, name: str = "local") -> "LocalEndpoint":
        peer = _Peer(self, on_message=on_message, name=name)
        with self._lock:
            self._peers[peer.id] = peer
        return LocalEndpoint(self, peer)

    def _accept_loop(self):
        while not self._stopped.is_set():
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            peer = _Peer(self, sock=sock, name=f"{addr[0]}:{addr[1]}")
            with self._lock:
                self._peers[peer.id] = peer
            threading.Thread(target=self._read_loop, args=(peer,), daemon=True).start()

    def _heartbeat_loop(self):
        while not self._stopped.wait(self.ping_interval):
            now = time.monotonic()
            with self._lock:
                peers = list(self._peers.values())
            for p in peers:
                if p.sock is None:
                    continue
                if now - p.last_rx > self.liveness_timeout:
                    self._close_peer(p, "liveness timeout")
                else:
                    p.send_status("ping")

    def _close_peer(self, peer: _Peer, reason: str, flush: bool = False) -> None:
        """Detach a peer; with flush=True the writer drains queued frames
        (e.g. a final error status) before the socket closes."""
        with self._lock:
            if peer.id not in self._peers:
                return
            del self._peers[peer.id]
            self.table.drop(peer.id)
        if peer.sock is not None:
            if flush:
                peer.closing = True
            else:
                peer.alive = False
                try:
                    peer.sock.close()
                except OSError:
                    pass
            with peer._cv:
                peer._cv.notify()
        else:
            peer.alive = False
        log.info("closed %s: %s", peer.name, reason)

    # -- frame handling ------------------------------------------------------

    def _read_loop(self, peer: _Peer):
        buf = b""
        sock = peer.sock
        while peer.alive:
            try:
                chunk = sock.recv(65536)
            except OSError:
                break
            if not chunk:
                break
            buf += chunk
            while len(buf) >= 4:
                (n,) = struct.unpack(">I", buf[:4])
                if n > MAX_FRAME:
                    peer.send_status("error", error="OversizeFrame",
                                     detail=f"declared length {n}")
                    self._close_peer(peer, "oversize frame", flush=True)
                    return
                if len(buf) < 4 + n:
                    break
                frame = buf[: 4 + n]
                buf = buf[4 + n:]
                peer.last_rx = time.monotonic()
                try:
                    env = frame_decode(frame)
                    self.handle(peer, env, frame)
                except ProtocolError as exc:
                    peer.send_status("error", error=type(exc).__name__, detail=str(exc))
                    self._close_peer(peer, str(exc), flush=True)
                    return
        self._close_peer(peer, "eof")

    def handle(self, peer: _Peer, env: Envelope, frame: bytes | None = None) -> None:
        """Apply one validated envelope from a peer."""
        peer.last_rx = time.monotonic()
        if env.op == "advertise":
            with self._lock:
                self.table.advertise(peer.id, env.topic)
        elif env.op == "subscribe":
            with self._lock:
                self.table.subscribe(peer.id, env.topic)
        elif env.op == "publish":
            last = peer.last_seq.get(env.topic)
            if last is not None and env.seq <= last:
                raise MalformedJson(
                    f"seq {env.seq} not increasing on {env.topic} (last {last})"
                )
            peer.last_seq[env.topic] = env.seq
            if frame is None:
                frame = frame_encode(env)
            with self._lock:
                targets = [self._peers[c] for c in self.table.route(peer.id, env)
                           if c in self._peers]
            for target in targets:
                target.send_bytes(frame)
        elif env.op == "status":
            pass  # liveness already refreshed
        else:  # unreachable after validation, kept for defense
            raise UnknownOp(env.op)


class LocalEndpoint:
    """In-process bridge endpoint with the same semantics as a TCP client."""

    def __init__(self, server: BridgeServer, peer: _Peer):
        self._server = server
        self._peer = peer
        self._seq: dict[str, int] = {}

    @property
    def connected(self) -> bool:
        return self._peer.alive

    def advertise(self, topic: str) -> None:
        self._server.handle(self._peer, Envelope("advertise", topic, 0, time.time()))

    def subscribe(self, topic: str) -> None:
        self._server.handle(self._peer, Envelope("subscribe", topic, 0, time.time()))

    def publish(self, topic: str, msg, stamp: float | None = None) -> None:
        seq = self._seq.get(topic, 0) + 1
        self._seq[topic] = seq
        env = Envelope("publish", topic, seq, time.time() if stamp is None else stamp, msg)
        self._server.handle(self._peer, env)

    def close(self) -> None:
        self._server._close_peer(self._peer, "local endpoint closed")


# ---------------------------------------------------------------------------
# Client.

class BridgeClient:
    """Blocking-socket client with a callback dispatch thread.

    Callbacks run on the receive thread in per-topic arrival order; publishing
    from callbacks is allowed.  Replies to server pings automatically.
    """

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT, name: str = ""):
        self.host = host
        self.port = port
        self.name = name
        self._sock: socket.socket | None = None
        self._callbacks: dict[str, list] = {}
        self._seq: dict[str, int] = {}
        self._status_seq = 0
        self._lock = threading.Lock()
        self._recv_thread: threading.Thread | None = None
        self.on_status = None  # optional callable(Envelope)

    def connect(self) -> "BridgeClient":
        self._sock = socket.create_connection((self.host, self.port), timeout=10.0)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock.settimeout(None)
        self._recv_thread = threading.Thread(target=self._recv_loop, daemon=True)
        self._recv_thread.start()
        return self

    @property
    def connected(self) -> bool:
        return self._sock is not None

    def close(self) -> None:
        with self._lock:
            sock, self._sock = self._sock, None
        if sock is not None:
            try:
                sock.close()
            except OSError:
                pass

    def _send(self, env: Envelope) -> None:
        frame = frame_encode(env)
        with self._lock:
            if self._sock is None:
                raise ConnectionLost("client is disconnected")
            try:
                self._sock.sendall(frame)
            except OSError as exc:
                raise ConnectionLost(str(exc)) from exc

    def advertise(self, topic: str) -> None:
        self._send(Envelope("advertise", topic, 0, time.time()))

    def subscribe(self, topic: str, callback) -> None:
        self._callbacks.setdefault(topic, []).append(callback)
        self._send(Envelope("subscribe", topic, 0, time.time()))

    def publish(self, topic: str, msg, stamp: float | None = None) -> None:
        seq = self._seq.get(topic, 0) + 1
        self._seq[topic] = seq
        self._send(Envelope("publish", topic, seq,
                            time.time() if stamp is None else stamp, msg))

    def _recv_loop(self):
        buf = b""
        while True:
            with self._lock:
                sock = self._sock
            if sock is None:
                return
            try:
                chunk = sock.recv(65536)
            except OSError:
                return
            if not chunk:
                self.close()
                return
            buf += chunk
            while len(buf) >= 4:
                (n,) = struct.unpack(">I", buf[:4])
                if n > MAX_FRAME or len(buf) < 4 + n:
                    if n > MAX_FRAME:
                        self.close()
                        return
                    break
                frame = buf[: 4 + n]
                buf = buf[4 + n:]
                try:
                    env = frame_decode(frame)
                except ProtocolError:
                    continue
                self._dispatch(env)

    def _dispatch(self, env: Envelope) -> None:
        if env.op == "status":
            msg = env.msg if isinstance(env.msg, dict) else {}
            if msg.get("event") == "ping":
                self._status_seq += 1
                try:
                    self._send(Envelope("status", STATUS_TOPIC, self._status_seq,
                                        time.time(), {"event": "pong"}))
                except ConnectionLost:
                    pass
            if self.on_status is not None:
                self.on_status(env)
            return
        for cb in self._callbacks.get(env.topic, []):
            try:
                cb(env)
            except Exception:
                log.exception("callback for %s failed", env.topic)
