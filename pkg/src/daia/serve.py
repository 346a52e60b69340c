"""Interactive session server: control messages in, per-frame updates out.

Transport is newline-delimited JSON over TCP.  A client whose first bytes
look like an HTTP GET is upgraded to a WebSocket (RFC 6455, text frames, no
fragmentation), so a browser can speak the same protocol directly.

Client -> server:
    {"type": "gesture", "name": <primitive>, "frames": N, "speed": S}
    {"type": "pose", "joint": <JointId name>, "target": [x, y, z], "frames": N}
    {"type": "reset"}
Server -> client, one per synthesized frame at the configured fps:
    {"i": idx, "state": "D|A|I|X", "score": s, "g": <37-char bitstring>,
     "speed_r": v, "speed_l": v, "relabel": [from, to] | null}

Each connection owns a scripted body and a fresh transducer; sessions never
share mutable state.  Malformed messages get an {"error": ...} reply and the
session keeps running; transport-level violations end only that session.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import queue
import socket
import struct
import threading
import time
from typing import Callable, Iterator, Optional

import numpy as np

from .engine import Engine, FrameOutput
from .features import ThresholdConfig
from .fst import DEFAULT_BUFFER_DEPTH
from .guard_dsl import TransitionTable
from .intent import IntentModel
from .skeleton import PRIMITIVE_KINDS, Frame, JointId, PuppetBody, ScenarioStep


class ProtocolError(RuntimeError):
    """Transport-level violation that ends a session."""


_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
_MAX_MESSAGE = 1 << 16


def ws_accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key.strip() + _WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def ws_encode_text(payload: str) -> bytes:
    """One unmasked FIN text frame, as servers send them."""
    data = payload.encode()
    head = b"\x81"
    n = len(data)
    if n < 126:
        head += bytes([n])
    elif n < 1 << 16:
        head += b"\x7e" + struct.pack(">H", n)
    else:
        head += b"\x7f" + struct.pack(">Q", n)
    return head + data


def ws_read_frame(read_exact: Callable[[int], bytes]) -> tuple[int, bytes]:
    """Decode one client frame; client frames must be masked."""
    b0, b1 = read_exact(2)
    if not b0 & 0x80:
        raise ProtocolError("fragmented frames not supported")
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    n = b1 & 0x7F
    if n == 126:
        (n,) = struct.unpack(">H", read_exact(2))
    elif n == 127:
        (n,) = struct.unpack(">Q", read_exact(8))
    if n > _MAX_MESSAGE:
        raise ProtocolError("frame too large")
    if not masked:
        raise ProtocolError("client frames must be masked")
    mask = read_exact(4)
    data = bytes(c ^ mask[k % 4] for k, c in enumerate(read_exact(n)))
    return opcode, data


class _LineTransport:
    def __init__(self, conn: socket.socket):
        self.conn = conn
        self._buf = b""

    def recv_messages(self) -> Iterator[str]:
        while True:
            nl = self._buf.find(b"\n")
            if nl >= 0:
                line, self._buf = self._buf[:nl], self._buf[nl + 1 :]
                if line.strip():
                    yield line.decode("utf-8", "replace")
                continue
            if len(self._buf) > _MAX_MESSAGE:
                raise ProtocolError("message too long")
            chunk = self.conn.recv(4096)
            if not chunk:
                return
            self._buf += chunk

    def send(self, text: str) -> None:
        self.conn.sendall(text.encode() + b"\n")


class _WsTransport:
    def __init__(self, conn: socket.socket):
        self.conn = conn
        self._handshake()

    def _read_exact(self, n: int) -> bytes:
        out = b""
        while len(out) < n:
            chunk = self.conn.recv(n - len(out))
            if not chunk:
                raise ConnectionError("client closed mid-frame")
            out += chunk
        return out

    def _handshake(self) -> None:
        request = b""
        while b"\r\n\r\n" not in request:
            if len(request) > 8192:
                raise ProtocolError("oversized upgrade request")
            chunk = self.conn.recv(2048)
            if not chunk:
                raise ProtocolError("client closed during upgrade")
            request += chunk
        key = None
        for line in request.split(b"\r\n"):
            name, _, value = line.partition(b":")
            if name.strip().lower() == b"sec-websocket-key":
                key = value.strip().decode()
        if key is None:
            raise ProtocolError("missing Sec-WebSocket-Key")
        self.conn.sendall(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {ws_accept_key(key)}\r\n\r\n"
            ).encode()
        )

    def recv_messages(self) -> Iterator[str]:
        while True:
            opcode, data = ws_read_frame(self._read_exact)
            if opcode == 0x1:
                yield data.decode("utf-8", "replace")
            elif opcode == 0x8:  # close: echo and finish
                try:
                    self.conn.sendall(b"\x88\x00")
                except OSError:
                    pass
                return
            elif opcode == 0x9:  # ping -> pong
                self.conn.sendall(b"\x8a" + bytes([len(data)]) + data)
            elif opcode == 0xA:  # pong: ignore
                continue
            else:
                raise ProtocolError(f"unsupported opcode {opcode}")

    def send(self, text: str) -> None:
        self.conn.sendall(ws_encode_text(text))


def _shutdown(sock: socket.socket) -> None:
    # close() alone leaves threads blocked in recv()/accept() sleeping on
    # the kernel file; shutdown() wakes them and pushes the FIN out
    try:
        sock.shutdown(socket.SHUT_RDWR)
    except OSError:
        pass


def _negotiate(conn: socket.socket):
    # A WebSocket client sends its upgrade request immediately; a quiet
    # client is a plain listener and must start receiving frames anyway.
    conn.settimeout(0.25)
    try:
        head = conn.recv(4, socket.MSG_PEEK)
    except TimeoutError:
        head = b""
    finally:
        conn.settimeout(None)
    if head == b"GET ":
        return _WsTransport(conn)
    return _LineTransport(conn)


def _update_record(out: FrameOutput) -> dict:
    return {
        "i": out.frame_index,
        "state": out.state.code,
        "score": round(out.score, 6),
        "g": out.g.bitstring,
        "speed_r": round(out.r_speed, 3),
        "speed_l": round(out.l_speed, 3),
        "relabel": [out.relabel.start, out.relabel.end] if out.relabel else None,
    }


class _Session(threading.Thread):
    def __init__(self, server: "SessionServer", conn: socket.socket, sid: int):
        super().__init__(daemon=True, name=f"daia-session-{sid}")
        self.server = server
        self.conn = conn
        self.sid = sid
        self.puppet = PuppetBody(np.random.default_rng(server.seed))
        self.engine = server.fresh_engine()

    def _handle(self, raw: str) -> Optional[str]:
        """Apply one control message; an error string keeps the session alive."""
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError as e:
            return f"bad json: {e.msg}"
        if not isinstance(msg, dict):
            return "message must be a json object"
        kind = msg.get("type")
        if kind == "reset":
            self.puppet.reset()
            self.engine = self.server.fresh_engine()
            return None
        if kind == "gesture":
            name = msg.get("name")
            frames = msg.get("frames")
            speed = msg.get("speed", 0.0)
            if name not in PRIMITIVE_KINDS:
                return f"unknown gesture {name!r}"
            if not isinstance(frames, int) or not 1 <= frames <= 10_000:
                return "frames must be an int in [1, 10000]"
            if not isinstance(speed, (int, float)) or not math.isfinite(speed) or speed < 0:
                return "speed must be a finite number >= 0"
            self.puppet.push(ScenarioStep(name, frames, float(speed)))
            return None
        if kind == "pose":
            joint = msg.get("joint")
            target = msg.get("target")
            frames = msg.get("frames")
            if joint not in JointId.__members__:
                return f"unknown joint {joint!r}"
            if not isinstance(frames, int) or not 1 <= frames <= 10_000:
                return "frames must be an int in [1, 10000]"
            if (
                not isinstance(target, list)
                or len(target) != 3
                or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in target)
            ):
                return "target must be 3 finite coordinates"
            self.puppet.push_joint_target(JointId[joint], target, frames)
            return None
        return f"unknown message type {kind!r}"

    def run(self) -> None:
        inbox: queue.Queue[Optional[str]] = queue.Queue()
        try:
            transport = _negotiate(self.conn)

            def pump() -> None:
                try:
                    for message in transport.recv_messages():
                        inbox.put(message)
                except (OSError, ProtocolError):
                    pass
                finally:
                    inbox.put(None)

            threading.Thread(target=pump, daemon=True, name=f"daia-reader-{self.sid}").start()

            period = 1.0 / self.server.fps
            next_tick = time.monotonic()
            i = 0
            while not self.server.closing.is_set():
                while True:
                    try:
                        raw = inbox.get_nowait()
                    except queue.Empty:
                        break
                    if raw is None:
                        return
                    error = self._handle(raw)
                    if error is not None:
                        transport.send(json.dumps({"error": error}))
                frame = Frame(
                    frame_index=i,
                    timestamp_ms=round(i * 1000 / self.server.fps),
                    user_id=self.sid,
                    joints=self.puppet.tick().pose,
                )
                transport.send(json.dumps(_update_record(self.engine.process(frame))))
                i += 1
                next_tick += period
                delay = next_tick - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:  # fell behind; resynchronize instead of bursting
                    next_tick = time.monotonic()
        except (OSError, ProtocolError, ConnectionError):
            pass
        finally:
            _shutdown(self.conn)
            try:
                self.conn.close()
            except OSError:
                pass
            self.server.forget(self)


class SessionServer:
    """Accepts connections and runs one isolated pipeline session per client."""

    def __init__(
        self,
        model: IntentModel,
        table: Optional[TransitionTable] = None,
        cfg: ThresholdConfig = ThresholdConfig(),
        host: str = "127.0.0.1",
        port: int = 0,
        fps: int = 30,
        seed: int = 0,
        buffer_depth: int = DEFAULT_BUFFER_DEPTH,
    ):
        if fps < 1:
            raise ValueError("fps must be >= 1")
        self.model = model
        self.table = table
        self.cfg = cfg
        self.fps = fps
        self.seed = seed
        self.buffer_depth = buffer_depth
        self.closing = threading.Event()
        self._sessions: set[_Session] = set()
        self._lock = threading.Lock()
        self._next_sid = 0
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(16)
        self.host, self.port = self._sock.getsockname()

    def fresh_engine(self) -> Engine:
        return Engine(self.model, table=self.table, cfg=self.cfg, buffer_depth=self.buffer_depth)

    def forget(self, session: _Session) -> None:
        with self._lock:
            self._sessions.discard(session)

    def serve_forever(self) -> None:
        while not self.closing.is_set():
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return  # listener closed
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._lock:
                sid = self._next_sid
                self._next_sid += 1
                session = _Session(self, conn, sid)
                self._sessions.add(session)
            session.start()

    def start(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True, name="daia-accept")
        thread.start()
        return thread

    def close(self) -> None:
        self.closing.set()
        _shutdown(self._sock)
        try:
            self._sock.close()
        except OSError:
            pass
        with self._lock:
            sessions = list(self._sessions)
        for session in sessions:
            _shutdown(session.conn)
            try:
                session.conn.close()
            except OSError:
                pass
