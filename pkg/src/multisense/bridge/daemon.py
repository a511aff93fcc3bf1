"""Capture daemon: hosts one session driver over TCP/WebSocket clients.

A single listener accepts both framings on one port: connections opening
with an HTTP upgrade speak WebSocket (for browsers), anything else speaks
4-byte length-prefixed JSON. The first connection is the operator; later
ones are read-only viewers. One loop thread owns the driver; per-connection
writer threads drain bounded queues, dropping oldest telemetry (never
StateUpdate/Hello/Error) when a client can't keep up.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import queue
import socket
import struct
import threading
import time

from ..capture.triggers import depth_gate_check
from ..errors import ValidationError
from . import protocol
from .driver import CommandError, SessionDriver

log = logging.getLogger(__name__)

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

DEFAULT_PORT = 8787


# --------------------------------------------------------------------------
# minimal server-side WebSocket framing


def ws_accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode("ascii")


def ws_encode_text(data: bytes) -> bytes:
    header = bytearray([0x81])
    length = len(data)
    if length <= 125:
        header.append(length)
    elif length <= 0xFFFF:
        header.append(126)
        header.extend(struct.pack(">H", length))
    else:
        header.append(127)
        header.extend(struct.pack(">Q", length))
    return bytes(header) + data


class WsDecoder:
    """Parses masked client frames; yields (opcode, payload) pairs."""

    def __init__(self):
        self._buffer = bytearray()

    def feed(self, data: bytes) -> list[tuple[int, bytes]]:
        self._buffer.extend(data)
        frames = []
        while True:
            parsed = self._try_parse()
            if parsed is None:
                return frames
            frames.append(parsed)

    def _try_parse(self):
        buf = self._buffer
        if len(buf) < 2:
            return None
        opcode = buf[0] & 0x0F
        masked = bool(buf[1] & 0x80)
        length = buf[1] & 0x7F
        offset = 2
        if length == 126:
            if len(buf) < offset + 2:
                return None
            (length,) = struct.unpack(">H", buf[offset : offset + 2])
            offset += 2
        elif length == 127:
            if len(buf) < offset + 8:
                return None
            (length,) = struct.unpack(">Q", buf[offset : offset + 8])
            offset += 8
        mask = b"\x00\x00\x00\x00"
        if masked:
            if len(buf) < offset + 4:
                return None
            mask = bytes(buf[offset : offset + 4])
            offset += 4
        if len(buf) < offset + length:
            return None
        payload = bytes(buf[offset : offset + length])
        del buf[: offset + length]
        if masked:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        return opcode, payload


# --------------------------------------------------------------------------
# connections


class Connection:
    def __init__(self, sock: socket.socket, daemon: "CaptureDaemon", role: str, websocket: bool):
        self.sock = sock
        self.daemon = daemon
        self.role = role
        self.websocket = websocket
        self.alive = True
        self.seq = 0
        self.outbox: queue.Queue = queue.Queue(maxsize=512)
        self._writer = threading.Thread(target=self._write_loop, daemon=True)
        self._reader = threading.Thread(target=self._read_loop, daemon=True)

    def start(self) -> None:
        self._writer.start()
        self._reader.start()

    def enqueue(self, msg_type: str, payload: dict, reply_to: int | None = None) -> None:
        item = (msg_type, payload, reply_to)
        try:
            self.outbox.put_nowait(item)
        except queue.Full:
            # drop the oldest telemetry entry to make room; never drop
            # state-bearing messages
            try:
                drained = []
                dropped = False
                while True:
                    head = self.outbox.get_nowait()
                    if not dropped and head[0] in protocol.TELEMETRY_TYPES:
                        dropped = True
                        continue
                    drained.append(head)
            except queue.Empty:
                pass
            for entry in drained:
                try:
                    self.outbox.put_nowait(entry)
                except queue.Full:
                    break
            try:
                self.outbox.put_nowait(item)
            except queue.Full:
                log.warning("dropping %s for saturated client", msg_type)

    def _write_loop(self) -> None:
        while self.alive:
            try:
                msg_type, payload, reply_to = self.outbox.get(timeout=0.2)
            except queue.Empty:
                continue
            self.seq += 1
            msg = protocol.WireMessage(type=msg_type, seq=self.seq, payload=payload, reply_to=reply_to)
            try:
                if self.websocket:
                    self.sock.sendall(ws_encode_text(protocol.encode_json(msg)))
                else:
                    self.sock.sendall(protocol.encode_frame(msg))
            except OSError:
                self.close()

    def _read_loop(self) -> None:
        decoder = WsDecoder() if self.websocket else protocol.FrameDecoder()
        while self.alive:
            try:
                data = self.sock.recv(65536)
            except OSError:
                break
            if not data:
                break
            try:
                if self.websocket:
                    for opcode, payload in decoder.feed(data):
                        if opcode == 0x8:  # close
                            self.close()
                            break
                        if opcode in (0x1, 0x2):
                            self._handle_bytes(payload)
                else:
                    for msg in decoder.feed(data):
                        self.daemon.submit(self, msg)
            except ValidationError as exc:
                self.enqueue("Error", {"message": str(exc)})
        self.close()

    def _handle_bytes(self, payload: bytes) -> None:
        try:
            msg = protocol.decode_json(payload)
        except ValidationError as exc:
            self.enqueue("Error", {"message": str(exc)})
            return
        self.daemon.submit(self, msg)

    def close(self) -> None:
        if not self.alive:
            return
        self.alive = False
        try:
            self.sock.shutdown(socket.SHUT_RDWR)  # wake any blocked recv
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass
        self.daemon.forget(self)


# --------------------------------------------------------------------------
# daemon


class CaptureDaemon:
    """Runs the session loop and fans sensor/state messages out to clients."""

    def __init__(
        self,
        driver: SessionDriver,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        realtime: bool = False,
        force_decimation: int = 5,  # 200 Hz ticks -> 40 Hz to clients
        frame_decimation: int = 3,  # 30 Hz frames -> 10 Hz to clients
    ):
        self.driver = driver
        self.host = host
        self.port = port
        self.realtime = realtime
        self.force_decimation = max(1, force_decimation)
        self.frame_decimation = max(1, frame_decimation)
        self._listener: socket.socket | None = None
        self._connections: list[Connection] = []
        self._operator: Connection | None = None
        self._lock = threading.Lock()
        self._commands: queue.Queue = queue.Queue()
        self._running = False
        self._threads: list[threading.Thread] = []
        self._force_count = 0
        self._frame_count = 0

    # -- lifecycle

    def start(self) -> None:
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((self.host, self.port))
        self.port = self._listener.getsockname()[1]
        self._listener.listen(8)
        self._running = True
        accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        loop_thread = threading.Thread(target=self._session_loop, daemon=True)
        self._threads = [accept_thread, loop_thread]
        accept_thread.start()
        loop_thread.start()
        log.info("daemon listening on %s:%d", self.host, self.port)

    def stop(self) -> None:
        self._running = False
        if self._listener:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            connections = list(self._connections)
        for conn in connections:
            conn.close()
        for thread in self._threads:
            thread.join(timeout=2.0)

    def serve_forever(self) -> None:
        self.start()
        try:
            while self._running and not self.driver.finished:
                time.sleep(0.1)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    # -- connection plumbing

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while self._running:
            try:
                sock, _addr = self._listener.accept()
            except OSError:
                break
            threading.Thread(target=self._handshake, args=(sock,), daemon=True).start()

    def _handshake(self, sock: socket.socket) -> None:
        # WebSocket clients speak first (HTTP upgrade); raw-TCP viewers may
        # never send, so a silent peek window means plain framing.
        websocket = False
        try:
            sock.settimeout(0.5)
            first = sock.recv(4, socket.MSG_PEEK)
            websocket = first.startswith(b"GET")
        except TimeoutError:
            pass
        except OSError:
            return
        finally:
            sock.settimeout(None)
        if websocket and not self._upgrade_websocket(sock):
            sock.close()
            return
        with self._lock:
            role = "viewer" if self._operator is not None else "operator"
            conn = Connection(sock, self, role, websocket)
            if role == "operator":
                self._operator = conn
            self._connections.append(conn)
        conn.enqueue(
            "Hello",
            {
                "schema_version": protocol.SCHEMA_VERSION,
                "role": role,
                "session": self.driver.state_snapshot(),
            },
        )
        conn.start()

    def _upgrade_websocket(self, sock: socket.socket) -> bool:
        data = b""
        while b"\r\n\r\n" not in data:
            chunk = sock.recv(4096)
            if not chunk:
                return False
            data += chunk
            if len(data) > 65536:
                return False
        key = None
        for line in data.split(b"\r\n"):
            if line.lower().startswith(b"sec-websocket-key:"):
                key = line.split(b":", 1)[1].strip().decode()
        if key is None:
            return False
        response = (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {ws_accept_key(key)}\r\n\r\n"
        )
        sock.sendall(response.encode())
        return True

    def forget(self, conn: Connection) -> None:
        with self._lock:
            if conn in self._connections:
                self._connections.remove(conn)
            if self._operator is conn:
                self._operator = None  # next connection may claim the session

    def submit(self, conn: Connection, msg: protocol.WireMessage) -> None:
        self._commands.put((conn, msg))

    # -- the session loop

    def _session_loop(self) -> None:
        tick_s = self.driver.tick_ns / 1e9
        next_wall = time.monotonic()
        while self._running:
            self._process_commands()
            if not self.driver.finished:
                self.driver.tick()
            self._broadcast_notifications()
            if self.realtime:
                next_wall += tick_s
                delay = next_wall - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            elif self.driver.finished:
                time.sleep(0.01)

    def _process_commands(self) -> None:
        while True:
            try:
                conn, msg = self._commands.get_nowait()
            except queue.Empty:
                return
            if msg.type not in protocol.CLIENT_MESSAGES:
                conn.enqueue("Error", {"message": f"not a command: {msg.type}"}, reply_to=msg.seq)
                continue
            if conn.role != "operator":
                conn.enqueue("Error", {"message": "read-only viewer"}, reply_to=msg.seq)
                continue
            try:
                snapshot = self.driver.handle_command(msg.type, msg.payload)
                conn.enqueue("StateUpdate", {"session": snapshot}, reply_to=msg.seq)
            except CommandError as exc:
                conn.enqueue("Error", {"message": str(exc)}, reply_to=msg.seq)

    def _broadcast(self, msg_type: str, payload: dict) -> None:
        with self._lock:
            conns = list(self._connections)
        for conn in conns:
            conn.enqueue(msg_type, payload)

    def _broadcast_notifications(self) -> None:
        for note in self.driver.drain_notifications():
            kind = note.kind
            p = note.payload
            if kind == "state":
                self._broadcast("StateUpdate", {"session": p["snapshot"]})
            elif kind == "force":
                self._force_count += 1
                if self._force_count % self.force_decimation == 0:
                    self._broadcast(
                        "ForceReading",
                        {"timestamp_ns": p["timestamp_ns"], "newtons": p["newtons"]},
                    )
            elif kind == "accel":
                if self._force_count % self.force_decimation == 0:
                    pose = p["pose"]
                    self._broadcast(
                        "AccelReading",
                        {
                            "timestamp_ns": p["timestamp_ns"],
                            "gravity_dir": [float(v) for v in pose.gravity_dir],
                            "raw_accel": [float(v) for v in pose.raw_accel],
                        },
                    )
            elif kind == "frame":
                self._frame_count += 1
                if self._frame_count % self.frame_decimation == 0:
                    frame = p["frame"]
                    gate = depth_gate_check(frame, self.driver.config.depth_gate)
                    self._broadcast("RgbFrame", protocol.rgb_frame_payload(frame))
                    self._broadcast("DepthFrame", protocol.depth_frame_payload(frame, gate.value))
            elif kind == "tactile_frame":
                self._broadcast(
                    "TactileFrame",
                    protocol.tactile_frame_payload(p["image"], p["force_n"], p["timestamp_ns"]),
                )
            elif kind == "spectrogram":
                self._broadcast("SpectrogramFrame", protocol.spectrogram_payload(p["spec"]))
            elif kind == "hammer_impulse":
                self._broadcast(
                    "HammerImpulse", protocol.hammer_impulse_payload(p["info"], p["samples"])
                )
            elif kind in ("audio_status", "tactile_captured", "point_saved"):
                self._broadcast("AudioStatus", {"event": kind, **_jsonable(p)})


def _jsonable(payload: dict) -> dict:
    out = {}
    for key, value in payload.items():
        if isinstance(value, (str, int, float, bool)) or value is None:
            out[key] = value
        else:
            out[key] = str(value)
    return out


def serve(
    driver: SessionDriver,
    host: str = "127.0.0.1",
    port: int = DEFAULT_PORT,
    realtime: bool = False,
) -> CaptureDaemon:
    """Start a daemon for the driver; returns it (caller stops it)."""

    daemon = CaptureDaemon(driver, host=host, port=port, realtime=realtime)
    daemon.start()
    return daemon
