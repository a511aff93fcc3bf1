"""Wire protocol between the capture daemon and its UI clients.

Messages are UTF-8 JSON objects ``{"type", "seq", "payload", "reply_to"?}``.
Over raw TCP each message is framed by a 4-byte big-endian length prefix;
over WebSocket each message is one text frame. Binary payloads (images,
waveforms) travel base64-encoded. See protocol.md for the schema catalogue.
"""

from __future__ import annotations

import base64
import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from ..errors import ValidationError
from ..records import RgbdFrame

SCHEMA_VERSION = 1

DAEMON_MESSAGES = (
    "Hello",
    "StateUpdate",
    "RgbFrame",
    "DepthFrame",
    "TactileFrame",
    "ForceReading",
    "AccelReading",
    "SpectrogramFrame",
    "HammerImpulse",
    "AudioStatus",
    "Error",
)

CLIENT_MESSAGES = (
    "SnapshotRgbd",
    "BeginTactile",
    "ArmHammer",
    "Retake",
    "NextPoint",
    "SetLabel",
    "SetEnvironment",
    "SetConfig",
)

#: High-rate telemetry the daemon may drop for a slow client. StateUpdate,
#: Hello, and Error are never dropped.
TELEMETRY_TYPES = frozenset(
    {"ForceReading", "AccelReading", "RgbFrame", "DepthFrame", "TactileFrame"}
)

MAX_FRAME_BYTES = 32 * 1024 * 1024


@dataclass
class WireMessage:
    type: str
    seq: int
    payload: dict = field(default_factory=dict)
    reply_to: int | None = None

    def validate(self) -> None:
        if self.type not in DAEMON_MESSAGES and self.type not in CLIENT_MESSAGES:
            raise ValidationError(f"unknown message type: {self.type}")
        if self.seq < 0:
            raise ValidationError("seq must be non-negative")


def encode_json(msg: WireMessage) -> bytes:
    msg.validate()
    body = {"type": msg.type, "seq": msg.seq, "payload": msg.payload}
    if msg.reply_to is not None:
        body["reply_to"] = msg.reply_to
    return json.dumps(body, separators=(",", ":")).encode("utf-8")


def decode_json(data: bytes | str) -> WireMessage:
    try:
        body = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed message JSON: {exc}") from exc
    if not isinstance(body, dict) or "type" not in body or "seq" not in body:
        raise ValidationError("message must carry 'type' and 'seq'")
    msg = WireMessage(
        type=str(body["type"]),
        seq=int(body["seq"]),
        payload=body.get("payload") or {},
        reply_to=body.get("reply_to"),
    )
    msg.validate()
    return msg


def encode_frame(msg: WireMessage) -> bytes:
    body = encode_json(msg)
    return struct.pack(">I", len(body)) + body


class FrameDecoder:
    """Incremental length-prefixed frame parser for a TCP byte stream."""

    def __init__(self):
        self._buffer = bytearray()

    def feed(self, data: bytes) -> list[WireMessage]:
        self._buffer.extend(data)
        out = []
        while len(self._buffer) >= 4:
            (length,) = struct.unpack(">I", self._buffer[:4])
            if length > MAX_FRAME_BYTES:
                raise ValidationError(f"frame of {length} bytes exceeds limit")
            if len(self._buffer) < 4 + length:
                break
            body = bytes(self._buffer[4 : 4 + length])
            del self._buffer[: 4 + length]
            out.append(decode_json(body))
        return out


# --------------------------------------------------------------------------
# payload builders


def _png_b64_rgb(rgb: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _png_b64_depth(depth_mm: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(depth_mm).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _f32_b64(samples: np.ndarray) -> str:
    return base64.b64encode(np.asarray(samples, dtype=np.float32).tobytes()).decode("ascii")


def rgb_frame_payload(frame: RgbdFrame) -> dict:
    return {
        "timestamp_ns": frame.timestamp_ns,
        "png": _png_b64_rgb(frame.rgb),
        "center_depth_m": frame.center_depth_m,
    }


def depth_frame_payload(frame: RgbdFrame, gate_status: str) -> dict:
    return {
        "timestamp_ns": frame.timestamp_ns,
        "png16": _png_b64_depth(frame.depth),
        "center_depth_m": frame.center_depth_m,
        "gate": gate_status,
    }


def tactile_frame_payload(image: np.ndarray, force_n: float, timestamp_ns: int) -> dict:
    return {
        "timestamp_ns": timestamp_ns,
        "png": _png_b64_rgb(image),
        "force_n": force_n,
    }


def spectrogram_payload(spec) -> dict:
    return {
        "window_samples": spec.window_samples,
        "hop_samples": spec.hop_samples,
        "sample_rate_hz": spec.sample_rate_hz,
        "frames": spec.magnitudes.shape[0],
        "bins": spec.magnitudes.shape[1],
        "mags_f32": _f32_b64(spec.magnitudes.ravel()),
    }


def hammer_impulse_payload(info, samples: np.ndarray, max_points: int = 2048) -> dict:
    samples = np.asarray(samples, dtype=np.float32)
    stride = max(1, len(samples) // max_points)
    return {
        "peak_index": info.peak_index,
        "peak_value": info.peak_value,
        "secondary_peak_ratio": info.secondary_peak_ratio,
        "pulse_window": list(info.pulse_window),
        "stride": stride,
        "samples_f32": _f32_b64(samples[::stride]),
    }
