"""Capture daemon, wire protocol, and the session driver."""

from .daemon import DEFAULT_PORT, CaptureDaemon, serve
from .driver import CommandError, Notification, SessionDriver
from .protocol import (
    CLIENT_MESSAGES,
    DAEMON_MESSAGES,
    SCHEMA_VERSION,
    TELEMETRY_TYPES,
    FrameDecoder,
    WireMessage,
    decode_json,
    encode_frame,
    encode_json,
)

__all__ = [
    "CLIENT_MESSAGES",
    "CaptureDaemon",
    "CommandError",
    "DAEMON_MESSAGES",
    "DEFAULT_PORT",
    "FrameDecoder",
    "Notification",
    "SCHEMA_VERSION",
    "SessionDriver",
    "TELEMETRY_TYPES",
    "WireMessage",
    "decode_json",
    "encode_frame",
    "encode_json",
    "serve",
]
