"""Per-point capture session state machine and hammer release sequencing.

``advance`` is a pure transition function: it returns a new SessionState and
raises :class:`TransitionError` (leaving the input untouched) for any event
that is not legal in the current phase. The machine re-verifies the audio
take itself, so no event sequence can reach PointComplete without three
in-window tactile snapshots, an RGBD frame with its simultaneous pose, and a
verified clean impulse.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .. import audio as audio_ops
from ..errors import TransitionError, ValidationError
from ..records import (
    DEFAULT_FORCE_TARGETS,
    AccelPose,
    AudioTake,
    PointRecord,
    RgbdFrame,
    TactileSnapshot,
)
from .triggers import DepthGate, GateStatus, TriggerConfig, depth_gate_check


class Phase(Enum):
    IDLE = "Idle"
    RGBD_TARGETING = "RgbdTargeting"
    RGBD_CAPTURED = "RgbdCaptured"
    TACTILE_APPROACH = "TactileApproach"
    TACTILE_PRESSING = "TactilePressing"
    TACTILE_DONE = "TactileDone"
    AUDIO_ARMED = "AudioArmed"
    AUDIO_RELEASED = "AudioReleased"
    AUDIO_DONE = "AudioDone"
    POINT_COMPLETE = "PointComplete"


RETAKE_MODALITIES = ("rgbd", "tactile", "audio")


@dataclass
class HammerConfig:
    release_delay_s: float = 1.0  # magnet-off delay after the hammer adheres
    record_pre_s: float = 0.1
    record_post_s: float = 2.0
    timeout_s: float = 5.0

    def validate(self) -> None:
        if min(self.release_delay_s, self.record_pre_s, self.record_post_s, self.timeout_s) <= 0:
            raise ValidationError("hammer timing values must be positive")


@dataclass
class SessionConfig:
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    depth_gate: DepthGate = field(default_factory=DepthGate)
    hammer: HammerConfig = field(default_factory=HammerConfig)
    angle_tol_deg: float = 10.0  # display guide only; never blocks capture
    max_secondary_ratio: float = 0.2
    impulse_snr: float = 10.0  # peak must exceed this multiple of the noise floor
    contact_threshold_n: float = 0.5
    accel_rate_hz: float = 200.0
    frame_rate_hz: float = 30.0
    tick_rate_hz: float = 200.0

    def validate(self) -> None:
        self.trigger.validate()
        self.depth_gate.validate()
        self.hammer.validate()

    @staticmethod
    def from_json(path: Path | str) -> "SessionConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = SessionConfig()
        trig = raw.get("trigger", {})
        cfg.trigger = TriggerConfig(
            targets_n=tuple(trig.get("targets_n", DEFAULT_FORCE_TARGETS)),
            window_n=float(trig.get("window_n", cfg.trigger.window_n)),
            debounce_samples=int(trig.get("debounce_samples", cfg.trigger.debounce_samples)),
        )
        gate = raw.get("depth_gate", {})
        cfg.depth_gate = DepthGate(
            min_m=float(gate.get("min_m", cfg.depth_gate.min_m)),
            max_m=float(gate.get("max_m", cfg.depth_gate.max_m)),
        )
        ham = raw.get("hammer", {})
        cfg.hammer = HammerConfig(
            release_delay_s=float(ham.get("release_delay_s", cfg.hammer.release_delay_s)),
            record_pre_s=float(ham.get("record_pre_s", cfg.hammer.record_pre_s)),
            record_post_s=float(ham.get("record_post_s", cfg.hammer.record_post_s)),
            timeout_s=float(ham.get("timeout_s", cfg.hammer.timeout_s)),
        )
        for key in (
            "angle_tol_deg",
            "max_secondary_ratio",
            "impulse_snr",
            "contact_threshold_n",
            "accel_rate_hz",
            "frame_rate_hz",
            "tick_rate_hz",
        ):
            if key in raw:
                setattr(cfg, key, float(raw[key]))
        cfg.validate()
        return cfg


# --------------------------------------------------------------------------
# events


@dataclass(frozen=True)
class StartPoint:
    object_id: str
    point_index: int


@dataclass(frozen=True)
class SnapshotRgbd:
    frame: RgbdFrame
    pose: AccelPose


@dataclass(frozen=True)
class BeginTactile:
    pass


@dataclass(frozen=True)
class ContactDetected:
    pass


@dataclass(frozen=True)
class TargetCaptured:
    snapshot: TactileSnapshot


@dataclass(frozen=True)
class ArmHammer:
    pass


@dataclass(frozen=True)
class HammerReleased:
    pass


@dataclass(frozen=True)
class ImpactCaptured:
    take: AudioTake


@dataclass(frozen=True)
class AudioFailed:
    reason: str


@dataclass(frozen=True)
class Finalize:
    pass


@dataclass(frozen=True)
class Retake:
    modality: str


@dataclass(frozen=True)
class NextPoint:
    pass


Event = (
    StartPoint
    | SnapshotRgbd
    | BeginTactile
    | ContactDetected
    | TargetCaptured
    | ArmHammer
    | HammerReleased
    | ImpactCaptured
    | AudioFailed
    | Finalize
    | Retake
    | NextPoint
)


@dataclass(frozen=True)
class SessionState:
    phase: Phase = Phase.IDLE
    object_id: str | None = None
    point_index: int | None = None
    captured_targets: frozenset[float] = frozenset()
    reference_pose: AccelPose | None = None
    pending_retake: str | None = None
    rgbd_frame: RgbdFrame | None = None
    tactile_snapshots: tuple[TactileSnapshot, ...] = ()
    audio_take: AudioTake | None = None
    audio_verified: bool = False

    def replace(self, **kwargs) -> "SessionState":
        return dataclasses.replace(self, **kwargs)


def _reject(state: SessionState, event: Event, reason: str) -> TransitionError:
    return TransitionError(state.phase, type(event).__name__, reason)


def advance(state: SessionState, event: Event, config: SessionConfig | None = None) -> SessionState:
    """Apply one event; returns the successor state or raises TransitionError."""

    config = config or SessionConfig()
    phase = state.phase

    if isinstance(event, StartPoint):
        if phase is not Phase.IDLE:
            raise _reject(state, event, "session already active")
        if not 0 <= event.point_index < 6:
            raise _reject(state, event, f"point_index {event.point_index} outside [0, 6)")
        return SessionState(
            phase=Phase.RGBD_TARGETING,
            object_id=event.object_id,
            point_index=event.point_index,
        )

    if isinstance(event, SnapshotRgbd):
        if phase is not Phase.RGBD_TARGETING:
            raise _reject(state, event, "RGBD snapshot only legal while targeting")
        status = depth_gate_check(event.frame, config.depth_gate)
        if status is not GateStatus.IN_RANGE:
            raise _reject(state, event, f"depth out of range ({status.value})")
        period_ns = 1e9 / config.accel_rate_hz
        if abs(event.frame.timestamp_ns - event.pose.timestamp_ns) >= period_ns:
            raise _reject(state, event, "frame and accel pose not simultaneous")
        return state.replace(
            phase=Phase.RGBD_CAPTURED,
            rgbd_frame=event.frame,
            reference_pose=event.pose,
            pending_retake=None if state.pending_retake == "rgbd" else state.pending_retake,
        )

    if isinstance(event, BeginTactile):
        if phase is not Phase.RGBD_CAPTURED:
            raise _reject(state, event, "tactile capture requires a fresh RGBD snapshot")
        return state.replace(phase=Phase.TACTILE_APPROACH)

    if isinstance(event, ContactDetected):
        if phase is not Phase.TACTILE_APPROACH:
            raise _reject(state, event, "contact only expected during approach")
        return state.replace(phase=Phase.TACTILE_PRESSING, captured_targets=frozenset(), tactile_snapshots=())

    if isinstance(event, TargetCaptured):
        if phase is not Phase.TACTILE_PRESSING:
            raise _reject(state, event, "tactile snapshot outside a press")
        snap = event.snapshot
        targets = config.trigger.targets_n
        if snap.target_force_n not in targets:
            raise _reject(state, event, f"unknown target {snap.target_force_n}")
        remaining = [t for t in targets if t not in state.captured_targets]
        if not remaining or snap.target_force_n != remaining[0]:
            raise _reject(state, event, f"target {snap.target_force_n} out of order")
        try:
            snap.validate()
        except ValidationError as exc:
            raise _reject(state, event, str(exc)) from exc
        captured = state.captured_targets | {snap.target_force_n}
        snapshots = state.tactile_snapshots + (snap,)
        done = captured == frozenset(targets)
        return state.replace(
            phase=Phase.TACTILE_DONE if done else Phase.TACTILE_PRESSING,
            captured_targets=frozenset(captured),
            tactile_snapshots=snapshots,
            pending_retake=(
                None
                if done and state.pending_retake == "tactile"
                else state.pending_retake
            ),
        )

    if isinstance(event, ArmHammer):
        if phase is not Phase.TACTILE_DONE:
            raise _reject(state, event, "hammer arms only after tactile capture")
        return state.replace(phase=Phase.AUDIO_ARMED)

    if isinstance(event, HammerReleased):
        if phase is not Phase.AUDIO_ARMED:
            raise _reject(state, event, "hammer release requires an armed hammer")
        return state.replace(phase=Phase.AUDIO_RELEASED)

    if isinstance(event, ImpactCaptured):
        if phase is not Phase.AUDIO_RELEASED:
            raise _reject(state, event, "impact only expected after release")
        take = event.take
        clean = False
        try:
            floor = audio_ops.estimate_noise_floor(take.hammer_samples)
            info = audio_ops.find_impulse(take.hammer_samples, floor, snr=config.impulse_snr)
            clean = audio_ops.verify_clean_impulse(info, config.max_secondary_ratio)
        except audio_ops.NoImpulseError:
            clean = False
        if not clean:
            return state.replace(phase=Phase.TACTILE_DONE, pending_retake="audio")
        return state.replace(
            phase=Phase.AUDIO_DONE,
            audio_take=take,
            audio_verified=True,
            pending_retake=None if state.pending_retake == "audio" else state.pending_retake,
        )

    if isinstance(event, AudioFailed):
        if phase not in (Phase.AUDIO_ARMED, Phase.AUDIO_RELEASED):
            raise _reject(state, event, "no audio capture in progress")
        return state.replace(phase=Phase.TACTILE_DONE, pending_retake="audio")

    if isinstance(event, Finalize):
        if phase is not Phase.AUDIO_DONE:
            raise _reject(state, event, "finalize requires a verified audio take")
        missing = []
        if state.rgbd_frame is None or state.reference_pose is None:
            missing.append("rgbd")
        if state.captured_targets != frozenset(config.trigger.targets_n):
            missing.append("tactile")
        if state.audio_take is None or not state.audio_verified:
            missing.append("audio")
        if missing:
            raise _reject(state, event, f"modalities incomplete: {missing}")
        return state.replace(phase=Phase.POINT_COMPLETE)

    if isinstance(event, Retake):
        if event.modality not in RETAKE_MODALITIES:
            raise _reject(state, event, f"unknown modality '{event.modality}'")
        if phase not in (Phase.RGBD_CAPTURED, Phase.TACTILE_DONE, Phase.AUDIO_DONE, Phase.POINT_COMPLETE):
            raise _reject(state, event, "retake only legal between captures")
        if event.modality == "rgbd":
            if state.rgbd_frame is None:
                raise _reject(state, event, "no RGBD frame to retake")
            return state.replace(
                phase=Phase.RGBD_TARGETING,
                rgbd_frame=None,
                reference_pose=None,
                pending_retake="rgbd",
            )
        if event.modality == "tactile":
            if not state.captured_targets:
                raise _reject(state, event, "no tactile snapshots to retake")
            return state.replace(
                phase=Phase.TACTILE_APPROACH,
                captured_targets=frozenset(),
                tactile_snapshots=(),
                pending_retake="tactile",
            )
        if state.audio_take is None:
            raise _reject(state, event, "no audio take to retake")
        return state.replace(
            phase=Phase.AUDIO_ARMED,
            audio_take=None,
            audio_verified=False,
            pending_retake="audio",
        )

    if isinstance(event, NextPoint):
        if phase is not Phase.POINT_COMPLETE:
            raise _reject(state, event, "point not complete")
        return SessionState(phase=Phase.IDLE)

    raise _reject(state, event, "unknown event")


def build_point_record(
    state: SessionState, force_log: list[tuple[int, float, float]] | None = None
) -> PointRecord:
    """Assemble the PointRecord for a completed session state."""

    if state.phase is not Phase.POINT_COMPLETE:
        raise ValidationError("session has not completed the point")
    assert state.rgbd_frame and state.reference_pose and state.audio_take
    record = PointRecord(
        object_id=state.object_id or "",
        point_index=state.point_index or 0,
        rgbd=state.rgbd_frame,
        rgbd_pose=state.reference_pose,
        tactile=list(state.tactile_snapshots),
        audio=state.audio_take,
        force_log=force_log or [],
    )
    record.validate()
    return record


# --------------------------------------------------------------------------
# hammer release sequencing


@dataclass(frozen=True)
class HammerEvent:
    kind: str  # magnet_on | magnet_off | recording_window | audio_failed
    timestamp_ns: int
    payload: dict = field(default_factory=dict)


class HammerSequencer:
    """Tick-driven magnet/recording sequencer for one strike.

    magnet_on at start; once the operator pull is detected (hammer adhered),
    a timer runs and magnet_off fires at release_delay (+/- one tick); the
    recording window brackets the detected impact. Timeouts emit
    audio_failed so the session can fall back for a retake.
    """

    def __init__(self, cfg: HammerConfig, start_ns: int):
        cfg.validate()
        self.cfg = cfg
        self.start_ns = start_ns
        self.adhered_ns: int | None = None
        self.release_ns: int | None = None
        self.done = False
        self.started = False

    def begin(self) -> HammerEvent:
        self.started = True
        return HammerEvent("magnet_on", self.start_ns)

    def tick(self, now_ns: int, adhered: bool = False, impact_ns: int | None = None) -> list[HammerEvent]:
        if not self.started or self.done:
            return []
        events: list[HammerEvent] = []
        timeout_ns = int(self.cfg.timeout_s * 1e9)

        if adhered and self.adhered_ns is None:
            self.adhered_ns = now_ns

        if self.adhered_ns is None:
            if now_ns - self.start_ns >= timeout_ns:
                self.done = True
                return [HammerEvent("audio_failed", now_ns, {"reason": "no pull detected"})]
            return events

        release_due = self.adhered_ns + int(self.cfg.release_delay_s * 1e9)
        if self.release_ns is None and now_ns >= release_due:
            self.release_ns = now_ns
            events.append(HammerEvent("magnet_off", now_ns))

        if impact_ns is not None:
            self.done = True
            events.append(
                HammerEvent(
                    "recording_window",
                    impact_ns,
                    {
                        "start_ns": impact_ns - int(self.cfg.record_pre_s * 1e9),
                        "end_ns": impact_ns + int(self.cfg.record_post_s * 1e9),
                    },
                )
            )
        elif self.release_ns is not None and now_ns - self.release_ns >= timeout_ns:
            self.done = True
            events.append(HammerEvent("audio_failed", now_ns, {"reason": "no impact detected"}))
        return events
