"""Capture session engines: force path, triggering, gating, and the FSM."""

from .forces import (
    ForceCalibration,
    calibrate_two_pose,
    contact_force,
    counts_to_newtons,
    gravity_bias,
)
from .session import (
    ArmHammer,
    AudioFailed,
    BeginTactile,
    ContactDetected,
    Event,
    Finalize,
    HammerConfig,
    HammerEvent,
    HammerReleased,
    HammerSequencer,
    ImpactCaptured,
    NextPoint,
    Phase,
    Retake,
    SessionConfig,
    SessionState,
    SnapshotRgbd,
    StartPoint,
    TargetCaptured,
    advance,
    build_point_record,
)
from .triggers import (
    DepthGate,
    GateStatus,
    IncrementalTrigger,
    TriggerConfig,
    angle_match,
    depth_gate_check,
    trigger_snapshots,
)

__all__ = [
    "ArmHammer",
    "AudioFailed",
    "BeginTactile",
    "ContactDetected",
    "DepthGate",
    "Event",
    "Finalize",
    "ForceCalibration",
    "GateStatus",
    "HammerConfig",
    "HammerEvent",
    "HammerReleased",
    "HammerSequencer",
    "ImpactCaptured",
    "IncrementalTrigger",
    "NextPoint",
    "Phase",
    "Retake",
    "SessionConfig",
    "SessionState",
    "SnapshotRgbd",
    "StartPoint",
    "TargetCaptured",
    "TriggerConfig",
    "advance",
    "angle_match",
    "build_point_record",
    "calibrate_two_pose",
    "contact_force",
    "counts_to_newtons",
    "depth_gate_check",
    "gravity_bias",
    "trigger_snapshots",
]
