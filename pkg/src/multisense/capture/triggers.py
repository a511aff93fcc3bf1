"""Force-target snapshot triggering, depth gating, and angle matching."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .. import kernels
from ..errors import ValidationError
from ..records import DEFAULT_FORCE_TARGETS, FORCE_WINDOW_N, AccelPose, RgbdFrame


@dataclass
class TriggerConfig:
    targets_n: tuple[float, ...] = DEFAULT_FORCE_TARGETS
    window_n: float = FORCE_WINDOW_N
    # consecutive in-window samples required before a target fires (at 200 Hz)
    debounce_samples: int = 3

    def validate(self) -> None:
        if any(b <= a for a, b in zip(self.targets_n, self.targets_n[1:])):
            raise ValidationError("targets must be strictly increasing")
        if self.window_n <= 0:
            raise ValidationError("window must be positive")
        if self.debounce_samples < 1:
            raise ValidationError("debounce must be >= 1")


def trigger_snapshots(
    force_stream,
    cfg: TriggerConfig | None = None,
) -> list[tuple[int, float, float]]:
    """Scan a time-ordered (timestamp_ns, newtons) stream for target crossings.

    Returns (timestamp_ns, target_n, measured_n) snapshots: at most one per
    target, ascending, each fired at the debounce-th consecutive in-window
    sample so a noise spike cannot trigger on its own.
    """

    cfg = cfg or TriggerConfig()
    cfg.validate()
    stream = list(force_stream)
    if not stream:
        return []
    timestamps = np.array([ts for ts, _ in stream], dtype=np.int64)
    forces = np.array([f for _, f in stream], dtype=np.float64)
    idx, target_idx = kernels.trigger_scan(
        forces, np.array(cfg.targets_n, dtype=np.float64), cfg.window_n, cfg.debounce_samples
    )
    return [
        (int(timestamps[i]), float(cfg.targets_n[j]), float(forces[i]))
        for i, j in zip(idx, target_idx)
    ]


class IncrementalTrigger:
    """Sample-at-a-time form of the trigger scan, for live streams.

    Must agree with the batch kernel; the equivalence is property-tested.
    """

    def __init__(self, cfg: TriggerConfig | None = None):
        self.cfg = cfg or TriggerConfig()
        self.cfg.validate()
        self._next_target = 0
        self._active = -1
        self._run = 0

    def reset(self) -> None:
        self._next_target = 0
        self._active = -1
        self._run = 0

    def push(self, timestamp_ns: int, force_n: float) -> tuple[int, float, float] | None:
        """Feed one sample; returns (timestamp, target, measured) when a target fires."""

        targets = self.cfg.targets_n
        if self._next_target >= len(targets):
            return None
        hit = -1
        for j in range(self._next_target, len(targets)):
            if abs(force_n - targets[j]) <= self.cfg.window_n:
                hit = j
                break
        if hit < 0:
            self._active = -1
            self._run = 0
            return None
        if hit == self._active:
            self._run += 1
        else:
            self._active = hit
            self._run = 1
        if self._run >= self.cfg.debounce_samples:
            self._next_target = hit + 1
            self._active = -1
            self._run = 0
            return (timestamp_ns, float(targets[hit]), float(force_n))
        return None


class GateStatus(Enum):
    TOO_CLOSE = "TooClose"
    IN_RANGE = "InRange"
    TOO_FAR = "TooFar"
    INVALID = "Invalid"


@dataclass
class DepthGate:
    min_m: float = 0.08
    max_m: float = 0.13

    def validate(self) -> None:
        if not 0 < self.min_m < self.max_m:
            raise ValidationError("depth gate requires 0 < min < max")


def depth_gate_check(frame: RgbdFrame, gate: DepthGate | None = None) -> GateStatus:
    """Classify the frame's center depth against the capture-range gate."""

    gate = gate or DepthGate()
    gate.validate()
    depth = frame.center_depth_m
    if depth is None:
        return GateStatus.INVALID
    if depth < gate.min_m:
        return GateStatus.TOO_CLOSE
    if depth > gate.max_m:
        return GateStatus.TOO_FAR
    return GateStatus.IN_RANGE


def angle_match(
    current: AccelPose, reference: AccelPose, tol_deg: float = 10.0
) -> tuple[bool, float]:
    """Angle between the two gravity directions; match iff within tolerance."""

    a = np.asarray(current.gravity_dir, dtype=np.float64)
    b = np.asarray(reference.gravity_dir, dtype=np.float64)
    cos = float(np.clip(a @ b, -1.0, 1.0))
    angle_deg = float(np.degrees(np.arccos(cos)))
    return angle_deg <= tol_deg, angle_deg
