"""Synthetic objects with known ground truth, plus scenario file parsing.

A SimObject carries everything the simulated rig needs to produce sensor
readings for one object: per-point modal sound parameters, per-point
loudness, an analytic depth surface (plane or sphere), a tactile texture
seed, and a contact stiffness. All of it is plain data so tests can assert
against the exact values the rig consumed.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from ..geometry import WORLD_GRAVITY_DIR, quat_normalize, quat_to_matrix
from ..records import POINTS_PER_OBJECT, AccelPose, Environment


@dataclass
class DevicePose:
    """Device pose: unit quaternion (device frame -> world) plus position."""

    orientation: np.ndarray  # (w, x, y, z)
    position: np.ndarray  # meters

    def validate(self) -> None:
        q = np.asarray(self.orientation, dtype=np.float64)
        if q.shape != (4,):
            raise ValidationError("orientation must be a quaternion (w,x,y,z)")
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise ValidationError("orientation quaternion not normalized")

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def gravity_dir_device(self) -> np.ndarray:
        """Direction of gravity expressed in the device frame."""

        return self.rotation().T @ WORLD_GRAVITY_DIR

    def accel_pose(self, timestamp_ns: int) -> AccelPose:
        g = self.gravity_dir_device()
        return AccelPose(gravity_dir=g, raw_accel=g.copy(), timestamp_ns=timestamp_ns)

    @staticmethod
    def identity(position=(0.0, 0.0, 0.0)) -> "DevicePose":
        return DevicePose(
            orientation=np.array([1.0, 0.0, 0.0, 0.0]),
            position=np.asarray(position, dtype=np.float64),
        )

    @staticmethod
    def from_quat(q, position=(0.0, 0.0, 0.0)) -> "DevicePose":
        return DevicePose(orientation=quat_normalize(q), position=np.asarray(position, dtype=np.float64))


@dataclass
class ForceProfile:
    """Piecewise-linear applied-force schedule for a scripted press."""

    samples: list[tuple[float, float]]  # (t_s, force_n), t strictly increasing

    def validate(self) -> None:
        times = [t for t, _ in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("force profile times must be strictly increasing")
        if any(f < 0 for _, f in self.samples):
            raise ValidationError("force profile forces must be non-negative")

    def duration_s(self) -> float:
        return self.samples[-1][0] if self.samples else 0.0

    def force_at(self, t_s: float) -> float:
        if not self.samples or t_s <= self.samples[0][0]:
            return self.samples[0][1] if self.samples else 0.0
        if t_s >= self.samples[-1][0]:
            return self.samples[-1][1]
        times = np.array([t for t, _ in self.samples])
        forces = np.array([f for _, f in self.samples])
        return float(np.interp(t_s, times, forces))

    @staticmethod
    def ramp(peak_n: float, rise_s: float, hold_s: float = 0.5) -> "ForceProfile":
        return ForceProfile(samples=[(0.0, 0.0), (rise_s, peak_n), (rise_s + hold_s, peak_n)])


@dataclass
class HammerPulse:
    """Raised-cosine strike pulse on the hammer channel."""

    amplitude_n: float
    width_samples: int
    onset_sample: int = 0

    def validate(self) -> None:
        if self.amplitude_n <= 0:
            raise ValidationError("pulse amplitude must be positive")
        if self.width_samples < 2:
            raise ValidationError("pulse width must be >= 2 samples")
        if self.onset_sample < 0:
            raise ValidationError("pulse onset must be non-negative")

    def render(self, n_samples: int) -> np.ndarray:
        """Force-vs-sample signal: zeros with the raised cosine at the onset."""

        self.validate()
        if self.onset_sample + self.width_samples > n_samples:
            raise ValueError("signal too short to contain the pulse")
        out = np.zeros(n_samples, dtype=np.float64)
        i = np.arange(self.width_samples, dtype=np.float64)
        out[self.onset_sample : self.onset_sample + self.width_samples] = (
            self.amplitude_n * 0.5 * (1.0 - np.cos(2.0 * np.pi * i / self.width_samples))
        )
        return out

    def peak_sample(self) -> int:
        return self.onset_sample + self.width_samples // 2


@dataclass
class SimObject:
    """Ground-truth object consumed by the simulated rig."""

    object_id: str
    label: str
    environment: Environment
    # per probe point: list of (frequency_hz, damping_per_s, amplitude)
    modes: list[list[tuple[float, float, float]]]
    loudness_scale: list[float]
    geometry: dict  # {"kind": "plane"|"sphere", ...} in world frame
    stiffness_n_per_mm: float
    tactile_seed: int = 0

    def validate(self, sample_rate_hz: int | None = None) -> None:
        if len(self.modes) != POINTS_PER_OBJECT or len(self.loudness_scale) != POINTS_PER_OBJECT:
            raise ValidationError("modes and loudness_scale must cover all 6 points")
        for point_modes in self.modes:
            for f, d, _a in point_modes:
                if d <= 0:
                    raise ValidationError("mode damping must be positive")
                if f <= 20.0:
                    raise ValidationError("mode frequency must exceed 20 Hz")
                if sample_rate_hz is not None and f >= sample_rate_hz / 2.0:
                    raise ValidationError(f"mode frequency {f} above Nyquist")
        if self.stiffness_n_per_mm <= 0:
            raise ValidationError("stiffness must be positive")
        kind = self.geometry.get("kind")
        if kind not in ("plane", "sphere"):
            raise ValidationError(f"unknown geometry kind: {kind}")

    def point_seed(self, point: int) -> int:
        return zlib.crc32(f"{self.object_id}:{point}".encode()) ^ self.tactile_seed


@dataclass
class ScriptEntry:
    """One scripted operator action: absolute-time or phase-reactive."""

    command: str
    args: dict = field(default_factory=dict)
    at_s: float | None = None
    on_phase: str | None = None
    after_s: float = 0.0

    def validate(self) -> None:
        if (self.at_s is None) == (self.on_phase is None):
            raise ValidationError("script entry needs exactly one of at_s / on_phase")


@dataclass
class Scenario:
    """Parsed sim scenario: objects plus the scripted operator behavior."""

    name: str
    objects: list[SimObject]
    script: list[ScriptEntry]
    sample_rate_hz: int = 48000
    image_size: tuple[int, int] = (120, 160)  # (height, width)
    tactile_size: tuple[int, int] = (120, 160)
    record_pre_s: float = 0.1
    record_post_s: float = 0.5
    noise_floor: float = 1e-4
    scale_n_per_count: float = 2e-5
    tare_counts: float = 120000.0
    m_eff_kg: float = 0.05
    strike_force_n: float = 15.0
    strike_width_samples: int = 64
    double_hit: dict | None = None  # {"ratio": 0.5, "delay_s": 0.05}
    hammer_misses: bool = False
    seed: int = 0

    def validate(self) -> None:
        ids = [o.object_id for o in self.objects]
        if len(ids) != len(set(ids)):
            raise ValidationError("duplicate object ids in scenario")
        for obj in self.objects:
            obj.validate(self.sample_rate_hz)
        for entry in self.script:
            entry.validate()


def _parse_modes(raw, n_points: int) -> list[list[tuple[float, float, float]]]:
    # Either one mode list shared by all points, or one list per point.
    if raw and isinstance(raw[0], (list, tuple)) and raw[0] and isinstance(raw[0][0], (int, float)):
        shared = [tuple(map(float, m)) for m in raw]
        return [list(shared) for _ in range(n_points)]
    per_point = [[tuple(map(float, m)) for m in point] for point in raw]
    if len(per_point) != n_points:
        raise ValidationError(f"expected modes for {n_points} points, got {len(per_point)}")
    return per_point


def _parse_object(raw: dict) -> SimObject:
    loudness = raw.get("loudness_scale", 1.0)
    if isinstance(loudness, (int, float)):
        loudness = [float(loudness)] * POINTS_PER_OBJECT
    return SimObject(
        object_id=str(raw["object_id"]),
        label=str(raw.get("label", raw["object_id"])),
        environment=Environment(raw.get("environment", "workspace")),
        modes=_parse_modes(raw.get("modes", [[440.0, 8.0, 1.0]]), POINTS_PER_OBJECT),
        loudness_scale=[float(v) for v in loudness],
        geometry=dict(raw.get("geometry", {"kind": "plane", "distance_m": 0.10, "normal": [0.0, 0.0, 1.0]})),
        stiffness_n_per_mm=float(raw.get("stiffness_n_per_mm", 8.0)),
        tactile_seed=int(raw.get("tactile_seed", 0)),
    )


def _parse_script_entry(raw: dict) -> ScriptEntry:
    known = {"at_s", "on_phase", "after_s", "command"}
    entry = ScriptEntry(
        command=str(raw["command"]),
        args={k: v for k, v in raw.items() if k not in known},
        at_s=raw.get("at_s"),
        on_phase=raw.get("on_phase"),
        after_s=float(raw.get("after_s", 0.0)),
    )
    entry.validate()
    return entry


def load_scenario(path: Path | str) -> Scenario:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> Scenario:
    audio = raw.get("audio", {})
    calib = raw.get("calibration", {})
    strike = raw.get("strike", {})
    image = raw.get("image", {})
    tactile = raw.get("tactile", {})
    scenario = Scenario(
        name=str(raw.get("name", "scenario")),
        objects=[_parse_object(o) for o in raw.get("objects", [])],
        script=[_parse_script_entry(e) for e in raw.get("script", [])],
        sample_rate_hz=int(raw.get("sample_rate_hz", 48000)),
        image_size=(int(image.get("height", 120)), int(image.get("width", 160))),
        tactile_size=(int(tactile.get("height", 120)), int(tactile.get("width", 160))),
        record_pre_s=float(audio.get("record_pre_s", 0.1)),
        record_post_s=float(audio.get("record_post_s", 0.5)),
        noise_floor=float(audio.get("noise_floor", 1e-4)),
        scale_n_per_count=float(calib.get("scale_n_per_count", 2e-5)),
        tare_counts=float(calib.get("tare_counts", 120000.0)),
        m_eff_kg=float(calib.get("m_eff_kg", 0.05)),
        strike_force_n=float(strike.get("force_n", 15.0)),
        strike_width_samples=int(strike.get("width_samples", 64)),
        double_hit=strike.get("double_hit"),
        hammer_misses=bool(strike.get("hammer_misses", False)),
        seed=int(raw.get("seed", 0)),
    )
    scenario.validate()
    return scenario
