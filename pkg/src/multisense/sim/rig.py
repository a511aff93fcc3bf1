"""Deterministic simulated sensor rig.

Pure render functions (RGBD, tactile, load cell) plus a stepped rig that
plays scripted operator behavior and emits timestamped sensor readings at
configured rates. Everything is a deterministic function of (scenario,
commands, clock); the rig is the oracle behind the physics-adjacent tests.
"""

from __future__ import annotations

import colorsys
import zlib
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..errors import ValidationError
from ..geometry import GRAVITY_M_S2, SENSOR_AXIS, Intrinsics, default_intrinsics
from ..records import AudioTake, RgbdFrame
from .acoustics import synth_impact
from .objects import DevicePose, ForceProfile, HammerPulse, Scenario, SimObject

#: RealSense-style minimum depth; closer readings are flagged invalid (0).
MIN_DEPTH_M = 0.07

#: Seconds from the operator pull until the hammer adheres to the magnet.
ADHERE_DELAY_S = 0.02

#: Seconds of hammer flight between magnet-off and impact.
FLIGHT_TIME_S = 0.05


# --------------------------------------------------------------------------
# pure sensor models


def render_depth_m(obj: SimObject, pose: DevicePose, intr: Intrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Ray-cast the object's surface. Returns (z-depth meters, hit mask)."""

    pose.validate()
    rays_c = intr.pixel_rays()  # HxWx3, z == 1
    rotation = pose.rotation()
    rays_w = rays_c @ rotation.T
    origin = np.asarray(pose.position, dtype=np.float64)

    geom = obj.geometry
    if geom["kind"] == "plane":
        normal = np.asarray(geom.get("normal", [0.0, 0.0, 1.0]), dtype=np.float64)
        normal = normal / np.linalg.norm(normal)
        # plane through the point `distance_m` along +z world
        p0 = np.array([0.0, 0.0, geom["distance_m"]])
        denom = rays_w @ normal
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((p0 - origin) @ normal) / denom
        hit = (np.abs(denom) > 1e-9) & (t > 0)
    elif geom["kind"] == "sphere":
        center = np.asarray(geom["center_m"], dtype=np.float64)
        radius = float(geom["radius_m"])
        oc = origin - center
        a = np.sum(rays_w * rays_w, axis=-1)
        b = 2.0 * (rays_w @ oc)
        c = float(oc @ oc) - radius * radius
        disc = b * b - 4.0 * a * c
        hit = disc >= 0
        sqrt_disc = np.sqrt(np.where(hit, disc, 0.0))
        t = (-b - sqrt_disc) / (2.0 * a)
        hit = hit & (t > 0)
    else:
        raise ValidationError(f"unknown geometry kind: {geom['kind']}")

    # ray parameter t equals camera-frame z because rays have unit z there
    depth = np.where(hit, t, 0.0)
    return depth, hit


def _object_base_color(object_id: str) -> np.ndarray:
    hue = (zlib.crc32(object_id.encode()) % 360) / 360.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.65, 0.9)
    return np.array([r, g, b])


def render_rgbd(
    obj: SimObject,
    pose: DevicePose,
    intr: Intrinsics | None = None,
    timestamp_ns: int = 0,
    min_depth_m: float = MIN_DEPTH_M,
) -> RgbdFrame:
    """Deterministic RGBD render of the object's analytic surface.

    Depth is 16-bit millimeters with 0 marking invalid pixels, including
    anything closer than the camera's minimum sensing distance.
    """

    intr = intr or default_intrinsics()
    depth_m, hit = render_depth_m(obj, pose, intr)
    valid = hit & (depth_m >= min_depth_m) & (depth_m * 1000.0 <= 65535.0)
    depth_mm = np.where(valid, np.round(depth_m * 1000.0), 0.0).astype(np.uint16)

    base = _object_base_color(obj.object_id)
    brightness = np.clip(1.0 - (depth_m - 0.06) * 4.0, 0.15, 1.0)
    rgb = np.zeros((intr.height, intr.width, 3), dtype=np.float64)
    rgb[hit] = base[None, :] * brightness[hit, None]

    # background: plain gradient, shifted deterministically by the pose
    vv = np.linspace(0.10, 0.25, intr.height)[:, None]
    shift = (int(round(float(np.sum(pose.position)) * 1000.0)) % 17) / 255.0
    bg = np.repeat(vv, intr.width, axis=1) + shift
    for ch in range(3):
        rgb[~hit, ch] = bg[~hit]

    rgb8 = np.clip(rgb * 255.0, 0, 255).astype(np.uint8)
    return RgbdFrame(
        rgb=rgb8,
        depth=depth_mm,
        timestamp_ns=timestamp_ns,
        center_depth_m=RgbdFrame.center_depth_from_map(depth_mm),
    )


def object_hit_mask(obj: SimObject, pose: DevicePose, intr: Intrinsics) -> np.ndarray:
    """Ground-truth object mask for the current view (oracle for segmentation)."""

    _, hit = render_depth_m(obj, pose, intr)
    return hit


#: Indentation (mm) at which the contact patch reaches the full gel radius.
FULL_CONTACT_INDENT_MM = 2.0

_GEL_COLOR = np.array([38, 52, 84], dtype=np.float64)


def tactile_blank(size: tuple[int, int] = (120, 160)) -> np.ndarray:
    """The no-contact gel image (fixed sensor background)."""

    h, w = size
    img = np.empty((h, w, 3), dtype=np.float64)
    img[:] = _GEL_COLOR
    vv = np.arange(h)[:, None] / max(h - 1, 1)
    img[..., 2] += vv * 18.0
    return np.clip(img, 0, 255).astype(np.uint8)


def tactile_image(
    obj: SimObject,
    point: int,
    force_n: float,
    pose: DevicePose,
    size: tuple[int, int] = (120, 160),
) -> np.ndarray:
    """Deterministic tactile image; contact patch area grows with force.

    The patch radius follows indentation (force / stiffness); its shading is
    the point's procedural height texture, and the device tilt shifts the
    patch center, reproducing the force/angle dependence of the real sensor.
    """

    if not 0 <= point < len(obj.modes):
        raise ValueError(f"unknown point index {point}")
    if force_n < 0:
        raise ValueError("force must be non-negative")
    img = tactile_blank(size).astype(np.float64)
    h, w = size
    if force_n == 0:
        return img.astype(np.uint8)

    indent_mm = force_n / obj.stiffness_n_per_mm
    max_radius = 0.48 * min(h, w)
    radius = max_radius * min(np.sqrt(indent_mm / FULL_CONTACT_INDENT_MM), 1.0)

    gravity = pose.gravity_dir_device()
    cx = w / 2.0 + gravity[0] * 0.08 * w
    cy = h / 2.0 + gravity[1] * 0.08 * h

    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    rr = np.hypot(xx - cx, yy - cy)
    patch = rr <= radius

    rng = np.random.default_rng(obj.point_seed(point))
    n_bumps = 3
    phase = rng.uniform(0, 2 * np.pi, size=(n_bumps, 2))
    freq = rng.uniform(0.02, 0.08, size=(n_bumps, 2))
    texture = np.zeros((h, w))
    for k in range(n_bumps):
        texture += np.sin(xx * freq[k, 0] * 2 * np.pi + phase[k, 0]) * np.sin(
            yy * freq[k, 1] * 2 * np.pi + phase[k, 1]
        )
    texture /= n_bumps

    # pressure shading: brightest at the patch center, modulated by texture
    with np.errstate(invalid="ignore"):
        dome = np.sqrt(np.clip(1.0 - (rr / max(radius, 1e-9)) ** 2, 0.0, 1.0))
    lift = 120.0 * dome + 45.0 * texture * dome
    for ch, gain in enumerate((1.0, 0.85, 0.6)):
        img[..., ch] += np.where(patch, lift * gain, 0.0)
    return np.clip(img, 0, 255).astype(np.uint8)


def tactile_contact_area(
    obj: SimObject,
    point: int,
    force_n: float,
    pose: DevicePose,
    size: tuple[int, int] = (120, 160),
) -> int:
    """Pixels that differ from the blank gel image (contact patch size)."""

    img = tactile_image(obj, point, force_n, pose, size)
    blank = tactile_blank(size)
    return int(np.count_nonzero(np.any(img != blank, axis=-1)))


def load_cell_counts(
    contact_force_n: float,
    pose: DevicePose,
    scale_n_per_count: float,
    tare_counts: float,
    m_eff_kg: float,
) -> float:
    """Inverse force model: raw counts for a given contact force and pose.

    counts = tare + (F + m_eff * g * axial) / scale, with axial the gravity
    component along the sensor's pressing axis.
    """

    axial = float(pose.gravity_dir_device() @ SENSOR_AXIS)
    bias_n = m_eff_kg * GRAVITY_M_S2 * axial
    return tare_counts + (contact_force_n + bias_n) / scale_n_per_count


# --------------------------------------------------------------------------
# stepped rig


@dataclass
class Emission:
    kind: str  # force | accel | frame | hammer_adhered | impact
    timestamp_ns: int
    payload: Any = None


class SimRig:
    """Scripted-operator sensor rig stepped by a single driver.

    Commands: set_pose, select_point, press, stop_press, pull_hammer,
    magnet_off, set_gains. Readings are emitted at fixed rates (force/accel
    200 Hz, frames 30 Hz by default); impacts emit a complete AudioTake
    covering [impact - pre, impact + post].
    """

    def __init__(
        self,
        scenario: Scenario,
        object_index: int = 0,
        intr: Intrinsics | None = None,
        force_rate_hz: float = 200.0,
        frame_rate_hz: float = 30.0,
    ):
        scenario.validate()
        self.scenario = scenario
        self.object_index = object_index
        self.point_index = 0
        h, w = scenario.image_size
        self.intr = intr or default_intrinsics(width=w, height=h)
        self.clock_ns = 0
        self.pose = DevicePose.identity()
        self.mic_gain_db = 0.0
        self.hammer_gain_db = 0.0
        self._force_period_ns = int(round(1e9 / force_rate_hz))
        self._frame_period_ns = int(round(1e9 / frame_rate_hz))
        self._next_force_ns = 0
        self._next_frame_ns = 0
        self._press: tuple[int, ForceProfile] | None = None
        self._adhere_due_ns: int | None = None
        self._impact_due_ns: int | None = None
        self._take_counter = 0

    @property
    def obj(self) -> SimObject:
        return self.scenario.objects[self.object_index]

    def applied_force_n(self, at_ns: int | None = None) -> float:
        """Ground-truth contact force currently applied by the scripted press."""

        at_ns = self.clock_ns if at_ns is None else at_ns
        if self._press is None:
            return 0.0
        start_ns, profile = self._press
        if at_ns < start_ns:
            return 0.0
        return profile.force_at((at_ns - start_ns) / 1e9)

    def current_rgbd(self, timestamp_ns: int | None = None) -> RgbdFrame:
        ts = self.clock_ns if timestamp_ns is None else timestamp_ns
        return render_rgbd(self.obj, self.pose, self.intr, timestamp_ns=ts)

    def current_tactile(self, force_n: float | None = None) -> np.ndarray:
        force = self.applied_force_n() if force_n is None else force_n
        return tactile_image(self.obj, self.point_index, force, self.pose, self.scenario.tactile_size)

    def _counts(self, at_ns: int) -> float:
        s = self.scenario
        return load_cell_counts(
            self.applied_force_n(at_ns), self.pose, s.scale_n_per_count, s.tare_counts, s.m_eff_kg
        )

    def current_counts(self) -> float:
        return self._counts(self.clock_ns)

    def apply_command(self, command: str, **args) -> None:
        if command == "set_pose":
            pose = args["pose"]
            pose.validate()
            self.pose = pose
        elif command == "select_point":
            point = int(args["point"])
            if not 0 <= point < len(self.obj.modes):
                raise ValueError(f"unknown point index {point}")
            self.point_index = point
        elif command == "select_object":
            index = int(args["index"])
            if not 0 <= index < len(self.scenario.objects):
                raise ValueError(f"unknown object index {index}")
            self.object_index = index
        elif command == "press":
            profile = args["profile"]
            profile.validate()
            self._press = (self.clock_ns, profile)
        elif command == "stop_press":
            self._press = None
        elif command == "pull_hammer":
            self._adhere_due_ns = self.clock_ns + int(ADHERE_DELAY_S * 1e9)
        elif command == "magnet_off":
            if not self.scenario.hammer_misses:
                self._impact_due_ns = self.clock_ns + int(FLIGHT_TIME_S * 1e9)
        elif command == "set_gains":
            self.mic_gain_db = float(args["mic_gain_db"])
            self.hammer_gain_db = float(args["hammer_gain_db"])
        elif command == "hold":
            pass
        else:
            raise ValueError(f"unknown rig command: {command}")

    def step(self, command: str | None = None, dt_s: float = 0.005, **args) -> list[Emission]:
        """Apply an optional command, advance the clock, emit due readings."""

        if dt_s <= 0:
            raise ValueError("dt_s must be positive")
        if command is not None:
            self.apply_command(command, **args)

        target_ns = self.clock_ns + int(round(dt_s * 1e9))
        out: list[Emission] = []

        while self._next_force_ns <= target_ns:
            ts = self._next_force_ns
            out.append(Emission("force", ts, {"counts": self._counts(ts)}))
            out.append(Emission("accel", ts, self.pose.accel_pose(ts)))
            self._next_force_ns += self._force_period_ns

        while self._next_frame_ns <= target_ns:
            ts = self._next_frame_ns
            out.append(Emission("frame", ts, self.current_rgbd(timestamp_ns=ts)))
            self._next_frame_ns += self._frame_period_ns

        if self._adhere_due_ns is not None and self._adhere_due_ns <= target_ns:
            out.append(Emission("hammer_adhered", self._adhere_due_ns))
            self._adhere_due_ns = None

        if self._impact_due_ns is not None and self._impact_due_ns <= target_ns:
            out.append(Emission("impact", self._impact_due_ns, self._record_take(self._impact_due_ns)))
            self._impact_due_ns = None

        self.clock_ns = target_ns
        out.sort(key=lambda e: e.timestamp_ns)
        return out

    def _record_take(self, impact_ns: int) -> AudioTake:
        """Synthesize the recorded window around one impact, gains applied."""

        s = self.scenario
        sr = s.sample_rate_hz
        n_pre = int(round(s.record_pre_s * sr))
        n_post = int(round(s.record_post_s * sr))
        duration_s = (n_pre + n_post) / sr

        pulse = HammerPulse(
            amplitude_n=s.strike_force_n, width_samples=s.strike_width_samples, onset_sample=n_pre
        )
        mic, hammer = synth_impact(self.obj, self.point_index, pulse, sr, duration_s)

        if s.double_hit:
            delay = int(round(float(s.double_hit["delay_s"]) * sr))
            second = HammerPulse(
                amplitude_n=s.strike_force_n * float(s.double_hit["ratio"]),
                width_samples=s.strike_width_samples,
                onset_sample=n_pre + delay,
            )
            mic2, hammer2 = synth_impact(self.obj, self.point_index, second, sr, duration_s)
            mic = mic + mic2
            hammer = hammer + hammer2

        seed = zlib.crc32(f"{self.obj.object_id}:{self.point_index}:{self._take_counter}".encode())
        self._take_counter += 1
        rng = np.random.default_rng(s.seed ^ seed)
        mic = mic + rng.normal(0.0, s.noise_floor, mic.shape)
        hammer = hammer + rng.normal(0.0, s.noise_floor, hammer.shape)

        mic_rec = np.clip(mic * 10 ** (self.mic_gain_db / 20.0), -1.0, 1.0).astype(np.float32)
        ham_rec = np.clip(hammer * 10 ** (self.hammer_gain_db / 20.0), -1.0, 1.0).astype(np.float32)
        return AudioTake(
            mic_samples=mic_rec,
            hammer_samples=ham_rec,
            sample_rate_hz=sr,
            mic_gain_db=self.mic_gain_db,
            hammer_gain_db=self.hammer_gain_db,
            timestamp_ns=impact_ns - int(round(s.record_pre_s * 1e9)),
        )
