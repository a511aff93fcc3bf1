"""Domain types for captured multi-sensory records.

Every container is a plain dataclass holding numpy arrays and scalars; each
one knows how to validate its own invariants via ``validate()``. Validation
raises :class:`~multisense.errors.ValidationError` naming the offending field
so storage and capture code can surface precise diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ValidationError

FORMAT_VERSION = 1

#: Force targets (Newtons) a complete point must cover, ascending.
DEFAULT_FORCE_TARGETS = (10.0, 15.0, 20.0)

#: Half-width of the force window around each target, Newtons.
FORCE_WINDOW_N = 0.5

#: Number of probed points per complete object.
POINTS_PER_OBJECT = 6


class Environment(str, Enum):
    """The nine collection environments."""

    WORKSPACE = "workspace"
    KITCHEN = "kitchen"
    BATHROOM = "bathroom"
    HOME_OFFICE = "home_office"
    WORKSHOP = "workshop"
    BEDROOM = "bedroom"
    LAUNDRY_ROOM = "laundry_room"
    LIVING_ROOM = "living_room"
    PICNIC_TABLE = "picnic_table"


@dataclass
class AccelPose:
    """Accelerometer sample: gravity direction in the device frame."""

    gravity_dir: np.ndarray  # unit 3-vector, device frame
    raw_accel: np.ndarray  # 3-vector, g units
    timestamp_ns: int

    def validate(self) -> None:
        g = np.asarray(self.gravity_dir, dtype=np.float64)
        if g.shape != (3,):
            raise ValidationError("gravity_dir must be a 3-vector")
        norm = float(np.linalg.norm(g))
        if abs(norm - 1.0) > 1e-6:
            raise ValidationError(f"gravity_dir not unit length (|v|={norm})")
        if np.asarray(self.raw_accel).shape != (3,):
            raise ValidationError("raw_accel must be a 3-vector")


@dataclass
class RgbdFrame:
    """One RGBD snapshot: 8-bit RGB plus 16-bit depth in millimeters (0 = invalid)."""

    rgb: np.ndarray  # H x W x 3 uint8
    depth: np.ndarray  # H x W uint16, millimeters
    timestamp_ns: int
    center_depth_m: float | None  # None when the principal pixel has no depth

    def validate(self) -> None:
        rgb = np.asarray(self.rgb)
        depth = np.asarray(self.depth)
        if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
            raise ValidationError("rgb must be HxWx3 uint8")
        if depth.dtype != np.uint16:
            raise ValidationError("depth must be uint16 millimeters")
        if depth.shape != rgb.shape[:2]:
            raise ValidationError(
                f"depth dimensions {depth.shape} do not match rgb {rgb.shape[:2]}"
            )
        cy, cx = depth.shape[0] // 2, depth.shape[1] // 2
        center_mm = int(depth[cy, cx])
        if center_mm == 0:
            if self.center_depth_m is not None:
                raise ValidationError("center_depth_m must be None when center pixel is invalid")
        else:
            expected = center_mm / 1000.0
            if self.center_depth_m is None or abs(self.center_depth_m - expected) > 1e-9:
                raise ValidationError(
                    f"center_depth_m {self.center_depth_m} disagrees with depth map ({expected})"
                )

    @staticmethod
    def center_depth_from_map(depth: np.ndarray) -> float | None:
        cy, cx = depth.shape[0] // 2, depth.shape[1] // 2
        mm = int(depth[cy, cx])
        return None if mm == 0 else mm / 1000.0


@dataclass
class TactileSnapshot:
    """Tactile image captured when the pressing force hit a target level."""

    image: np.ndarray  # H x W x 3 uint8
    target_force_n: float
    measured_force_n: float
    pose: AccelPose
    timestamp_ns: int

    def validate(self) -> None:
        img = np.asarray(self.image)
        if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
            raise ValidationError("tactile image must be HxWx3 uint8")
        if abs(self.measured_force_n - self.target_force_n) > FORCE_WINDOW_N:
            raise ValidationError(
                f"measured_force_n {self.measured_force_n} outside +/-{FORCE_WINDOW_N}N "
                f"window of target {self.target_force_n}"
            )
        self.pose.validate()


@dataclass
class AudioTake:
    """Time-synchronized microphone and hammer channels for one strike.

    Samples are float32 in [-1, 1]; float32 is also the on-disk word size,
    which keeps write/read round-trips bit-exact.
    """

    mic_samples: np.ndarray  # float32, mono
    hammer_samples: np.ndarray  # float32, mono, same length
    sample_rate_hz: int
    mic_gain_db: float
    hammer_gain_db: float
    timestamp_ns: int

    def validate(self) -> None:
        mic = np.asarray(self.mic_samples)
        ham = np.asarray(self.hammer_samples)
        if mic.dtype != np.float32 or ham.dtype != np.float32:
            raise ValidationError("audio samples must be float32")
        if mic.ndim != 1 or ham.ndim != 1:
            raise ValidationError("audio samples must be mono (1-D)")
        if len(mic) != len(ham):
            raise ValidationError(
                f"mic ({len(mic)}) and hammer ({len(ham)}) sample counts differ"
            )
        if self.sample_rate_hz <= 0:
            raise ValidationError("sample_rate_hz must be positive")
        for name, samples in (("mic_samples", mic), ("hammer_samples", ham)):
            if samples.size and (np.max(samples) > 1.0 or np.min(samples) < -1.0):
                raise ValidationError(f"{name} outside [-1, 1]")


@dataclass
class PointRecord:
    """All correlated sensor readings captured at one probed object point."""

    object_id: str
    point_index: int
    rgbd: RgbdFrame
    rgbd_pose: AccelPose
    tactile: list[TactileSnapshot]
    audio: AudioTake
    pointcloud_path: Path | None = None
    # (timestamp_ns, raw_counts, contact_force_n) rows from the press
    force_log: list[tuple[int, float, float]] = field(default_factory=list)

    def validate(self) -> None:
        if not self.object_id:
            raise ValidationError("object_id must be non-empty")
        if not 0 <= self.point_index < POINTS_PER_OBJECT:
            raise ValidationError(
                f"point_index {self.point_index} outside [0, {POINTS_PER_OBJECT})"
            )
        targets = sorted(snap.target_force_n for snap in self.tactile)
        if targets != sorted(DEFAULT_FORCE_TARGETS):
            raise ValidationError(
                f"tactile targets incomplete: have {targets}, need {sorted(DEFAULT_FORCE_TARGETS)}"
            )
        self.rgbd.validate()
        self.rgbd_pose.validate()
        for snap in self.tactile:
            snap.validate()
        self.audio.validate()

    def tactile_by_target(self) -> dict[float, TactileSnapshot]:
        return {snap.target_force_n: snap for snap in self.tactile}


@dataclass
class ObjectRecord:
    """A fully captured object: metadata plus its probed points."""

    object_id: str
    label: str
    environment: Environment
    points: list[PointRecord]

    def validate(self) -> None:
        if len(self.points) != POINTS_PER_OBJECT:
            raise ValidationError(
                f"object {self.object_id} has {len(self.points)} points, "
                f"expected {POINTS_PER_OBJECT}"
            )
        seen = set()
        for point in self.points:
            if point.object_id != self.object_id:
                raise ValidationError("point object_id mismatch")
            if point.point_index in seen:
                raise ValidationError(f"duplicate point_index {point.point_index}")
            seen.add(point.point_index)
            point.validate()


@dataclass
class ManifestEntry:
    object_id: str
    environment: Environment | None
    complete: bool


@dataclass
class Manifest:
    """Index of an on-disk dataset tree."""

    dataset_root: Path
    objects: list[ManifestEntry]
    format_version: int = FORMAT_VERSION

    def complete_ids(self) -> list[str]:
        return [e.object_id for e in self.objects if e.complete]

    def validate(self) -> None:
        ids = [e.object_id for e in self.objects]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate object ids in manifest: {dupes}")


@dataclass
class Split:
    """Deterministic train/test partition over complete objects."""

    train_ids: set[str]
    test_ids: set[str]
    seed: int

    def validate(self) -> None:
        overlap = self.train_ids & self.test_ids
        if overlap:
            raise ValidationError(f"train/test overlap: {sorted(overlap)[:5]}")


def records_equal(a: PointRecord, b: PointRecord) -> bool:
    """Field-for-field equality, arrays compared bit-exactly."""

    if (a.object_id, a.point_index) != (b.object_id, b.point_index):
        return False
    if not _frames_equal(a.rgbd, b.rgbd) or not _poses_equal(a.rgbd_pose, b.rgbd_pose):
        return False
    if len(a.tactile) != len(b.tactile):
        return False
    for sa, sb in zip(
        sorted(a.tactile, key=lambda s: s.target_force_n),
        sorted(b.tactile, key=lambda s: s.target_force_n),
    ):
        if sa.target_force_n != sb.target_force_n or sa.measured_force_n != sb.measured_force_n:
            return False
        if sa.timestamp_ns != sb.timestamp_ns or not _poses_equal(sa.pose, sb.pose):
            return False
        if not np.array_equal(sa.image, sb.image):
            return False
    ta, tb = a.audio, b.audio
    if (ta.sample_rate_hz, ta.mic_gain_db, ta.hammer_gain_db, ta.timestamp_ns) != (
        tb.sample_rate_hz,
        tb.mic_gain_db,
        tb.hammer_gain_db,
        tb.timestamp_ns,
    ):
        return False
    if not np.array_equal(ta.mic_samples, tb.mic_samples):
        return False
    if not np.array_equal(ta.hammer_samples, tb.hammer_samples):
        return False
    return a.force_log == b.force_log


def _frames_equal(a: RgbdFrame, b: RgbdFrame) -> bool:
    return (
        a.timestamp_ns == b.timestamp_ns
        and a.center_depth_m == b.center_depth_m
        and np.array_equal(a.rgb, b.rgb)
        and np.array_equal(a.depth, b.depth)
    )


def _poses_equal(a: AccelPose, b: AccelPose) -> bool:
    return (
        a.timestamp_ns == b.timestamp_ns
        and np.array_equal(a.gravity_dir, b.gravity_dir)
        and np.array_equal(a.raw_accel, b.raw_accel)
    )
