"""On-disk dataset layout: point records, object metadata, manifest, splits.

Layout::

    <root>/manifest.json
    <root>/objects/<object_id>/meta.json
    <root>/objects/<object_id>/points/<0..5>/
        rgb.png depth.png tactile_10N.png tactile_15N.png tactile_20N.png
        audio.wav hammer.wav gains.json poses.json force_log.csv
        pointcloud.ply audio_norm.wav      (post-processing outputs)
    <root>/splits/<name>.json

Images are lossless PNG (depth as 16-bit grayscale, millimeters); audio is
32-bit float WAV; metadata is UTF-8 JSON. All writes of point directories go
through a temp directory plus rename so a killed writer never leaves a
half-written point that looks complete.
"""

from __future__ import annotations

import csv
import json
import shutil
import uuid
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.io import wavfile

from .errors import StorageError, ValidationError
from .records import (
    FORMAT_VERSION,
    POINTS_PER_OBJECT,
    AccelPose,
    AudioTake,
    Environment,
    Manifest,
    ManifestEntry,
    PointRecord,
    RgbdFrame,
    Split,
    TactileSnapshot,
)

DEFAULT_REFERENCE_GAIN_DB = 0.0

REQUIRED_POINT_FILES = (
    "rgb.png",
    "depth.png",
    "tactile_10N.png",
    "tactile_15N.png",
    "tactile_20N.png",
    "audio.wav",
    "hammer.wav",
    "gains.json",
    "poses.json",
    "force_log.csv",
)


def _tactile_filename(target_n: float) -> str:
    value = int(round(target_n))
    return f"tactile_{value}N.png"


def object_dir(root: Path, object_id: str) -> Path:
    return Path(root) / "objects" / object_id


def point_dir(root: Path, object_id: str, point_index: int) -> Path:
    return object_dir(root, object_id) / "points" / str(point_index)


# --------------------------------------------------------------------------
# low-level codecs


def _write_png_rgb(path: Path, rgb: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(rgb), mode="RGB").save(path)


def _read_png_rgb(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def _write_png_depth16(path: Path, depth_mm: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(depth_mm)).save(path)


def _read_png_depth16(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.dtype == np.int32:  # PIL may promote 16-bit grayscale to mode "I"
        arr = arr.astype(np.uint16)
    if arr.dtype != np.uint16:
        raise StorageError(f"{path.name}: expected 16-bit depth PNG, got {arr.dtype}")
    return arr


def _write_wav(path: Path, rate: int, samples: np.ndarray) -> None:
    wavfile.write(path, rate, np.ascontiguousarray(samples, dtype=np.float32))


def _read_wav(path: Path) -> tuple[int, np.ndarray]:
    rate, samples = wavfile.read(path)
    if samples.dtype != np.float32:
        raise StorageError(f"{path.name}: expected float32 WAV, got {samples.dtype}")
    return int(rate), samples


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_json(path: Path) -> dict:
    if not path.exists():
        raise StorageError(f"missing file: {path.name} (in {path.parent})")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise StorageError(f"malformed JSON in {path}: {exc}") from exc


def _require(meta: dict, key: str, path: Path):
    if key not in meta:
        raise StorageError(f"{path.name}: missing key '{key}'")
    return meta[key]


def _pose_to_json(pose: AccelPose) -> dict:
    return {
        "gravity_dir": [float(v) for v in pose.gravity_dir],
        "raw_accel": [float(v) for v in pose.raw_accel],
        "timestamp_ns": int(pose.timestamp_ns),
    }


def _pose_from_json(payload: dict, path: Path) -> AccelPose:
    return AccelPose(
        gravity_dir=np.array(_require(payload, "gravity_dir", path), dtype=np.float64),
        raw_accel=np.array(_require(payload, "raw_accel", path), dtype=np.float64),
        timestamp_ns=int(_require(payload, "timestamp_ns", path)),
    )


# --------------------------------------------------------------------------
# point records


def write_point_record(
    record: PointRecord,
    root: Path,
    reference_gain_db: float = DEFAULT_REFERENCE_GAIN_DB,
) -> Path:
    """Persist one point record under the dataset layout; returns the point dir.

    The record is validated first; the directory is staged under a temp name
    and renamed into place, replacing any previous capture of the same point.
    """

    record.validate()
    root = Path(root)
    if not root.exists():
        raise StorageError(f"dataset root does not exist: {root}")

    final_dir = point_dir(root, record.object_id, record.point_index)
    staging = final_dir.parent / f".tmp-{record.point_index}-{uuid.uuid4().hex[:8]}"
    staging.mkdir(parents=True, exist_ok=False)
    try:
        _write_png_rgb(staging / "rgb.png", record.rgbd.rgb)
        _write_png_depth16(staging / "depth.png", record.rgbd.depth)
        for snap in record.tactile:
            _write_png_rgb(staging / _tactile_filename(snap.target_force_n), snap.image)
        _write_wav(staging / "audio.wav", record.audio.sample_rate_hz, record.audio.mic_samples)
        _write_wav(staging / "hammer.wav", record.audio.sample_rate_hz, record.audio.hammer_samples)
        _dump_json(
            staging / "gains.json",
            {
                "mic_gain_db": float(record.audio.mic_gain_db),
                "hammer_gain_db": float(record.audio.hammer_gain_db),
                "reference_gain_db": float(reference_gain_db),
            },
        )
        _dump_json(staging / "poses.json", _poses_payload(record))
        with open(staging / "force_log.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp_ns", "raw_counts", "contact_force_n"])
            for ts, counts, force in record.force_log:
                writer.writerow([int(ts), repr(float(counts)), repr(float(force))])

        if final_dir.exists():
            shutil.rmtree(final_dir)
        staging.rename(final_dir)
    except OSError as exc:
        shutil.rmtree(staging, ignore_errors=True)
        raise StorageError(f"failed to write point record: {exc}") from exc
    return final_dir


def _poses_payload(record: PointRecord) -> dict:
    tactile = sorted(record.tactile, key=lambda s: s.target_force_n)
    return {
        "format_version": FORMAT_VERSION,
        "object_id": record.object_id,
        "point_index": record.point_index,
        "rgbd": {
            "timestamp_ns": int(record.rgbd.timestamp_ns),
            "center_depth_m": record.rgbd.center_depth_m,
            "pose": _pose_to_json(record.rgbd_pose),
        },
        "tactile": [
            {
                "target_force_n": float(s.target_force_n),
                "measured_force_n": float(s.measured_force_n),
                "timestamp_ns": int(s.timestamp_ns),
                "pose": _pose_to_json(s.pose),
            }
            for s in tactile
        ],
        "audio": {
            "timestamp_ns": int(record.audio.timestamp_ns),
            "sample_rate_hz": int(record.audio.sample_rate_hz),
        },
    }


def read_point_record(directory: Path) -> PointRecord:
    """Reconstruct a PointRecord from a point directory; validates invariants."""

    directory = Path(directory)
    for name in REQUIRED_POINT_FILES:
        if not (directory / name).exists():
            raise StorageError(f"missing file: {name} (in {directory})")

    poses = _load_json(directory / "poses.json")
    gains = _load_json(directory / "gains.json")

    rgb = _read_png_rgb(directory / "rgb.png")
    depth = _read_png_depth16(directory / "depth.png")
    rgbd_meta = _require(poses, "rgbd", directory / "poses.json")
    rgbd = RgbdFrame(
        rgb=rgb,
        depth=depth,
        timestamp_ns=int(rgbd_meta["timestamp_ns"]),
        center_depth_m=rgbd_meta["center_depth_m"],
    )

    tactile = []
    for entry in _require(poses, "tactile", directory / "poses.json"):
        target = float(entry["target_force_n"])
        image = _read_png_rgb(directory / _tactile_filename(target))
        tactile.append(
            TactileSnapshot(
                image=image,
                target_force_n=target,
                measured_force_n=float(entry["measured_force_n"]),
                pose=_pose_from_json(entry["pose"], directory / "poses.json"),
                timestamp_ns=int(entry["timestamp_ns"]),
            )
        )

    audio_meta = _require(poses, "audio", directory / "poses.json")
    mic_rate, mic = _read_wav(directory / "audio.wav")
    ham_rate, hammer = _read_wav(directory / "hammer.wav")
    if mic_rate != ham_rate:
        raise StorageError("audio.wav and hammer.wav sample rates differ")
    audio = AudioTake(
        mic_samples=mic,
        hammer_samples=hammer,
        sample_rate_hz=mic_rate,
        mic_gain_db=float(_require(gains, "mic_gain_db", directory / "gains.json")),
        hammer_gain_db=float(_require(gains, "hammer_gain_db", directory / "gains.json")),
        timestamp_ns=int(audio_meta["timestamp_ns"]),
    )

    force_log = []
    with open(directory / "force_log.csv", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["timestamp_ns", "raw_counts", "contact_force_n"]:
            raise StorageError(f"force_log.csv: unexpected header {header}")
        for row in reader:
            force_log.append((int(row[0]), float(row[1]), float(row[2])))

    pc_path = directory / "pointcloud.ply"
    record = PointRecord(
        object_id=str(_require(poses, "object_id", directory / "poses.json")),
        point_index=int(_require(poses, "point_index", directory / "poses.json")),
        rgbd=rgbd,
        rgbd_pose=_pose_from_json(rgbd_meta["pose"], directory / "poses.json"),
        tactile=tactile,
        audio=audio,
        pointcloud_path=pc_path if pc_path.exists() else None,
        force_log=force_log,
    )
    record.validate()
    return record


# --------------------------------------------------------------------------
# object metadata


def write_object_meta(root: Path, object_id: str, label: str, environment: Environment) -> Path:
    directory = object_dir(root, object_id)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "meta.json"
    _dump_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "object_id": object_id,
            "label": label,
            "environment": environment.value,
        },
    )
    return path


def read_object_meta(root: Path, object_id: str) -> dict:
    path = object_dir(root, object_id) / "meta.json"
    meta = _load_json(path)
    _require(meta, "object_id", path)
    env = _require(meta, "environment", path)
    try:
        meta["environment"] = Environment(env)
    except ValueError as exc:
        raise StorageError(f"{path}: unknown environment '{env}'") from exc
    return meta


# --------------------------------------------------------------------------
# manifest


def point_is_complete(directory: Path) -> bool:
    return all((directory / name).exists() for name in REQUIRED_POINT_FILES)


def build_manifest(root: Path) -> Manifest:
    """Scan a dataset tree; completeness means meta.json plus 6 complete points."""

    root = Path(root)
    if not root.exists():
        raise StorageError(f"dataset root does not exist: {root}")
    objects_root = root / "objects"
    entries: list[ManifestEntry] = []
    seen: dict[str, Path] = {}
    if objects_root.exists():
        for obj_dir in sorted(p for p in objects_root.iterdir() if p.is_dir()):
            environment = None
            object_id = obj_dir.name
            try:
                meta = read_object_meta(root, obj_dir.name)
                object_id = str(meta["object_id"])
                environment = meta["environment"]
                has_meta = True
            except StorageError:
                has_meta = False
            if object_id in seen:
                raise ValidationError(
                    f"duplicate object_id '{object_id}' ({seen[object_id].name} and {obj_dir.name})"
                )
            seen[object_id] = obj_dir
            complete = has_meta and all(
                point_is_complete(obj_dir / "points" / str(k)) for k in range(POINTS_PER_OBJECT)
            )
            entries.append(ManifestEntry(object_id=object_id, environment=environment, complete=complete))
    manifest = Manifest(dataset_root=root, objects=entries)
    manifest.validate()
    return manifest


def save_manifest(manifest: Manifest) -> Path:
    path = Path(manifest.dataset_root) / "manifest.json"
    _dump_json(
        path,
        {
            "format_version": manifest.format_version,
            "objects": [
                {
                    "object_id": e.object_id,
                    "environment": e.environment.value if e.environment else None,
                    "complete": e.complete,
                }
                for e in manifest.objects
            ],
        },
    )
    return path


def load_manifest(root: Path) -> Manifest:
    root = Path(root)
    payload = _load_json(root / "manifest.json")
    entries = [
        ManifestEntry(
            object_id=o["object_id"],
            environment=Environment(o["environment"]) if o.get("environment") else None,
            complete=bool(o["complete"]),
        )
        for o in _require(payload, "objects", root / "manifest.json")
    ]
    manifest = Manifest(dataset_root=root, objects=entries, format_version=int(payload["format_version"]))
    manifest.validate()
    return manifest


# --------------------------------------------------------------------------
# splits


def split_dataset(manifest: Manifest, n_train: int, seed: int) -> Split:
    """Seeded uniform shuffle of the sorted complete object ids."""

    complete = sorted(manifest.complete_ids())
    if n_train > len(complete):
        raise ValueError(f"n_train={n_train} exceeds {len(complete)} complete objects")
    if n_train < 0:
        raise ValueError("n_train must be non-negative")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(complete))
    shuffled = [complete[i] for i in order]
    split = Split(train_ids=set(shuffled[:n_train]), test_ids=set(shuffled[n_train:]), seed=seed)
    split.validate()
    return split


def save_split(root: Path, split: Split, name: str) -> Path:
    splits_dir = Path(root) / "splits"
    splits_dir.mkdir(parents=True, exist_ok=True)
    path = splits_dir / f"{name}.json"
    _dump_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "seed": split.seed,
            "train_ids": sorted(split.train_ids),
            "test_ids": sorted(split.test_ids),
        },
    )
    return path


def load_split(root: Path, name: str) -> Split:
    path = Path(root) / "splits" / f"{name}.json"
    payload = _load_json(path)
    split = Split(
        train_ids=set(_require(payload, "train_ids", path)),
        test_ids=set(_require(payload, "test_ids", path)),
        seed=int(_require(payload, "seed", path)),
    )
    split.validate()
    return split
