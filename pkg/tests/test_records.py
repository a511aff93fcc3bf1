"""Domain-type invariant checks."""

import numpy as np
import pytest

from multisense.errors import ValidationError
from multisense.records import (
    AccelPose,
    AudioTake,
    PointRecord,
    RgbdFrame,
    TactileSnapshot,
    records_equal,
)


def make_pose(ts=0):
    return AccelPose(
        gravity_dir=np.array([0.0, 0.0, 1.0]),
        raw_accel=np.array([0.0, 0.0, 1.0]),
        timestamp_ns=ts,
    )


def make_frame(h=8, w=8, center_mm=100):
    depth = np.zeros((h, w), dtype=np.uint16)
    depth[h // 2, w // 2] = center_mm
    return RgbdFrame(
        rgb=np.zeros((h, w, 3), dtype=np.uint8),
        depth=depth,
        timestamp_ns=0,
        center_depth_m=center_mm / 1000.0 if center_mm else None,
    )


def make_snapshot(target=10.0, measured=10.2):
    return TactileSnapshot(
        image=np.zeros((4, 4, 3), dtype=np.uint8),
        target_force_n=target,
        measured_force_n=measured,
        pose=make_pose(),
        timestamp_ns=0,
    )


def make_take(n=64):
    return AudioTake(
        mic_samples=np.zeros(n, dtype=np.float32),
        hammer_samples=np.zeros(n, dtype=np.float32),
        sample_rate_hz=48000,
        mic_gain_db=0.0,
        hammer_gain_db=0.0,
        timestamp_ns=0,
    )


def test_accel_pose_requires_unit_gravity():
    pose = make_pose()
    pose.validate()
    bad = AccelPose(np.array([0.0, 0.0, 2.0]), np.zeros(3), 0)
    with pytest.raises(ValidationError, match="unit"):
        bad.validate()


def test_rgbd_dimension_mismatch_rejected():
    frame = make_frame()
    frame.validate()
    frame.depth = np.zeros((4, 8), dtype=np.uint16)
    frame.center_depth_m = None
    with pytest.raises(ValidationError, match="dimensions"):
        frame.validate()


def test_rgbd_center_depth_must_match_map():
    frame = make_frame(center_mm=100)
    frame.center_depth_m = 0.2
    with pytest.raises(ValidationError, match="center_depth_m"):
        frame.validate()
    invalid = make_frame(center_mm=0)
    invalid.validate()
    assert invalid.center_depth_m is None


def test_tactile_window_invariant():
    make_snapshot(10.0, 10.5).validate()
    with pytest.raises(ValidationError, match="window"):
        make_snapshot(10.0, 10.6).validate()


def test_audio_channel_lengths_must_match():
    take = make_take()
    take.validate()
    take.hammer_samples = np.zeros(32, dtype=np.float32)
    with pytest.raises(ValidationError, match="sample counts"):
        take.validate()


def test_point_record_requires_all_three_targets():
    record = PointRecord(
        object_id="o",
        point_index=0,
        rgbd=make_frame(),
        rgbd_pose=make_pose(),
        tactile=[make_snapshot(10.0), make_snapshot(15.0, 15.1)],
        audio=make_take(),
    )
    with pytest.raises(ValidationError, match="tactile targets incomplete"):
        record.validate()


def test_point_index_bounds():
    record = PointRecord(
        object_id="o",
        point_index=6,
        rgbd=make_frame(),
        rgbd_pose=make_pose(),
        tactile=[make_snapshot(10.0), make_snapshot(15.0, 15.1), make_snapshot(20.0, 19.9)],
        audio=make_take(),
    )
    with pytest.raises(ValidationError, match="point_index"):
        record.validate()


def test_records_equal_detects_audio_bit_changes(sim_record):
    import dataclasses

    assert records_equal(sim_record, sim_record)
    other_audio = dataclasses.replace(
        sim_record.audio, mic_samples=sim_record.audio.mic_samples.copy()
    )
    other = dataclasses.replace(sim_record, audio=other_audio)
    assert records_equal(sim_record, other)
    other.audio.mic_samples[0] += np.float32(1e-7)
    assert not records_equal(sim_record, other)
