"""Trigger engine, depth gate, and angle matching."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multisense.capture import (
    DepthGate,
    GateStatus,
    IncrementalTrigger,
    TriggerConfig,
    angle_match,
    depth_gate_check,
    trigger_snapshots,
)
from multisense.records import AccelPose, RgbdFrame


def stream_from(forces):
    return [(i * 5_000_000, float(f)) for i, f in enumerate(forces)]


def make_frame(center_mm):
    depth = np.zeros((8, 8), dtype=np.uint16)
    depth[4, 4] = center_mm
    return RgbdFrame(
        rgb=np.zeros((8, 8, 3), dtype=np.uint8),
        depth=depth,
        timestamp_ns=0,
        center_depth_m=center_mm / 1000.0 if center_mm else None,
    )


class TestTriggerSnapshots:
    def test_unit_ramp_fires_exactly_on_targets(self):
        cfg = TriggerConfig(debounce_samples=1)
        snaps = trigger_snapshots(stream_from(np.arange(0.0, 23.0, 1.0)), cfg)
        assert [(t, m) for _, t, m in snaps] == [(10.0, 10.0), (15.0, 15.0), (20.0, 20.0)]

    def test_ramp_peaking_at_17_fires_two(self):
        cfg = TriggerConfig(debounce_samples=1)
        snaps = trigger_snapshots(stream_from(np.arange(0.0, 17.5, 1.0)), cfg)
        assert [t for _, t, _ in snaps] == [10.0, 15.0]

    def test_debounce_requires_consecutive_samples(self):
        cfg = TriggerConfig(debounce_samples=3)
        # one isolated in-window spike must not fire
        snaps = trigger_snapshots(stream_from([0.0, 10.0, 0.0, 0.0, 10.0, 0.0]), cfg)
        assert snaps == []
        snaps = trigger_snapshots(stream_from([9.8, 9.9, 10.0, 10.1]), cfg)
        assert len(snaps) == 1
        assert snaps[0][1] == 10.0
        assert snaps[0][2] == 10.0  # fires on the 3rd consecutive sample

    def test_descending_force_never_refires(self):
        cfg = TriggerConfig(debounce_samples=1)
        forces = list(np.arange(0.0, 23.0, 1.0)) + list(np.arange(22.0, -1.0, -1.0))
        snaps = trigger_snapshots(stream_from(forces), cfg)
        assert [t for _, t, _ in snaps] == [10.0, 15.0, 20.0]

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_noisy_ramp_property(self, seed):
        """Every fired snapshot is in-window; at most one per target."""

        rng = np.random.default_rng(seed)
        slope = rng.uniform(0.5, 3.0)  # N/s
        n = int(22.0 / slope * 200) + 100
        t = np.arange(n) / 200.0
        forces = np.minimum(slope * t, 22.0) + rng.normal(0.0, 0.2 / 3, size=n).clip(-0.2, 0.2)
        cfg = TriggerConfig(debounce_samples=3)
        snaps = trigger_snapshots(stream_from(forces), cfg)
        targets_fired = [t for _, t, _ in snaps]
        assert len(set(targets_fired)) == len(targets_fired)
        for _, target, measured in snaps:
            assert abs(measured - target) <= cfg.window_n

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), debounce=st.integers(1, 4))
    def test_incremental_matches_batch(self, seed, debounce):
        rng = np.random.default_rng(seed)
        forces = rng.uniform(0.0, 25.0, size=300)
        cfg = TriggerConfig(debounce_samples=debounce)
        batch = trigger_snapshots(stream_from(forces), cfg)
        inc = IncrementalTrigger(cfg)
        live = []
        for ts, f in stream_from(forces):
            fired = inc.push(ts, f)
            if fired:
                live.append(fired)
        assert live == batch


class TestDepthGate:
    def test_in_range(self):
        assert depth_gate_check(make_frame(100)) is GateStatus.IN_RANGE

    def test_boundaries(self):
        assert depth_gate_check(make_frame(70)) is GateStatus.TOO_CLOSE
        assert depth_gate_check(make_frame(140)) is GateStatus.TOO_FAR
        assert depth_gate_check(make_frame(80)) is GateStatus.IN_RANGE
        assert depth_gate_check(make_frame(130)) is GateStatus.IN_RANGE

    def test_invalid_center(self):
        assert depth_gate_check(make_frame(0)) is GateStatus.INVALID

    def test_custom_gate(self):
        gate = DepthGate(min_m=0.05, max_m=0.30)
        assert depth_gate_check(make_frame(70), gate) is GateStatus.IN_RANGE


class TestAngleMatch:
    @staticmethod
    def pose(v):
        v = np.asarray(v, dtype=np.float64)
        v = v / np.linalg.norm(v)
        return AccelPose(gravity_dir=v, raw_accel=v.copy(), timestamp_ns=0)

    def test_identical_poses(self):
        ok, angle = angle_match(self.pose([0, 0, 1]), self.pose([0, 0, 1]), tol_deg=10.0)
        assert ok and angle == pytest.approx(0.0, abs=1e-9)

    def test_orthogonal(self):
        ok, angle = angle_match(self.pose([1, 0, 0]), self.pose([0, 0, 1]), tol_deg=10.0)
        assert not ok
        assert angle == pytest.approx(90.0)

    def test_five_degrees_within_ten(self):
        rad = np.radians(5.0)
        ok, angle = angle_match(
            self.pose([np.sin(rad), 0.0, np.cos(rad)]), self.pose([0, 0, 1]), tol_deg=10.0
        )
        assert ok
        assert angle == pytest.approx(5.0, abs=1e-6)
