"""Force path: counts conversion, gravity compensation, two-pose calibration."""

import numpy as np
import pytest

from multisense.capture import (
    ForceCalibration,
    calibrate_two_pose,
    contact_force,
    counts_to_newtons,
    gravity_bias,
)
from multisense.errors import CalibrationError
from multisense.geometry import GRAVITY_M_S2, quat_from_axis_angle
from multisense.records import AccelPose
from multisense.sim import DevicePose, load_cell_counts

CALIB = ForceCalibration(scale_n_per_count=0.01, tare_counts=5000.0, m_eff_kg=0.05)


def pose_from_gravity(gravity_dir, ts=0):
    g = np.asarray(gravity_dir, dtype=np.float64)
    g = g / np.linalg.norm(g)
    return AccelPose(gravity_dir=g, raw_accel=g.copy(), timestamp_ns=ts)


class TestCountsToNewtons:
    def test_tare_reads_zero(self):
        assert counts_to_newtons(5000.0, CALIB) == 0.0

    def test_scale_example(self):
        assert counts_to_newtons(6000.0, CALIB) == pytest.approx(10.0)

    def test_identity_composition_with_sim(self):
        # zero gravity bias: m_eff = 0 on both sides
        calib = ForceCalibration(scale_n_per_count=2e-5, tare_counts=120000.0, m_eff_kg=0.0)
        pose = DevicePose.identity()
        for force in (0.0, 3.7, 10.0, 19.99):
            counts = load_cell_counts(force, pose, 2e-5, 120000.0, 0.0)
            assert counts_to_newtons(counts, calib) == pytest.approx(force, abs=1e-9)


class TestGravityBias:
    def test_axis_perpendicular_to_gravity(self):
        assert gravity_bias(pose_from_gravity([1.0, 0.0, 0.0]), CALIB) == 0.0

    def test_axis_parallel_to_gravity(self):
        bias = gravity_bias(pose_from_gravity([0.0, 0.0, 1.0]), CALIB)
        assert bias == pytest.approx(0.05 * GRAVITY_M_S2)

    def test_axis_at_60_degrees(self):
        g = [np.sin(np.radians(60.0)), 0.0, np.cos(np.radians(60.0))]
        bias = gravity_bias(pose_from_gravity(g), CALIB)
        assert bias == pytest.approx(0.05 * GRAVITY_M_S2 / 2.0, abs=1e-9)


class TestContactForce:
    def test_orientation_sweep_at_10_newtons(self):
        """Gravity compensation holds over 100 orientations to < 0.01 N."""

        rng = np.random.default_rng(42)
        errors = []
        for _ in range(100):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            angle = rng.uniform(0, 2 * np.pi)
            pose = DevicePose.from_quat(quat_from_axis_angle(axis, angle))
            counts = load_cell_counts(10.0, pose, CALIB.scale_n_per_count, CALIB.tare_counts, CALIB.m_eff_kg)
            accel = pose.accel_pose(0)
            errors.append(abs(contact_force(counts, accel, CALIB) - 10.0))
        assert max(errors) < 0.01

    def test_no_contact_any_orientation(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            pose = DevicePose.from_quat(quat_from_axis_angle(axis, rng.uniform(0, np.pi)))
            counts = load_cell_counts(0.0, pose, CALIB.scale_n_per_count, CALIB.tare_counts, CALIB.m_eff_kg)
            assert abs(contact_force(counts, pose.accel_pose(0), CALIB)) < 0.01

    def test_zero_mass_reduces_to_counts_conversion(self):
        calib = ForceCalibration(scale_n_per_count=0.01, tare_counts=5000.0, m_eff_kg=0.0)
        pose = pose_from_gravity([0.0, 0.0, 1.0])
        assert contact_force(6000.0, pose, calib) == counts_to_newtons(6000.0, calib)


class TestTwoPoseCalibration:
    def test_recovers_m_eff_from_sim(self):
        scale, tare, m_eff = 2e-5, 120000.0, 0.05
        horizontal = DevicePose.from_quat(quat_from_axis_angle([1, 0, 0], np.pi / 2))
        vertical = DevicePose.from_quat(quat_from_axis_angle([1, 0, 0], np.pi))
        r_h = load_cell_counts(0.0, horizontal, scale, tare, m_eff)
        r_v = load_cell_counts(0.0, vertical, scale, tare, m_eff)
        calib = calibrate_two_pose(r_h, r_v, scale)
        assert calib.m_eff_kg == pytest.approx(m_eff, abs=1e-6)
        assert calib.tare_counts == pytest.approx(tare, abs=1e-6)

    def test_identical_readings_mean_zero_mass(self):
        calib = calibrate_two_pose(5000.0, 5000.0, 0.01)
        assert calib.m_eff_kg == 0.0

    def test_vertical_below_horizontal_rejected(self):
        with pytest.raises(CalibrationError, match="non-physical"):
            calibrate_two_pose(5000.0, 4000.0, 0.01)
