"""Load-cell force path: counts conversion and gravity compensation.

The pressing force reported to the operator is the raw load-cell reading
minus the weight component of the tactile assembly along the pressing axis,
so the display stays zeroed as the device tilts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CalibrationError, ValidationError
from ..geometry import GRAVITY_M_S2, SENSOR_AXIS
from ..records import AccelPose


@dataclass
class ForceCalibration:
    scale_n_per_count: float
    tare_counts: float
    m_eff_kg: float  # effective axial mass of the tactile assembly

    def validate(self) -> None:
        if self.scale_n_per_count <= 0:
            raise ValidationError("scale must be positive")
        if self.m_eff_kg < 0:
            raise ValidationError("m_eff_kg must be non-negative")


def counts_to_newtons(counts: float, calib: ForceCalibration) -> float:
    return calib.scale_n_per_count * (counts - calib.tare_counts)


def gravity_bias(pose: AccelPose, calib: ForceCalibration) -> float:
    """Weight of the tactile assembly along the pressing axis, Newtons."""

    axial = float(np.asarray(pose.gravity_dir, dtype=np.float64) @ SENSOR_AXIS)
    return calib.m_eff_kg * GRAVITY_M_S2 * axial


def contact_force(counts: float, pose: AccelPose, calib: ForceCalibration) -> float:
    """Gravity-compensated pressing force."""

    return counts_to_newtons(counts, calib) - gravity_bias(pose, calib)


def calibrate_two_pose(
    readings_horizontal: float,
    readings_vertical: float,
    scale_n_per_count: float,
) -> ForceCalibration:
    """Derive tare and effective mass from two no-contact readings.

    Horizontal = pressing axis perpendicular to gravity (pure tare);
    vertical = axis pointing straight down (tare plus full assembly weight).
    """

    if readings_vertical < readings_horizontal:
        raise CalibrationError(
            "vertical reading below horizontal reading: non-physical (check poses)"
        )
    m_eff = scale_n_per_count * (readings_vertical - readings_horizontal) / GRAVITY_M_S2
    calib = ForceCalibration(
        scale_n_per_count=scale_n_per_count,
        tare_counts=readings_horizontal,
        m_eff_kg=m_eff,
    )
    calib.validate()
    return calib
