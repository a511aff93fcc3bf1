"""Pinhole camera intrinsics and small rotation helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

GRAVITY_M_S2 = 9.80665

#: Unit pressing axis of the tactile assembly, device frame.
SENSOR_AXIS = np.array([0.0, 0.0, 1.0])

#: Gravity direction in the world frame (z up).
WORLD_GRAVITY_DIR = np.array([0.0, 0.0, -1.0])


@dataclass
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def validate(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValidationError("principal point outside the image")

    def pixel_rays(self) -> np.ndarray:
        """Camera-frame ray directions per pixel, z normalized to 1. Shape HxWx3."""

        u = np.arange(self.width, dtype=np.float64)
        v = np.arange(self.height, dtype=np.float64)
        uu, vv = np.meshgrid(u, v)
        rays = np.empty((self.height, self.width, 3))
        rays[..., 0] = (uu - self.cx) / self.fx
        rays[..., 1] = (vv - self.cy) / self.fy
        rays[..., 2] = 1.0
        return rays

    def principal_pixel(self) -> tuple[int, int]:
        """(row, col) of the pixel used for center-depth readout."""

        return self.height // 2, self.width // 2


def default_intrinsics(width: int = 160, height: int = 120, fov_x_deg: float = 60.0) -> Intrinsics:
    fx = width / (2.0 * np.tan(np.radians(fov_x_deg) / 2.0))
    return Intrinsics(fx=fx, fy=fx, cx=width / 2.0, cy=height / 2.0, width=width, height=height)


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q)
    if norm == 0:
        raise ValidationError("zero quaternion")
    return q / norm


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix for a unit quaternion (w, x, y, z)."""

    w, x, y, z = np.asarray(q, dtype=np.float64)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_axis_angle(axis, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    half = angle_rad / 2.0
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])
