"""Scripted user head-pose trajectories for deterministic runs.

All trajectories are functions t -> Pose (world frame, camera convention).
They share a base vantage that matches the neck's initial camera pose:
0.44 m out from the base, 0.35 m up, gazing along +x pitched 25 degrees
down at the tabletop.
"""

from __future__ import annotations

import numpy as np

from .geometry import Pose, quat_from_axis_angle, quat_mul

BASE_POSITION = np.array([0.44, 0.0, 0.35])
BASE_PITCH_DEG = 25.0

# camera frame (+z fwd, +x right, +y down) aligned to gaze along world +x
_Q_FORWARD = np.array([0.5, -0.5, 0.5, -0.5])
_X_CAM = np.array([1.0, 0.0, 0.0])
_Z_WORLD = np.array([0.0, 0.0, 1.0])


def _gaze(yaw_rad: float = 0.0, pitch_down_rad: float | None = None) -> np.ndarray:
    pitch = np.deg2rad(BASE_PITCH_DEG) if pitch_down_rad is None else pitch_down_rad
    q = quat_mul(_Q_FORWARD, quat_from_axis_angle(_X_CAM, -pitch))
    if yaw_rad != 0.0:
        q = quat_mul(quat_from_axis_angle(_Z_WORLD, yaw_rad), q)
    return q


def base_view_pose() -> Pose:
    """The shared start pose: all trajectories begin here at t=0."""
    return Pose(BASE_POSITION, _gaze())


def static(t: float) -> Pose:
    return base_view_pose()


def sine_yaw(t: float) -> Pose:
    """Head sweep: +-30 degrees of yaw at 0.25 Hz."""
    yaw = np.deg2rad(30.0) * np.sin(2.0 * np.pi * 0.25 * t)
    return Pose(BASE_POSITION, _gaze(yaw))


def step_yaw(t: float) -> Pose:
    """30 degree yaw step at t=2 s; used for coverage-recovery timing."""
    yaw = np.deg2rad(30.0) if t >= 2.0 else 0.0
    return Pose(BASE_POSITION, _gaze(yaw))


def scan_peek(t: float) -> Pose:
    """Yaw scan for 4 s, then lean in and pitch further down to peek."""
    if t < 4.0:
        yaw = np.deg2rad(40.0) * np.sin(2.0 * np.pi * t / 4.0)
        return Pose(BASE_POSITION, _gaze(yaw))
    pos = BASE_POSITION + np.array([0.05, 0.0, -0.12])
    return Pose(pos, _gaze(0.0, np.deg2rad(BASE_PITCH_DEG + 20.0)))


TRAJECTORIES = {
    "static": static,
    "sine-yaw": sine_yaw,
    "step-yaw": step_yaw,
    "scan-peek": scan_peek,
}


def make_trajectory(name: str):
    if name not in TRAJECTORIES:
        raise ValueError(f"unknown trajectory {name!r}, have {sorted(TRAJECTORIES)}")
    return TRAJECTORIES[name]
