"""Reaction-wheel array: actuation matrix, minimum-norm steering, and
rate/acceleration saturation.

The default array is a four-wheel pyramid with spin axes
(+-1/sqrt3, +-1/sqrt3, 1/sqrt3); any three of its wheels already span the
torque space, the fourth is redundancy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["WheelArray", "WheelState", "actuation_matrix", "steer",
           "apply_limits", "actual_torque", "PYRAMID_AXES"]

_S3 = 1.0 / np.sqrt(3.0)
PYRAMID_AXES = np.array([
    [_S3, _S3, _S3],
    [_S3, -_S3, _S3],
    [-_S3, _S3, _S3],
    [-_S3, -_S3, _S3],
])


@dataclass(frozen=True)
class WheelArray:
    """Spin axes (unit vectors, body frame), spin inertias, and the hardware
    rate/acceleration ceilings."""

    axes: np.ndarray = field(default_factory=lambda: PYRAMID_AXES.copy())  # (n,3)
    inertia: float | np.ndarray = 1.0                # kg m^2 per wheel
    rate_limit: float = np.deg2rad(9000.0)           # rad/s
    accel_limit: float = np.deg2rad(350.0)           # rad/s^2

    def __post_init__(self):
        axes = np.atleast_2d(np.asarray(self.axes, dtype=float))
        norms = np.linalg.norm(axes, axis=1)
        object.__setattr__(self, "axes", axes / norms[:, None])
        inert = np.broadcast_to(np.asarray(self.inertia, dtype=float), (axes.shape[0],)).copy()
        if np.any(inert <= 0.0):
            raise ValueError("wheel inertias must be positive")
        object.__setattr__(self, "inertia", inert)
        if self.rate_limit <= 0.0 or self.accel_limit <= 0.0:
            raise ValueError("saturation limits must be positive")

    @property
    def n_wheels(self) -> int:
        return self.axes.shape[0]


@dataclass
class WheelState:
    """Wheel rates relative to the body (rad/s)."""

    omega_s: np.ndarray

    def __post_init__(self):
        self.omega_s = np.asarray(self.omega_s, dtype=float)

    @staticmethod
    def at_rest(n: int = 4) -> "WheelState":
        return WheelState(np.zeros(n))


def actuation_matrix(array: WheelArray) -> np.ndarray:
    """Columns are spin inertia times spin axis; must be rank 3 (at least
    three non-coplanar axes), otherwise the array cannot produce torque about
    every direction."""
    w = (array.inertia[None, :] * array.axes.T)
    if np.linalg.matrix_rank(w, tol=1e-12 * np.max(np.abs(w))) < 3:
        raise ValueError("wheel spin axes are coplanar: actuation matrix rank < 3")
    return w


def steer(torque_cmd, array: WheelArray, w: np.ndarray | None = None) -> np.ndarray:
    """Minimum-norm wheel accelerations producing the commanded torque:
    the right pseudoinverse of the actuation matrix applied to -Tc."""
    if w is None:
        w = actuation_matrix(array)
    tc = np.asarray(torque_cmd, dtype=float)
    return -w.T @ np.linalg.solve(w @ w.T, tc)


def apply_limits(ws_dot, state: WheelState, array: WheelArray,
                 dt: float) -> tuple[np.ndarray, WheelState]:
    """Clip per-wheel acceleration, zero it when pushing outward against the
    rate rail, and advance the rates (clamped at the rail)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    wd = np.clip(np.asarray(ws_dot, dtype=float), -array.accel_limit, array.accel_limit)
    ws = state.omega_s
    at_hi = (ws >= array.rate_limit) & (wd > 0.0)
    at_lo = (ws <= -array.rate_limit) & (wd < 0.0)
    wd = np.where(at_hi | at_lo, 0.0, wd)
    ws_new = np.clip(ws + wd * dt, -array.rate_limit, array.rate_limit)
    # report the acceleration actually realized over the substep
    wd_real = (ws_new - ws) / dt
    return wd_real, WheelState(ws_new)


def actual_torque(array: WheelArray, state: WheelState, ws_dot,
                  body_omega) -> np.ndarray:
    """Torque delivered to the body, including the gyroscopic coupling of the
    stored wheel momentum that the steering law neglects."""
    w = actuation_matrix(array)
    wd = np.asarray(ws_dot, dtype=float)
    omega = np.asarray(body_omega, dtype=float)
    return -np.cross(omega, w @ state.omega_s) - w @ wd
