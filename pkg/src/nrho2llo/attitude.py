"""Quaternion attitude kinematics/dynamics, commanded-frame construction,
and the quaternion-feedback tracking torque.

Quaternion convention: {q0, q} with the frame rotation matrix
R(q) = (q0^2 - q'q) I + 2 q q' - 2 q0 [q x] taking inertial (MCI) components
to body components, and kinematics q0_dot = -w'q/2, q_dot = (q0 w + q x w)/2
for body-frame rates. Composition satisfies R(a) R(b) = R(b * a) under the
Hamilton product, so the error quaternion relating the body frame to the
commanded frame is qe = conj(qc) * q: it reduces to (+-1, 0) exactly when the
frames coincide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "AttitudeState",
    "AttitudeGains",
    "CommandedFrame",
    "quaternion_kinematics",
    "euler_dynamics",
    "commanded_frame_step",
    "error_quaternion",
    "control_torque",
    "quat_multiply",
    "quat_conj",
    "quat_to_dcm",
    "dcm_to_quat",
    "quat_from_axis_angle",
]

# ATV-class rigid body; the reference vehicle's inertia is not published, so
# this stands in and is configuration-overridable.
DEFAULT_INERTIA = np.diag([1.3e5, 2.0e5, 2.0e5])  # kg m^2


@dataclass
class AttitudeState:
    """Unit quaternion plus body angular velocity (rad/s)."""

    q0: float
    q: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        norm = np.sqrt(self.q0**2 + self.q @ self.q)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"quaternion norm {norm} violates unit constraint")

    @property
    def quat(self) -> np.ndarray:
        return np.concatenate([[self.q0], self.q])

    @staticmethod
    def identity() -> "AttitudeState":
        return AttitudeState(q0=1.0, q=np.zeros(3), omega=np.zeros(3))


@dataclass(frozen=True)
class AttitudeGains:
    """Tracking-law gains: A = a I (s^2) and B = b I (s), both positive
    definite."""

    a: float = 5000.0
    b: float = 100.0

    def __post_init__(self):
        if self.a <= 0.0 or self.b <= 0.0:
            raise ValueError("attitude gains must be positive")


@dataclass(frozen=True)
class CommandedFrame:
    """Commanded triad (rows of rot are the commanded axes in MCI), its
    quaternion, and the commanded rates obtained by differencing."""

    rot: np.ndarray          # (3,3) MCI -> commanded
    quat: np.ndarray         # (4,)
    omega: np.ndarray        # (3,) commanded body rates, commanded axes
    omega_dot: np.ndarray    # (3,)
    fallback_seed: bool = False

    @property
    def b1(self) -> np.ndarray:
        return self.rot[0]

    @property
    def b3(self) -> np.ndarray:
        return self.rot[2]


# ---------------------------------------------------------------------------
# quaternion primitives
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _quat_mult(a, b):
    out = np.empty(4)
    out[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    out[1] = a[0] * b[1] + b[0] * a[1] + a[2] * b[3] - a[3] * b[2]
    out[2] = a[0] * b[2] + b[0] * a[2] + a[3] * b[1] - a[1] * b[3]
    out[3] = a[0] * b[3] + b[0] * a[3] + a[1] * b[2] - a[2] * b[1]
    return out


@njit(cache=True, nogil=True)
def _quat_conj(q):
    out = np.empty(4)
    out[0] = q[0]
    out[1] = -q[1]
    out[2] = -q[2]
    out[3] = -q[3]
    return out


@njit(cache=True, nogil=True)
def _quat_to_dcm(q):
    q0, q1, q2, q3 = q[0], q[1], q[2], q[3]
    R = np.empty((3, 3))
    R[0, 0] = q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3
    R[0, 1] = 2.0 * (q1 * q2 + q0 * q3)
    R[0, 2] = 2.0 * (q1 * q3 - q0 * q2)
    R[1, 0] = 2.0 * (q1 * q2 - q0 * q3)
    R[1, 1] = q0 * q0 - q1 * q1 + q2 * q2 - q3 * q3
    R[1, 2] = 2.0 * (q2 * q3 + q0 * q1)
    R[2, 0] = 2.0 * (q1 * q3 + q0 * q2)
    R[2, 1] = 2.0 * (q2 * q3 - q0 * q1)
    R[2, 2] = q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3
    return R


@njit(cache=True, nogil=True)
def _dcm_to_quat(R):
    """Shepperd's method: pick the largest pivot for numerical safety."""
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    q = np.empty(4)
    if tr >= max(R[0, 0], max(R[1, 1], R[2, 2])):
        q[0] = 0.5 * np.sqrt(1.0 + tr)
        s = 0.25 / q[0]
        q[1] = s * (R[1, 2] - R[2, 1])
        q[2] = s * (R[2, 0] - R[0, 2])
        q[3] = s * (R[0, 1] - R[1, 0])
    elif R[0, 0] >= max(R[1, 1], R[2, 2]):
        q[1] = 0.5 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        s = 0.25 / q[1]
        q[0] = s * (R[1, 2] - R[2, 1])
        q[2] = s * (R[0, 1] + R[1, 0])
        q[3] = s * (R[2, 0] + R[0, 2])
    elif R[1, 1] >= R[2, 2]:
        q[2] = 0.5 * np.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2])
        s = 0.25 / q[2]
        q[0] = s * (R[2, 0] - R[0, 2])
        q[1] = s * (R[0, 1] + R[1, 0])
        q[3] = s * (R[1, 2] + R[2, 1])
    else:
        q[3] = 0.5 * np.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2])
        s = 0.25 / q[3]
        q[0] = s * (R[0, 1] - R[1, 0])
        q[1] = s * (R[2, 0] + R[0, 2])
        q[2] = s * (R[1, 2] + R[2, 1])
    return q / np.sqrt(q[0] ** 2 + q[1] ** 2 + q[2] ** 2 + q[3] ** 2)


@njit(cache=True, nogil=True)
def _quat_kinematics(q, w):
    """Rates of (q0, q) for body angular velocity w."""
    out = np.empty(4)
    out[0] = -0.5 * (w[0] * q[1] + w[1] * q[2] + w[2] * q[3])
    out[1] = 0.5 * (q[0] * w[0] + q[2] * w[2] - q[3] * w[1])
    out[2] = 0.5 * (q[0] * w[1] + q[3] * w[0] - q[1] * w[2])
    out[3] = 0.5 * (q[0] * w[2] + q[1] * w[1] - q[2] * w[0])
    return out


def quat_multiply(a, b) -> np.ndarray:
    return _quat_mult(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def quat_conj(q) -> np.ndarray:
    return _quat_conj(np.asarray(q, dtype=float))


def quat_to_dcm(q) -> np.ndarray:
    return _quat_to_dcm(np.asarray(q, dtype=float))


def dcm_to_quat(R) -> np.ndarray:
    return _dcm_to_quat(np.asarray(R, dtype=float))


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate([[np.cos(angle / 2.0)], np.sin(angle / 2.0) * axis])


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def quaternion_kinematics(att: AttitudeState) -> tuple[float, np.ndarray]:
    """Quaternion rates for the current body angular velocity."""
    rates = _quat_kinematics(att.quat, att.omega)
    return float(rates[0]), rates[1:]


def euler_dynamics(att: AttitudeState, inertia, torque_control, torque_external=None) -> np.ndarray:
    """Body angular acceleration from the rigid-body momentum balance."""
    J = np.asarray(inertia, dtype=float)
    tc = np.asarray(torque_control, dtype=float)
    mc = np.zeros(3) if torque_external is None else np.asarray(torque_external, dtype=float)
    w = att.omega
    return np.linalg.solve(J, tc + mc - np.cross(w, J @ w))


def commanded_frame_step(thrust_dir_mci, prev: CommandedFrame | None,
                         dt: float | None = None) -> CommandedFrame:
    """Advance the commanded triad to a new thrust direction.

    The first call seeds the second axis from the MCI pole; later calls seed
    it from the previous interval's third axis, which keeps the triad
    continuous as the thrust direction wanders. Near-parallel seeds fall back
    to an alternate axis (flagged in the result). Commanded rates come from
    differencing consecutive frames over dt.
    """
    b1 = np.asarray(thrust_dir_mci, dtype=float)
    norm = np.linalg.norm(b1)
    if norm == 0.0:
        raise ValueError("commanded thrust direction must be nonzero")
    b1 = b1 / norm

    seed = np.array([0.0, 0.0, 1.0]) if prev is None else prev.b3
    fallback = False
    cross = np.cross(seed, b1)
    cn = np.linalg.norm(cross)
    if cn < 1e-10:
        fallback = True
        for alt in (np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0])):
            cross = np.cross(alt, b1)
            cn = np.linalg.norm(cross)
            if cn >= 1e-10:
                break
    b2 = cross / cn
    b3 = np.cross(b1, b2)
    rot = np.vstack([b1, b2, b3])
    quat = _dcm_to_quat(rot)

    if prev is None or dt is None:
        return CommandedFrame(rot=rot, quat=quat, omega=np.zeros(3),
                              omega_dot=np.zeros(3), fallback_seed=fallback)

    if float(quat @ prev.quat) < 0.0:
        quat = -quat
    # relative rotation commanded(k-1) -> commanded(k), commanded axes
    dq = _quat_mult(_quat_conj(prev.quat), quat)
    angle = 2.0 * np.arctan2(np.linalg.norm(dq[1:]), abs(dq[0]))
    axis = dq[1:] * (np.sign(dq[0]) if dq[0] != 0 else 1.0)
    an = np.linalg.norm(axis)
    omega = (angle / dt) * (axis / an) if an > 0.0 else np.zeros(3)
    omega_dot = (omega - prev.omega) / dt
    return CommandedFrame(rot=rot, quat=quat, omega=omega,
                          omega_dot=omega_dot, fallback_seed=fallback)


def error_quaternion(current, commanded) -> np.ndarray:
    """Relative rotation commanded -> body: identity (+-1, 0) iff the frames
    coincide; R(qe) = R(q) R(qc)'."""
    q = np.asarray(current, dtype=float)
    qc = np.asarray(commanded, dtype=float)
    return _quat_mult(_quat_conj(qc), q)


@njit(cache=True, nogil=True)
def _control_torque(q, w, qc, wc, wc_dot, J, a, b, sign0, mc):
    """Tracking torque: gyroscopic feedforward, external cancelation,
    commanded-rate feedforward, rate damping, quaternion error term."""
    qe = _quat_mult(_quat_conj(qc), q)
    wd = w - wc
    Jw = J @ w
    out = np.empty(3)
    out[0] = (w[1] * Jw[2] - w[2] * Jw[1]) - mc[0]
    out[1] = (w[2] * Jw[0] - w[0] * Jw[2]) - mc[1]
    out[2] = (w[0] * Jw[1] - w[1] * Jw[0]) - mc[2]
    out += J @ wc_dot
    out -= (b / a) * (J @ wd)
    out -= (sign0 / a) * (J @ qe[1:])
    return out


def control_torque(att: AttitudeState, commanded: CommandedFrame, inertia,
                   gains: AttitudeGains, torque_external=None,
                   qe0_sign_at_start: float = 1.0) -> np.ndarray:
    """Commanded control torque (N m). The quaternion-error sign is frozen at
    the start of each tracking segment to avoid unwinding."""
    J = np.asarray(inertia, dtype=float)
    mc = np.zeros(3) if torque_external is None else np.asarray(torque_external, dtype=float)
    return _control_torque(att.quat, att.omega, commanded.quat, commanded.omega,
                           commanded.omega_dot, J, gains.a, gains.b,
                           float(np.sign(qe0_sign_at_start) or 1.0), mc)


@njit(cache=True, nogil=True)
def _attitude_rhs(q, w, ws, ws_dot, J, Jinv, W, mc):
    """Rates of (quaternion, body rates) with the reaction-wheel reaction
    torque evaluated consistently (exact momentum bookkeeping)."""
    qdot = _quat_kinematics(q, w)
    Wws = W @ ws
    Wwsd = W @ ws_dot
    Jw = J @ w
    tx = -(w[1] * (Jw[2] + Wws[2]) - w[2] * (Jw[1] + Wws[1])) - Wwsd[0] + mc[0]
    ty = -(w[2] * (Jw[0] + Wws[0]) - w[0] * (Jw[2] + Wws[2])) - Wwsd[1] + mc[1]
    tz = -(w[0] * (Jw[1] + Wws[1]) - w[1] * (Jw[0] + Wws[0])) - Wwsd[2] + mc[2]
    wdot = Jinv @ np.array([tx, ty, tz])
    return qdot, wdot
