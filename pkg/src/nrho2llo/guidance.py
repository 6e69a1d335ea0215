"""Lyapunov orbit feedback: drive semilatus rectum, eccentricity, and
inclination to target values with saturated low thrust.

The target-violation vector and its quadratic Lyapunov function shrink along
closed-loop trajectories whenever the commanded cancelation of the
perturbing acceleration is representable within the thrust ceiling; the
states where the feedback vector vanishes (the attracting set) are
enumerated by :func:`attracting_set_classify`, and only the target subset is
a stable equilibrium.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .dynamics import _gauss_mat
from .elements import MeeState

__all__ = [
    "TargetSet",
    "GuidanceGains",
    "GuidanceCommand",
    "violation",
    "b_vector",
    "guidance_command",
    "attracting_set_classify",
]


@dataclass(frozen=True)
class TargetSet:
    """Desired semilatus rectum (same length unit as the state), eccentricity,
    and inclination (rad)."""

    pd: float
    ed: float
    id: float

    def __post_init__(self):
        if self.pd <= 0.0:
            raise ValueError("target semilatus rectum must be positive")
        if not 0.0 <= self.ed < 1.0:
            raise ValueError("target eccentricity must lie in [0, 1)")
        if not 0.0 <= self.id <= np.pi:
            raise ValueError("target inclination must lie in [0, pi]")

    @property
    def tan2_half_i(self) -> float:
        return float(np.tan(self.id / 2.0) ** 2)


@dataclass(frozen=True)
class GuidanceGains:
    """Diagonal of the positive-definite guidance gain matrix (canonical
    units). Defaults are the flight-time-tuned values."""

    k1: float = 0.0338
    k2: float = 813.373
    k3: float = 1.286

    def __post_init__(self):
        if min(self.k1, self.k2, self.k3) <= 0.0:
            raise ValueError("gains must be positive")

    @property
    def array(self) -> np.ndarray:
        return np.array([self.k1, self.k2, self.k3])


@dataclass(frozen=True)
class GuidanceCommand:
    """Commanded thrust per unit initial mass (LVLH axes) plus diagnostics."""

    u_t: np.ndarray            # (3,) thrust/initial-mass, acceleration units
    psi: np.ndarray            # (3,) violations
    b: np.ndarray              # (3,) feedback vector
    lyapunov: float            # V = 0.5 psi' K psi
    saturated: bool
    coasting: bool = False


@njit(cache=True, nogil=True)
def _violation(y, pd, ed, tan2id):
    return (y[0] - pd,
            y[1] * y[1] + y[2] * y[2] - ed * ed,
            y[3] * y[3] + y[4] * y[4] - tan2id)


@njit(cache=True, nogil=True)
def _b_vector(y, mu, pd, ed, tan2id, k1, k2, k3):
    """Feedback vector b = G' (dPsi/dz)' K Psi (LVLH axes)."""
    p1, p2, p3 = _violation(y, pd, ed, tan2id)
    G = np.empty((5, 3))
    _gauss_mat(y, mu, G)
    w1 = k1 * p1
    w2 = 2.0 * y[1] * k2 * p2
    w3 = 2.0 * y[2] * k2 * p2
    w4 = 2.0 * y[3] * k3 * p3
    w5 = 2.0 * y[4] * k3 * p3
    b = np.empty(3)
    for j in range(3):
        b[j] = (G[0, j] * w1 + G[1, j] * w2 + G[2, j] * w3
                + G[3, j] * w4 + G[4, j] * w5)
    return b[0], b[1], b[2], p1, p2, p3


@njit(cache=True, nogil=True)
def _guidance_command(y, x7, mu, pd, ed, tan2id, k1, k2, k3,
                      ut_max, apr, apt, aph):
    """Saturated feedback law: thrust per unit initial mass anti-parallel to
    b + a_P, magnitude min(ut_max, x7 |b + a_P|)."""
    b1, b2, b3, p1, p2, p3 = _b_vector(y, mu, pd, ed, tan2id, k1, k2, k3)
    s1 = b1 + apr
    s2 = b2 + apt
    s3 = b3 + aph
    smag = np.sqrt(s1 * s1 + s2 * s2 + s3 * s3)
    if x7 * smag <= 1e-9 * ut_max:  # cancelation target below resolution: coast
        return 0.0, 0.0, 0.0, b1, b2, b3, p1, p2, p3, False
    denom = max(ut_max, x7 * smag)
    scale = -ut_max * x7 / denom
    return (scale * s1, scale * s2, scale * s3,
            b1, b2, b3, p1, p2, p3, x7 * smag >= ut_max)


def violation(state: MeeState | np.ndarray, target: TargetSet,
              gains: GuidanceGains = GuidanceGains()) -> tuple[np.ndarray, float]:
    """Target violations and the Lyapunov value V = 0.5 Psi' K Psi (zero
    exactly on the target set)."""
    y = state.vector if isinstance(state, MeeState) else np.asarray(state, dtype=float)
    psi = np.array(_violation(y, target.pd, target.ed, target.tan2_half_i))
    v = 0.5 * float(psi @ (gains.array * psi))
    return psi, v


def b_vector(state: MeeState | np.ndarray, target: TargetSet,
             gains: GuidanceGains = GuidanceGains(), mu: float = 1.0) -> np.ndarray:
    """Feedback vector built through the matrix chain (variational map times
    violation gradient times gains times violations)."""
    y = state.vector if isinstance(state, MeeState) else np.asarray(state, dtype=float)
    out = _b_vector(y, mu, target.pd, target.ed, target.tan2_half_i,
                    gains.k1, gains.k2, gains.k3)
    return np.array(out[:3])


def guidance_command(state: MeeState | np.ndarray, target: TargetSet,
                     gains: GuidanceGains, ut_max: float, a_p,
                     mass_ratio: float | None = None, mu: float = 1.0) -> GuidanceCommand:
    """Commanded thrust (per unit initial mass, LVLH axes) with saturation.

    a_p is the modeled perturbing acceleration in LVLH axes; feeding the same
    model used by the dynamics makes the cancelation exact in simulation.
    A vanishing b + a_p commands a coast and is flagged.
    """
    y = state.vector if isinstance(state, MeeState) else np.asarray(state, dtype=float)
    if mass_ratio is None:
        if not isinstance(state, MeeState):
            raise ValueError("mass_ratio required when state is a bare array")
        mass_ratio = state.mass_ratio
    if mass_ratio <= 0.0:
        raise ValueError("mass ratio must be positive")
    a_p = np.asarray(a_p, dtype=float)
    out = _guidance_command(y, mass_ratio, mu, target.pd, target.ed,
                            target.tan2_half_i, gains.k1, gains.k2, gains.k3,
                            ut_max, a_p[0], a_p[1], a_p[2])
    u = np.array(out[:3])
    b = np.array(out[3:6])
    psi = np.array(out[6:9])
    v = 0.5 * float(psi @ (gains.array * psi))
    coasting = bool(np.all(u == 0.0))
    return GuidanceCommand(u_t=u, psi=psi, b=b, lyapunov=v,
                           saturated=bool(out[9]), coasting=coasting)


def attracting_set_classify(state: MeeState | np.ndarray, target: TargetSet,
                            tol: float = 1e-9) -> str:
    """Which member of the feedback-vector null set a state belongs to:
    'target', 'equatorial-p-e', 'circular-p-i', 'circular-equatorial-p',
    'rectilinear', or 'none'."""
    y = state.vector if isinstance(state, MeeState) else np.asarray(state, dtype=float)
    if y[0] <= tol:
        return "rectilinear"
    p_ok = abs(y[0] - target.pd) <= tol * max(1.0, target.pd)
    e2 = y[1] ** 2 + y[2] ** 2
    e_on = abs(e2 - target.ed**2) <= tol
    e_zero = e2 <= tol
    i2 = y[3] ** 2 + y[4] ** 2
    i_on = abs(i2 - target.tan2_half_i) <= tol
    i_zero = i2 <= tol
    if not p_ok:
        return "none"
    if e_on and i_on:
        return "target"
    if e_zero and i_zero:
        return "circular-equatorial-p"
    if e_on and i_zero:
        return "equatorial-p-e"
    if e_zero and i_on:
        return "circular-p-i"
    return "none"
