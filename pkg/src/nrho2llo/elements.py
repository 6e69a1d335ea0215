"""Orbital element sets and reference-frame machinery.

State parameterizations: classical elements (a, e, i, raan, argp, true anomaly)
and the nonsingular equinoctial set (p, l, m, n, s, q) used for propagation.
The equinoctial set is singular only for exactly retrograde equatorial orbits.

Frames: Moon-centered inertial (MCI, mean lunar equator assumed coincident
with the ecliptic), Earth-centered inertial (parent of MCI through the
obliquity rotation), the rotating Earth-Moon synodic frame, and the orbital
LVLH triad (radial, transverse, normal).

The scalar kernels at the bottom are numba-compiled and intentionally avoid
norms/comparisons that break complex arithmetic: the adjoint equations are
produced by complex-step differentiation through these same routines.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .constants import BODIES, FRAMES


@dataclass(frozen=True)
class ClassicalElements:
    """Keplerian element set. Angles in radians, lengths in the caller's
    length unit (km or DU; must be consistent with mu)."""

    a: float
    e: float
    i: float
    raan: float
    argp: float
    true_anomaly: float

    def __post_init__(self):
        if self.e < 0.0:
            raise ValueError("eccentricity must be non-negative")
        if not 0.0 <= self.i <= np.pi:
            raise ValueError("inclination must lie in [0, pi]")


@dataclass(frozen=True)
class MeeState:
    """Modified equinoctial state (p, l, m, n, s, q) plus the mass ratio.

    p is the semilatus rectum; q is the true longitude and may be stored
    unwrapped (monotone growth during propagation); wrap only at I/O
    boundaries via :func:`wrap_angle`.
    """

    p: float
    l: float
    m: float
    n: float
    s: float
    q: float
    mass_ratio: float = 1.0

    def __post_init__(self):
        if self.p <= 0.0:
            raise ValueError("semilatus rectum must be positive")
        if not 0.0 < self.mass_ratio <= 1.0:
            raise ValueError("mass ratio must lie in (0, 1]")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.p, self.l, self.m, self.n, self.s, self.q])

    @property
    def eccentricity(self) -> float:
        return float(np.hypot(self.l, self.m))

    def with_mass_ratio(self, x7: float) -> "MeeState":
        return replace(self, mass_ratio=x7)


def wrap_angle(theta: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return float((theta + np.pi) % (2.0 * np.pi) - np.pi)


# ---------------------------------------------------------------------------
# element conversions
# ---------------------------------------------------------------------------

def coe_to_mee(coe: ClassicalElements, mass_ratio: float = 1.0) -> MeeState:
    """Classical elements -> modified equinoctial elements.

    Rejects exactly retrograde equatorial orbits (i = pi), the one
    singularity of the set. The true longitude is wrapped to [-pi, pi).
    """
    if coe.i == np.pi:
        raise ValueError("equinoctial elements are singular for i = pi")
    p = coe.a * (1.0 - coe.e**2)
    if p <= 0.0:
        raise ValueError("semilatus rectum a(1 - e^2) must be positive")
    lon_peri = coe.raan + coe.argp
    t = np.tan(coe.i / 2.0)
    return MeeState(
        p=float(p),
        l=float(coe.e * np.cos(lon_peri)),
        m=float(coe.e * np.sin(lon_peri)),
        n=float(t * np.cos(coe.raan)),
        s=float(t * np.sin(coe.raan)),
        q=wrap_angle(coe.raan + coe.argp + coe.true_anomaly),
        mass_ratio=mass_ratio,
    )


def mee_to_coe(mee: MeeState) -> ClassicalElements:
    """Modified equinoctial elements -> classical elements.

    Degenerate cases follow a deterministic convention: for e = 0 the
    argument of periapsis is reported as 0 and the angle folds into the true
    anomaly; for i = 0 the RAAN is reported as 0 and folds into the argument
    of periapsis.
    """
    e = float(np.hypot(mee.l, mee.m))
    tan_half_i = float(np.hypot(mee.n, mee.s))
    a = mee.p / (1.0 - e**2)
    i = 2.0 * np.arctan(tan_half_i)

    raan = np.arctan2(mee.s, mee.n) if tan_half_i > 0.0 else 0.0
    lon_peri = np.arctan2(mee.m, mee.l) if e > 0.0 else raan
    argp = lon_peri - raan
    ta = mee.q - lon_peri
    return ClassicalElements(
        a=float(a),
        e=e,
        i=float(i),
        raan=wrap_angle(raan),
        argp=wrap_angle(argp),
        true_anomaly=wrap_angle(ta),
    )


def mee_to_cartesian(mee: MeeState, mu: float) -> tuple[np.ndarray, np.ndarray]:
    """Equinoctial state -> inertial position/velocity about the primary."""
    out = _mee_to_rv(mee.p, mee.l, mee.m, mee.n, mee.s, mee.q, mu)
    return np.array(out[:3]), np.array(out[3:])


def cartesian_to_mee(r, v, mu: float, mass_ratio: float = 1.0) -> MeeState:
    """Inertial position/velocity -> equinoctial state.

    Built directly from the angular-momentum and eccentricity vectors, so it
    stays well-conditioned for near-circular and near-equatorial orbits.
    """
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    rmag = float(np.linalg.norm(r))
    hvec = np.cross(r, v)
    hmag = float(np.linalg.norm(hvec))
    if rmag == 0.0 or hmag == 0.0:
        raise ValueError("degenerate state: zero radius or rectilinear motion")
    p = hmag**2 / mu
    evec = np.cross(v, hvec) / mu - r / rmag

    hhat = hvec / hmag
    denom = 1.0 + hhat[2]
    if denom <= 1e-12:
        raise ValueError("equinoctial elements are singular for i = pi")
    n = -hhat[1] / denom
    s = hhat[0] / denom

    # equinoctial in-plane basis
    s2 = 1.0 + n**2 + s**2
    fhat = np.array([1.0 + n**2 - s**2, 2.0 * n * s, -2.0 * s]) / s2
    ghat = np.array([2.0 * n * s, 1.0 - n**2 + s**2, 2.0 * n]) / s2

    l = float(np.dot(evec, fhat))
    m = float(np.dot(evec, ghat))

    rhat = r / rmag
    that = (rmag * v - float(np.dot(r, v)) / rmag * r) / hmag
    cos_q = rhat[0] * fhat[0] + rhat[1] * fhat[1] + rhat[2] * fhat[2]
    sin_q = rhat[0] * ghat[0] + rhat[1] * ghat[1] + rhat[2] * ghat[2]
    # that projection gives the same longitude; rhat form is the cleaner one
    q = float(np.arctan2(sin_q, cos_q))
    del that
    return MeeState(p=float(p), l=l, m=m, n=n, s=s, q=q, mass_ratio=mass_ratio)


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------

def rot1(angle: float) -> np.ndarray:
    """Elementary counterclockwise rotation about axis 1."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])


def rot3(angle: float) -> np.ndarray:
    """Elementary counterclockwise rotation about axis 3."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def mci_from_eci(obliquity: float = FRAMES.ecliptic_obliquity_rad) -> np.ndarray:
    """Rotation taking ECI components to MCI components (R1 by the ecliptic
    obliquity). MCI's third axis is the ecliptic pole."""
    return rot1(obliquity)


def eci_from_mci(obliquity: float = FRAMES.ecliptic_obliquity_rad) -> np.ndarray:
    return rot1(obliquity).T


def lvlh_basis(position, velocity) -> np.ndarray:
    """Rotation MCI -> LVLH; rows are the radial, transverse, and orbit-normal
    unit vectors resolved in MCI."""
    r = np.asarray(position, dtype=float)
    v = np.asarray(velocity, dtype=float)
    rmag = np.linalg.norm(r)
    h = np.cross(r, v)
    hmag = np.linalg.norm(h)
    if rmag == 0.0 or hmag == 0.0:
        raise ValueError("degenerate state: LVLH frame undefined")
    rhat = r / rmag
    hhat = h / hmag
    that = np.cross(hhat, rhat)
    return np.vstack([rhat, that, hhat])


def lvlh_from_angles(raan: float, inc: float, arg_latitude: float) -> np.ndarray:
    """MCI -> LVLH rotation built from the 3-1-3 chain (node, inclination,
    argument of latitude); equals :func:`lvlh_basis` for the same orbit."""
    return rot3(arg_latitude) @ rot1(inc) @ rot3(raan)


def synodic_frame(
    earth_pos, earth_vel, moon_pos, moon_vel,
    mu_earth: float = BODIES.mu_earth, mu_moon: float = BODIES.mu_moon,
) -> tuple[np.ndarray, np.ndarray]:
    """Rotation into the Earth-Moon rotating frame plus the barycenter origin.

    Rows of the returned matrix are: unit vector from Earth toward the Moon,
    the completing in-plane axis, and the Moon-orbit angular-momentum axis.
    Inputs are the two body states in any common inertial frame; the origin
    is returned in that same frame.
    """
    re = np.asarray(earth_pos, dtype=float)
    rm = np.asarray(moon_pos, dtype=float)
    ve = np.asarray(earth_vel, dtype=float)
    vm = np.asarray(moon_vel, dtype=float)
    rel = rm - re
    dist = np.linalg.norm(rel)
    if dist == 0.0:
        raise ValueError("Earth and Moon positions coincide")
    ihat = rel / dist
    hvec = np.cross(rel, vm - ve)
    hmag = np.linalg.norm(hvec)
    if hmag == 0.0:
        raise ValueError("degenerate Earth-Moon motion: no orbit normal")
    khat = hvec / hmag
    jhat = np.cross(khat, ihat)
    origin = (mu_earth * re + mu_moon * rm) / (mu_earth + mu_moon)
    return np.vstack([ihat, jhat, khat]), origin


def to_synodic(points, rotation: np.ndarray, center) -> np.ndarray:
    """Express inertial points in the synodic axes about the given center."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = (pts - np.asarray(center, dtype=float)) @ rotation.T
    return out[0] if np.asarray(points).ndim == 1 else out


# ---------------------------------------------------------------------------
# numba scalar kernels (complex-step safe: no abs/compare on possibly-complex
# quantities; norms written as sqrt of plain squares)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _mee_to_rv(p, f, g, h, k, L, mu):
    cl = np.cos(L)
    sl = np.sin(L)
    w = 1.0 + f * cl + g * sl
    r = p / w
    alpha2 = h * h - k * k
    s2 = 1.0 + h * h + k * k
    sqmup = np.sqrt(mu / p)

    rx = (r / s2) * (cl + alpha2 * cl + 2.0 * h * k * sl)
    ry = (r / s2) * (sl - alpha2 * sl + 2.0 * h * k * cl)
    rz = (2.0 * r / s2) * (h * sl - k * cl)

    vx = -(sqmup / s2) * (sl + alpha2 * sl - 2.0 * h * k * cl + g - 2.0 * f * h * k + alpha2 * g)
    vy = -(sqmup / s2) * (-cl + alpha2 * cl + 2.0 * h * k * sl - f + 2.0 * g * h * k + alpha2 * f)
    vz = (2.0 * sqmup / s2) * (h * cl + k * sl + f * h + g * k)
    return rx, ry, rz, vx, vy, vz


@njit(cache=True, nogil=True)
def _lvlh_rows(rx, ry, rz, vx, vy, vz):
    rmag = np.sqrt(rx * rx + ry * ry + rz * rz)
    hx = ry * vz - rz * vy
    hy = rz * vx - rx * vz
    hz = rx * vy - ry * vx
    hmag = np.sqrt(hx * hx + hy * hy + hz * hz)
    r1, r2, r3 = rx / rmag, ry / rmag, rz / rmag
    h1, h2, h3 = hx / hmag, hy / hmag, hz / hmag
    t1 = h2 * r3 - h3 * r2
    t2 = h3 * r1 - h1 * r3
    t3 = h1 * r2 - h2 * r1
    return r1, r2, r3, t1, t2, t3, h1, h2, h3
