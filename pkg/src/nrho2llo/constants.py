"""Physical constants, canonical units, and configuration-overridable defaults."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class BodyConstants:
    """Gravitational parameters of the relevant celestial bodies (km^3/s^2)."""

    mu_sun: float = 1.3271e11
    mu_earth: float = 3.9860e5
    mu_moon: float = 4.9028e3

    def __post_init__(self):
        for name in ("mu_sun", "mu_earth", "mu_moon"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class FrameConstants:
    """Frame-defining constants: ecliptic obliquity and lunar mean radius."""

    ecliptic_obliquity_rad: float = np.deg2rad(23.4)
    moon_radius_km: float = 1737.4


@dataclass(frozen=True)
class CanonicalUnits:
    """Canonical unit system: DU is the lunar mean equatorial radius, TU is
    chosen so that the lunar gravitational parameter is 1 DU^3/TU^2."""

    du_km: float = 1737.4
    mu_km3_s2: float = 4.9028e3

    @property
    def tu_s(self) -> float:
        return float(np.sqrt(self.du_km**3 / self.mu_km3_s2))

    @property
    def vu_km_s(self) -> float:
        return self.du_km / self.tu_s

    @property
    def acc_km_s2(self) -> float:
        return self.du_km / self.tu_s**2

    # --- SI -> canonical ---
    def to_du(self, x_km):
        return np.asarray(x_km) / self.du_km

    def to_tu(self, t_s):
        return np.asarray(t_s) / self.tu_s

    def to_vu(self, v_km_s):
        return np.asarray(v_km_s) / self.vu_km_s

    def to_acc(self, a_km_s2):
        return np.asarray(a_km_s2) / self.acc_km_s2

    # --- canonical -> SI ---
    def to_km(self, x_du):
        return np.asarray(x_du) * self.du_km

    def to_s(self, t_tu):
        return np.asarray(t_tu) * self.tu_s

    def to_km_s(self, v_vu):
        return np.asarray(v_vu) * self.vu_km_s

    def to_km_s2(self, a_cu):
        return np.asarray(a_cu) * self.acc_km_s2


@dataclass(frozen=True)
class PropulsionParams:
    """Low-thrust engine constants: thrust ceiling per unit initial mass and
    effective exhaust velocity."""

    ut_max_km_s2: float = 4.903e-7
    c_km_s: float = 30.0

    def __post_init__(self):
        if self.ut_max_km_s2 <= 0.0 or self.c_km_s <= 0.0:
            raise ValueError("propulsion constants must be positive")


BODIES = BodyConstants()
FRAMES = FrameConstants()
CANONICAL = CanonicalUnits()
PROPULSION = PropulsionParams()

# Earth-Moon circular-restricted three-body constants used by the built-in
# NRHO generator and by the synthetic ephemeris tables.
EM_DISTANCE_KM = 384400.0
EM_MASS_RATIO = BODIES.mu_moon / (BODIES.mu_earth + BODIES.mu_moon)
EM_TSTAR_S = float(np.sqrt(EM_DISTANCE_KM**3 / (BODIES.mu_earth + BODIES.mu_moon)))

SUN_EMB_DISTANCE_KM = 1.496e8
SUN_YEAR_S = 365.25 * 86400.0

# Reference epoch (seconds past J2000) at which the synthetic Earth-Moon
# phase angle is zero; chosen inside the late-May-2025 window.
EPOCH_REF_S = 8.0e8
