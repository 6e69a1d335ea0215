"""Analytical flight-time estimate for tangential-thrust circular-to-circular
spirals, used to size the flight-time search interval.

Energy-rate argument with near-circular speed and the linear full-throttle
mass decrease gives a closed form in the difference of inverse square-root
radii; the magnitude of that difference makes the formula cover descents as
well as ascents. Plane changes are not modeled, so the estimate runs low for
three-dimensional transfers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import BODIES, PROPULSION, PropulsionParams
from .ephemeris import NrhoModel, gateway_state

__all__ = ["TofInputs", "estimate_tof", "bounds_for_search", "mean_nrho_sma"]


@dataclass(frozen=True)
class TofInputs:
    a0_km: float
    af_km: float
    mu: float = BODIES.mu_moon
    ut_max_km_s2: float = PROPULSION.ut_max_km_s2
    c_km_s: float = PROPULSION.c_km_s

    def __post_init__(self):
        if self.a0_km <= 0.0 or self.af_km <= 0.0:
            raise ValueError("circular radii must be positive")


def estimate_tof(inputs: TofInputs) -> float:
    """Spiral transfer duration in seconds."""
    dx = abs(1.0 / np.sqrt(inputs.a0_km) - 1.0 / np.sqrt(inputs.af_km))
    x = np.sqrt(inputs.mu) / inputs.c_km_s * dx
    return float(inputs.c_km_s / inputs.ut_max_km_s2 * (1.0 - np.exp(-x)))


def bounds_for_search(inputs: TofInputs, margin: float = 0.5,
                      floor_days: float = 25.0, cap_days: float = 45.0) -> tuple[float, float]:
    """Flight-time search window (seconds): the estimate widened by the
    margin, intersected with the configured caps."""
    if not 0.0 <= margin < 1.0:
        raise ValueError("margin must lie in [0, 1)")
    est = estimate_tof(inputs)
    lo, hi = est * (1.0 - margin), est * (1.0 + margin)
    lo = max(lo, floor_days * 86400.0)
    hi = min(hi, cap_days * 86400.0)
    if hi < lo:  # estimate entirely outside the caps: clamp to the nearer cap
        lo = hi = min(max(est, floor_days * 86400.0), cap_days * 86400.0)
    if margin == 0.0:
        lo = hi = est
    return float(lo), float(hi)


def mean_nrho_sma(model: NrhoModel, n_samples: int = 4001,
                  mu: float = BODIES.mu_moon) -> float:
    """Time-average of the osculating semimajor axis over one Gateway period
    (km); the departure-orbit radius fed to the spiral estimate."""
    epochs = model.epoch_ref_s + np.linspace(0.0, model.period_s, n_samples)
    a = np.empty(n_samples)
    for i, t in enumerate(epochs):
        pos, vel = gateway_state(model, t)
        r = np.linalg.norm(pos)
        v2 = float(vel @ vel)
        a[i] = 1.0 / (2.0 / r - v2 / mu)
    return float(np.trapezoid(a, epochs) / model.period_s)
