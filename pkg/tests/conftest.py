import numpy as np
import pytest

from nrho2llo.constants import EPOCH_REF_S
from nrho2llo.elements import ClassicalElements, coe_to_mee


def random_state_helper(rng):
    """Random well-conditioned elliptic equinoctial state (canonical units)."""
    coe = ClassicalElements(
        a=rng.uniform(1.2, 40.0), e=rng.uniform(0.0, 0.85),
        i=rng.uniform(0.05, 3.0), raan=rng.uniform(-np.pi, np.pi),
        argp=rng.uniform(-np.pi, np.pi), true_anomaly=rng.uniform(-np.pi, np.pi))
    return coe_to_mee(coe).vector
from nrho2llo.ephemeris import (
    EphemerisSet,
    default_ephemeris_set,
    generate_cr3bp_nrho,
    synthetic_earth_table,
    synthetic_sun_table,
)


@pytest.fixture(scope="session")
def nrho():
    return generate_cr3bp_nrho()


@pytest.fixture(scope="session")
def eph(nrho) -> EphemerisSet:
    return EphemerisSet(
        earth=synthetic_earth_table(EPOCH_REF_S - 5 * 86400.0, EPOCH_REF_S + 125 * 86400.0),
        sun=synthetic_sun_table(EPOCH_REF_S - 5 * 86400.0, EPOCH_REF_S + 125 * 86400.0),
        gateway=nrho,
    )


def kepler_propagate(r0, v0, dt, mu):
    """Analytic two-body propagation via universal-variable Kepler solve
    (independent oracle used by interpolation and dynamics tests)."""
    r0 = np.asarray(r0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    r0n = np.linalg.norm(r0)
    vr0 = np.dot(r0, v0) / r0n
    alpha = 2.0 / r0n - np.dot(v0, v0) / mu  # 1/a

    x = np.sqrt(mu) * abs(alpha) * dt if alpha > 0 else np.sqrt(mu) * dt / r0n

    def stumpff(z):
        if z > 1e-8:
            sz = np.sqrt(z)
            return (sz - np.sin(sz)) / sz**3, (1 - np.cos(sz)) / z
        if z < -1e-8:
            sz = np.sqrt(-z)
            return (np.sinh(sz) - sz) / sz**3, (np.cosh(sz) - 1) / (-z)
        return 1.0 / 6.0 - z / 120.0, 0.5 - z / 24.0

    for _ in range(80):
        z = alpha * x**2
        S, C = stumpff(z)
        F = (r0n * vr0 / np.sqrt(mu) * x**2 * C + (1 - alpha * r0n) * x**3 * S
             + r0n * x - np.sqrt(mu) * dt)
        dF = (r0n * vr0 / np.sqrt(mu) * x * (1 - alpha * x**2 * S)
              + (1 - alpha * r0n) * x**2 * C + r0n)
        dx = F / dF
        x -= dx
        if abs(dx) < 1e-12 * max(1.0, abs(x)):
            break
    z = alpha * x**2
    S, C = stumpff(z)
    f = 1 - x**2 / r0n * C
    g = dt - x**3 / np.sqrt(mu) * S
    r = f * r0 + g * v0
    rn = np.linalg.norm(r)
    fdot = np.sqrt(mu) / (r0n * rn) * (alpha * x**3 * S - x)
    gdot = 1 - x**2 / rn * C
    return r, fdot * r0 + gdot * v0
