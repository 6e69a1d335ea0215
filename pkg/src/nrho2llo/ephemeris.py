"""Time-tagged MCI states of the Earth, the Sun, and the Gateway.

Two sources exist: CSV state tables (schema
``epoch_s,x_km,y_km,z_km,vx_kms,vy_kms,vz_kms``, one body per file) and, for
the Gateway, a built-in generator that differentially corrects a southern
L2 halo member of the Earth-Moon circular restricted three-body problem and
maps it into MCI through a circular Earth-Moon motion model.

The shipped default tables come from the same circular-motion model (see
``scripts/make_ephemeris_tables.py``), which keeps the Gateway trajectory and
the Earth third-body term mutually consistent.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit
from scipy.optimize import brentq

from .constants import (
    BODIES,
    CANONICAL,
    EM_DISTANCE_KM,
    EM_MASS_RATIO,
    EM_TSTAR_S,
    EPOCH_REF_S,
    SUN_EMB_DISTANCE_KM,
    SUN_YEAR_S,
    CanonicalUnits,
)
from .dynamics import DenseSolution, IntegratorSettings, _hermite_pv, propagate
from .elements import cartesian_to_mee

EPHEMERIS_HEADER = ["epoch_s", "x_km", "y_km", "z_km", "vx_kms", "vy_kms", "vz_kms"]


class EphemerisError(ValueError):
    pass


@dataclass(frozen=True)
class EphemerisTable:
    """Monotone epoch grid with per-epoch MCI position (km) and velocity
    (km/s) for one body."""

    body: str
    epochs: np.ndarray   # (n,) seconds past J2000
    pos: np.ndarray      # (n, 3) km
    vel: np.ndarray      # (n, 3) km/s

    def __post_init__(self):
        if self.epochs.shape[0] < 4:
            raise EphemerisError("ephemeris table needs at least 4 rows")
        if not np.all(np.diff(self.epochs) > 0.0):
            raise EphemerisError("ephemeris epochs must be strictly increasing")
        if not (np.all(np.isfinite(self.pos)) and np.all(np.isfinite(self.vel))):
            raise EphemerisError("ephemeris states must be finite")

    @property
    def span(self) -> tuple[float, float]:
        return float(self.epochs[0]), float(self.epochs[-1])


def load_table(path, body: str = "") -> EphemerisTable:
    """Parse and validate an ephemeris CSV. Schema violations raise with the
    offending row number (1-based, header = row 1)."""
    path = Path(path)
    if not path.exists():
        raise EphemerisError(f"ephemeris file not found: {path}")
    epochs, pos, vel = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != EPHEMERIS_HEADER:
            raise EphemerisError(
                f"{path}: bad header, expected {','.join(EPHEMERIS_HEADER)}")
        for idx, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 7:
                raise EphemerisError(f"{path}: row {idx}: expected 7 fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise EphemerisError(f"{path}: row {idx}: {exc}") from None
            if epochs and vals[0] <= epochs[-1]:
                raise EphemerisError(
                    f"{path}: row {idx}: epoch {vals[0]!r} not strictly increasing")
            epochs.append(vals[0])
            pos.append(vals[1:4])
            vel.append(vals[4:7])
    if len(epochs) < 4:
        raise EphemerisError(f"{path}: need at least 4 rows, got {len(epochs)}")
    return EphemerisTable(body or path.stem, np.array(epochs), np.array(pos), np.array(vel))


def save_table(table: EphemerisTable, path) -> None:
    """Write a table in the documented CSV schema at full precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EPHEMERIS_HEADER)
        for i in range(table.epochs.shape[0]):
            writer.writerow([repr(float(table.epochs[i]))]
                            + [repr(float(v)) for v in table.pos[i]]
                            + [repr(float(v)) for v in table.vel[i]])


def interpolate_state(table: EphemerisTable, epoch: float) -> tuple[np.ndarray, np.ndarray]:
    """Cubic Hermite interpolation using the stored velocities as the
    position derivatives; exact at grid nodes, C1 in between. No
    extrapolation: epochs outside the table span raise."""
    lo, hi = table.span
    if not lo <= epoch <= hi:
        raise EphemerisError(f"epoch {epoch} outside table span [{lo}, {hi}]")
    out = _hermite_pv(float(epoch), table.epochs, table.pos, table.vel)
    return out[:3].copy(), out[3:].copy()


# ---------------------------------------------------------------------------
# synthetic Earth / Sun tables (circular Earth-Moon + Sun motion model)
# ---------------------------------------------------------------------------

def em_phase(epoch_s: float, epoch_ref_s: float = EPOCH_REF_S) -> float:
    """Earth-Moon rotating-frame angle versus MCI at a given epoch."""
    return (epoch_s - epoch_ref_s) / EM_TSTAR_S


def synthetic_earth_table(t0_s: float, t1_s: float, step_s: float = 3600.0) -> EphemerisTable:
    """Earth state relative to the Moon for the circular Earth-Moon model."""
    epochs = np.arange(t0_s, t1_s + step_s / 2, step_s)
    th = (epochs - EPOCH_REF_S) / EM_TSTAR_S
    w = 1.0 / EM_TSTAR_S
    pos = EM_DISTANCE_KM * np.stack([-np.cos(th), -np.sin(th), np.zeros_like(th)], axis=1)
    vel = EM_DISTANCE_KM * w * np.stack([np.sin(th), -np.cos(th), np.zeros_like(th)], axis=1)
    return EphemerisTable("earth", epochs, pos, vel)


def synthetic_sun_table(t0_s: float, t1_s: float, step_s: float = 3600.0) -> EphemerisTable:
    """Sun state relative to the Moon: circular Sun-about-barycenter motion
    composed with the barycenter offset from the Moon."""
    epochs = np.arange(t0_s, t1_s + step_s / 2, step_s)
    th = (epochs - EPOCH_REF_S) / EM_TSTAR_S
    w = 1.0 / EM_TSTAR_S
    emb_pos = (1.0 - EM_MASS_RATIO) * EM_DISTANCE_KM * np.stack(
        [-np.cos(th), -np.sin(th), np.zeros_like(th)], axis=1)
    emb_vel = (1.0 - EM_MASS_RATIO) * EM_DISTANCE_KM * w * np.stack(
        [np.sin(th), -np.cos(th), np.zeros_like(th)], axis=1)
    ws = 2.0 * np.pi / SUN_YEAR_S
    ph = ws * (epochs - EPOCH_REF_S)
    sun_pos = SUN_EMB_DISTANCE_KM * np.stack([np.cos(ph), np.sin(ph), np.zeros_like(ph)], axis=1)
    sun_vel = SUN_EMB_DISTANCE_KM * ws * np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=1)
    return EphemerisTable("sun", epochs, sun_pos + emb_pos, sun_vel + emb_vel)


# ---------------------------------------------------------------------------
# CR3BP NRHO generator
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _cr3bp_rhs(t, y, p):
    mu = p[0]
    x, yy, z, vx, vy, vz = y[0], y[1], y[2], y[3], y[4], y[5]
    r1s = (x + mu) ** 2 + yy * yy + z * z
    r2s = (x - 1.0 + mu) ** 2 + yy * yy + z * z
    r13 = r1s * np.sqrt(r1s)
    r23 = r2s * np.sqrt(r2s)
    out = np.empty(6)
    out[0] = vx
    out[1] = vy
    out[2] = vz
    out[3] = 2.0 * vy + x - (1.0 - mu) * (x + mu) / r13 - mu * (x - 1.0 + mu) / r23
    out[4] = -2.0 * vx + yy - (1.0 - mu) * yy / r13 - mu * yy / r23
    out[5] = -(1.0 - mu) * z / r13 - mu * z / r23
    return out


def jacobi_constant(y, mu: float = EM_MASS_RATIO) -> float:
    """CR3BP integral of motion for a rotating-frame state."""
    x, yy, z, vx, vy, vz = np.asarray(y, dtype=float)
    r1 = np.sqrt((x + mu) ** 2 + yy**2 + z**2)
    r2 = np.sqrt((x - 1 + mu) ** 2 + yy**2 + z**2)
    return float(x**2 + yy**2 + 2 * (1 - mu) / r1 + 2 * mu / r2 - (vx**2 + vy**2 + vz**2))


_CR3BP_TOL = IntegratorSettings(rtol=1e-12, atol=1e-12, dense=True)


def _half_period_crossing(x0: float, z0: float, vy0: float, mu: float,
                          tmax: float = 4.0):
    """Propagate from the xz-plane perpendicular departure until the next
    xz-plane crossing; returns (t_cross, state_cross)."""
    y0 = np.array([x0, 0.0, z0, 0.0, vy0, 0.0])
    sol = propagate(_cr3bp_rhs, (0.0, tmax), y0, _CR3BP_TOL, args=(mu,))
    ys = sol.ys[:, 1]
    for i in range(1, ys.shape[0] - 1):
        if ys[i] == 0.0 or ys[i] * ys[i + 1] < 0.0:
            tc = brentq(lambda t: sol(t)[1], sol.ts[i], sol.ts[i + 1], xtol=1e-14)
            return tc, sol(tc)
    raise EphemerisError("no xz-plane crossing found within the search window")


def _correct_member(x0: float, z0: float, vy0: float, mu: float,
                    tol: float = 1e-11, max_iter: int = 40):
    """Single-shooting differential correction exploiting xz-plane symmetry:
    adjust (x0, vy0) at fixed z0 to null (vx, vz) at the half-period."""
    res = np.array([np.inf, np.inf])
    for _ in range(max_iter):
        th, yh = _half_period_crossing(x0, z0, vy0, mu)
        res = np.array([yh[3], yh[5]])
        if np.max(np.abs(res)) < tol:
            return x0, vy0, th
        h = 1e-8
        jac = np.empty((2, 2))
        for j, (dx, dv) in enumerate(((h, 0.0), (0.0, h))):
            _, yp = _half_period_crossing(x0 + dx, z0, vy0 + dv, mu)
            jac[:, j] = (np.array([yp[3], yp[5]]) - res) / h
        step = np.linalg.solve(jac, -res)
        damp = min(1.0, 0.02 / np.max(np.abs(step)))
        x0 += step[0] * damp
        vy0 += step[1] * damp
    raise EphemerisError(
        f"halo differential correction did not converge; last residual {res}")


def _orbit_radius_extrema(sol: DenseSolution, period: float, mu: float,
                          n_samples: int = 20001) -> tuple[float, float]:
    ts = np.linspace(0.0, period, n_samples)
    ys = sol(ts)
    r = np.sqrt((ys[:, 0] - 1 + mu) ** 2 + ys[:, 1] ** 2 + ys[:, 2] ** 2)
    out = []
    for pick in (np.argmin(r), np.argmax(r)):
        i = min(max(pick, 1), n_samples - 2)
        ta, tb, tc = ts[i - 1], ts[i], ts[i + 1]
        fa, fb, fc = r[i - 1], r[i], r[i + 1]
        denom = (ta - tb) * (ta - tc) * (tb - tc)
        a = (tc * (fb - fa) + tb * (fa - fc) + ta * (fc - fb)) / denom
        b = (tc**2 * (fa - fb) + tb**2 * (fc - fa) + ta**2 * (fb - fc)) / denom
        tv = tb if a == 0.0 else -b / (2 * a)
        yv = sol(np.clip(tv, 0.0, period))
        out.append(float(np.sqrt((yv[0] - 1 + mu) ** 2 + yv[1] ** 2 + yv[2] ** 2)))
    return out[0], out[1]


@dataclass(frozen=True)
class NrhoModel:
    """Epoch-parameterized Gateway source: either a differentially corrected
    CR3BP halo (periodic, valid at any epoch) or an ingested state table."""

    source: str                       # "cr3bp" | "table"
    period_s: float
    epoch_ref_s: float
    perilune_km: float
    apolune_km: float
    state0_rot: np.ndarray | None = None
    dense_rot: DenseSolution | None = None
    table: EphemerisTable | None = None
    mass_ratio: float = EM_MASS_RATIO

    def state_mci(self, epoch_s: float) -> tuple[np.ndarray, np.ndarray]:
        return gateway_state(self, epoch_s)


def generate_cr3bp_nrho(mass_ratio: float = EM_MASS_RATIO,
                        perilune_target_km: float = 3366.0,
                        epoch_ref_s: float = EPOCH_REF_S) -> NrhoModel:
    """Differentially correct the southern L2 near-rectilinear halo member
    whose perilune radius matches the target, anchoring the family scan at a
    near-Keplerian polar-ellipse seed and closing the last gap with a secant
    iteration on the apolune excursion parameter.
    """
    mu = mass_ratio
    # near-Keplerian seed at the apolune crossing, orbit elongated along -z
    ra = 71000.0 / EM_DISTANCE_KM
    rp0 = 3400.0 / EM_DISTANCE_KM
    a_seed = 0.5 * (ra + rp0)
    vy_seed = -np.sqrt(mu * (2.0 / ra - 1.0 / a_seed))

    def member(z0, x0g, vyg):
        x0, vy0, th = _correct_member(x0g, z0, vyg, mu)
        sol = propagate(_cr3bp_rhs, (0.0, 2.0 * th),
                        np.array([x0, 0.0, z0, 0.0, vy0, 0.0]), _CR3BP_TOL, args=(mu,))
        rp, rap = _orbit_radius_extrema(sol, 2.0 * th, mu)
        return dict(x0=x0, z0=z0, vy0=vy0, half=th, sol=sol,
                    rp_km=rp * EM_DISTANCE_KM, ra_km=rap * EM_DISTANCE_KM)

    m_prev = member(-ra, 1.0 - mu, vy_seed)
    m_curr = member(-ra - 0.004, m_prev["x0"], m_prev["vy0"])
    for _ in range(20):
        f_prev = m_prev["rp_km"] - perilune_target_km
        f_curr = m_curr["rp_km"] - perilune_target_km
        if abs(f_curr) < 0.5:
            break
        z_next = m_curr["z0"] - f_curr * (m_curr["z0"] - m_prev["z0"]) / (f_curr - f_prev)
        m_prev, m_curr = m_curr, member(z_next, m_curr["x0"], m_curr["vy0"])
    else:
        raise EphemerisError("perilune targeting did not converge")

    period_s = 2.0 * m_curr["half"] * EM_TSTAR_S
    return NrhoModel(
        source="cr3bp",
        period_s=float(period_s),
        epoch_ref_s=float(epoch_ref_s),
        perilune_km=float(m_curr["rp_km"]),
        apolune_km=float(m_curr["ra_km"]),
        state0_rot=np.array([m_curr["x0"], 0.0, m_curr["z0"], 0.0, m_curr["vy0"], 0.0]),
        dense_rot=m_curr["sol"],
        mass_ratio=mu,
    )


def nrho_from_table(table: EphemerisTable, period_s: float | None = None) -> NrhoModel:
    """Wrap an ingested Gateway table. Period, when not supplied, is taken
    from the spacing of successive radial minima."""
    r = np.linalg.norm(table.pos, axis=1)
    if period_s is None:
        minima = [i for i in range(1, len(r) - 1) if r[i] < r[i - 1] and r[i] <= r[i + 1]]
        period_s = float(np.mean(np.diff(table.epochs[minima]))) if len(minima) >= 2 else float("nan")
    return NrhoModel(
        source="table",
        period_s=float(period_s),
        epoch_ref_s=float(table.epochs[0]),
        perilune_km=float(r.min()),
        apolune_km=float(r.max()),
        table=table,
    )


def gateway_state(model: NrhoModel, epoch_s: float) -> tuple[np.ndarray, np.ndarray]:
    """Gateway MCI state at an epoch. Table sources interpolate (and refuse
    epochs outside the span); the periodic CR3BP source accepts any epoch and
    maps the rotating-frame state through the circular Earth-Moon model."""
    if model.source == "table":
        return interpolate_state(model.table, epoch_s)
    tau = ((epoch_s - model.epoch_ref_s) / EM_TSTAR_S) % (model.period_s / EM_TSTAR_S)
    y = model.dense_rot(tau)
    mu = model.mass_ratio
    d = np.array([y[0] - (1.0 - mu), y[1], y[2]])
    v_in = np.array([y[3] - d[1], y[4] + d[0], y[5]])
    th = em_phase(epoch_s, model.epoch_ref_s)
    c, s = np.cos(th), np.sin(th)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return rot @ d * EM_DISTANCE_KM, rot @ v_in * (EM_DISTANCE_KM / EM_TSTAR_S)


def gateway_mee(model: NrhoModel, epoch_s: float, units: CanonicalUnits = CANONICAL):
    """Osculating equinoctial elements of the Gateway at an epoch, in
    canonical units."""
    pos, vel = gateway_state(model, epoch_s)
    return cartesian_to_mee(units.to_du(pos), units.to_vu(vel), 1.0)


# ---------------------------------------------------------------------------
# canonical-unit bundle consumed by the propagation kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EphemerisArrays:
    """Earth and Sun grids in canonical units (epochs TU, positions DU,
    velocities DU/TU) plus canonical gravitational parameters."""

    te: np.ndarray
    pe: np.ndarray
    ve: np.ndarray
    ts: np.ndarray
    ps: np.ndarray
    vs: np.ndarray
    mu_earth: float
    mu_sun: float

    def as_tuple(self):
        return (self.te, self.pe, self.ve, self.ts, self.ps, self.vs,
                self.mu_earth, self.mu_sun)


def canonical_arrays(earth: EphemerisTable, sun: EphemerisTable,
                     units: CanonicalUnits = CANONICAL) -> EphemerisArrays:
    mu_c = units.mu_km3_s2  # by construction mu_moon -> 1 in canonical units
    return EphemerisArrays(
        te=units.to_tu(earth.epochs),
        pe=units.to_du(earth.pos),
        ve=units.to_vu(earth.vel),
        ts=units.to_tu(sun.epochs),
        ps=units.to_du(sun.pos),
        vs=units.to_vu(sun.vel),
        mu_earth=BODIES.mu_earth / mu_c,
        mu_sun=BODIES.mu_sun / mu_c,
    )


@dataclass(frozen=True)
class EphemerisSet:
    """Everything the dynamics needs about the environment: Earth/Sun tables,
    the Gateway source, and the canonical-unit views."""

    earth: EphemerisTable
    sun: EphemerisTable
    gateway: NrhoModel
    units: CanonicalUnits = CANONICAL

    @property
    def arrays(self) -> EphemerisArrays:
        if "_arrays" not in self.__dict__:
            object.__setattr__(self, "_arrays", canonical_arrays(self.earth, self.sun, self.units))
        return self.__dict__["_arrays"]


def default_ephemeris_set(t0_s: float = EPOCH_REF_S - 5 * 86400.0,
                          t1_s: float = EPOCH_REF_S + 125 * 86400.0,
                          perilune_target_km: float = 3366.0) -> EphemerisSet:
    """Self-consistent default environment: synthetic Earth/Sun tables plus
    the CR3BP-generated NRHO, all phased to the same reference epoch."""
    return EphemerisSet(
        earth=synthetic_earth_table(t0_s, t1_s),
        sun=synthetic_sun_table(t0_s, t1_s),
        gateway=generate_cr3bp_nrho(perilune_target_km=perilune_target_km),
    )
