"""Equinoctial orbit dynamics under thrust and third-body gravity, plus the
adaptive Dormand-Prince 5(4) integrator used throughout the package.

All hot-path routines are numba kernels operating on plain scalars/arrays so
the swarm search, the closed-loop simulator, and the Monte Carlo campaign can
run them inside compiled loops (and, where noted, under complex-step
differentiation for the adjoint equations).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .elements import MeeState, _lvlh_rows, _mee_to_rv

__all__ = [
    "IntegratorSettings",
    "GaussMatrix",
    "DenseSolution",
    "StiffnessError",
    "gauss_matrix",
    "third_body_accel",
    "orbit_rhs",
    "propagate",
]


@dataclass(frozen=True)
class IntegratorSettings:
    """Adaptive step control for the embedded 5(4) pair."""

    rtol: float = 1e-11
    atol: float = 1e-12
    max_step: float = np.inf
    dense: bool = True

    def __post_init__(self):
        if self.rtol <= 0.0 or self.atol <= 0.0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class GaussMatrix:
    """Variational map from LVLH acceleration to element rates: the 5x3 block
    for (p, l, m, n, s) plus the scalar normal-acceleration coefficient of the
    true-longitude equation and the Keplerian longitude rate."""

    g: np.ndarray               # (5, 3)
    q_ah_coeff: float           # multiplies a_h in the q equation
    q_kepler_rate: float        # sqrt(mu/p^3) * eta^2
    eta: float


class StiffnessError(RuntimeError):
    def __init__(self, msg, t=None, y=None):
        super().__init__(msg)
        self.t = t
        self.y = y


# ---------------------------------------------------------------------------
# Gauss variational equations
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _gauss_mat(y, mu, G):
    """Fill the 5x3 Gauss matrix for state y = (p, l, m, n, s, q); returns
    (eta, q_ah_coeff, q_kepler_rate)."""
    p, f, g, h, k, L = y[0], y[1], y[2], y[3], y[4], y[5]
    cl = np.cos(L)
    sl = np.sin(L)
    eta = 1.0 + f * cl + g * sl
    root = np.sqrt(p / mu)
    w2 = 1.0 + h * h + k * k
    hk = h * sl - k * cl

    G[0, 0] = 0.0
    G[0, 1] = root * 2.0 * p / eta
    G[0, 2] = 0.0
    G[1, 0] = root * sl
    G[1, 1] = root * ((eta + 1.0) * cl + f) / eta
    G[1, 2] = -root * hk * g / eta
    G[2, 0] = -root * cl
    G[2, 1] = root * ((eta + 1.0) * sl + g) / eta
    G[2, 2] = root * hk * f / eta
    G[3, 0] = 0.0
    G[3, 1] = 0.0
    G[3, 2] = root * w2 * cl / (2.0 * eta)
    G[4, 0] = 0.0
    G[4, 1] = 0.0
    G[4, 2] = root * w2 * sl / (2.0 * eta)

    q_ah = root * hk / eta
    q_kep = np.sqrt(mu / p**3) * eta * eta
    return eta, q_ah, q_kep


def gauss_matrix(state: MeeState | np.ndarray, mu: float) -> GaussMatrix:
    """Gauss variational map at a given equinoctial state.

    Rejects states with eta <= 0 (radius through infinity: hyperbolic
    branch or degenerate conic).
    """
    y = state.vector if isinstance(state, MeeState) else np.asarray(state, dtype=float)
    G = np.empty((5, 3))
    eta, q_ah, q_kep = _gauss_mat(y, mu, G)
    if eta <= 0.0:
        raise ValueError(f"eta = {eta:.3e} <= 0: degenerate or hyperbolic geometry")
    return GaussMatrix(g=G, q_ah_coeff=float(q_ah), q_kepler_rate=float(q_kep), eta=float(eta))


# ---------------------------------------------------------------------------
# third-body perturbation
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _third_body(rx, ry, rz, px, py, pz, mu3):
    """Perturbing acceleration of a third body at position (px,py,pz) on a
    spacecraft at (rx,ry,rz), both relative to the primary.

    Uses the difference-stabilized form a = -mu3/d^3 (r + F(q) rho) with
    F(q) = q (3 + 3q + q^2) / (1 + (1+q)^(3/2)), algebraically identical to
    the two-term expression but immune to cancellation when r << rho.
    Complex-step safe.
    """
    rho2 = px * px + py * py + pz * pz
    q = (rx * (rx - 2.0 * px) + ry * (ry - 2.0 * py) + rz * (rz - 2.0 * pz)) / rho2
    opq = 1.0 + q
    sq = opq * np.sqrt(opq)
    fq = q * (3.0 + 3.0 * q + q * q) / (1.0 + sq)
    d3 = rho2 * np.sqrt(rho2) * sq
    c = -mu3 / d3
    return c * (rx + fq * px), c * (ry + fq * py), c * (rz + fq * pz)


def third_body_accel(r_1s, r_13, mu3: float) -> np.ndarray:
    """Third-body perturbing acceleration in the primary-centered inertial
    frame (same axes as the inputs)."""
    r = np.asarray(r_1s, dtype=float)
    rho = np.asarray(r_13, dtype=float)
    if np.linalg.norm(r - rho) == 0.0:
        raise ValueError("spacecraft coincides with the third body")
    ax, ay, az = _third_body(r[0], r[1], r[2], rho[0], rho[1], rho[2], mu3)
    return np.array([ax, ay, az])


# ---------------------------------------------------------------------------
# ephemeris interpolation kernel (cubic Hermite, velocity-informed)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _hermite_pv(t, tg, pos, vel):
    """Interpolate position/velocity from a monotone grid. pos/vel are (n,3).
    Velocity output is the analytic derivative of the position interpolant."""
    n = tg.shape[0]
    i = np.searchsorted(tg, t) - 1
    if i < 0:
        i = 0
    if i > n - 2:
        i = n - 2
    dt = tg[i + 1] - tg[i]
    th = (t - tg[i]) / dt
    t2 = th * th
    t3 = t2 * th
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    h10 = t3 - 2.0 * t2 + th
    h01 = -2.0 * t3 + 3.0 * t2
    h11 = t3 - t2
    d00 = (6.0 * t2 - 6.0 * th) / dt
    d10 = 3.0 * t2 - 4.0 * th + 1.0
    d01 = (-6.0 * t2 + 6.0 * th) / dt
    d11 = 3.0 * t2 - 2.0 * th
    out = np.empty(6)
    for j in range(3):
        p0 = pos[i, j]
        p1 = pos[i + 1, j]
        v0 = vel[i, j]
        v1 = vel[i + 1, j]
        out[j] = h00 * p0 + h10 * dt * v0 + h01 * p1 + h11 * dt * v1
        out[3 + j] = d00 * p0 + d10 * v0 + d01 * p1 + d11 * v1
    return out


@njit(cache=True, nogil=True)
def _perturb_lvlh(x1, x2, x3, x4, x5, x6, t, mu,
                  te, pe, ve, ts, ps, vs, mu_e, mu_s):
    """Earth+Sun third-body acceleration resolved in the LVLH axes of the
    current equinoctial state. Complex-step safe in the state arguments
    (the ephemeris lookup depends on t only)."""
    rx, ry, rz, vx, vy, vz = _mee_to_rv(x1, x2, x3, x4, x5, x6, mu)
    tr = np.real(t)
    ee = _hermite_pv(tr, te, pe, ve)
    ss = _hermite_pv(tr, ts, ps, vs)
    aex, aey, aez = _third_body(rx, ry, rz, ee[0], ee[1], ee[2], mu_e)
    asx, asy, asz = _third_body(rx, ry, rz, ss[0], ss[1], ss[2], mu_s)
    ax = aex + asx
    ay = aey + asy
    az = aez + asz
    r1, r2, r3, t1, t2, t3, h1, h2, h3 = _lvlh_rows(rx, ry, rz, vx, vy, vz)
    ar = r1 * ax + r2 * ay + r3 * az
    at = t1 * ax + t2 * ay + t3 * az
    ah = h1 * ax + h2 * ay + h3 * az
    return ar, at, ah


@njit(cache=True, nogil=True)
def _mee_rates(y, mu, ar, at, ah, out):
    """Element rates under LVLH acceleration (ar, at, ah); out[:6] filled.
    Returns eta (callers assert positivity)."""
    G = np.empty((5, 3))
    eta, q_ah, q_kep = _gauss_mat(y, mu, G)
    for i in range(5):
        out[i] = G[i, 0] * ar + G[i, 1] * at + G[i, 2] * ah
    out[5] = q_kep + q_ah * ah
    return eta


@njit(cache=True, nogil=True)
def _orbit_rhs_controlled(t, y, p):
    """RHS for the 7-state (z, q, x7) under a thrust acceleration vector held
    in MCI axes plus Earth/Sun perturbations.

    p = (mu, te, pe, ve, ts, ps, vs, mu_e, mu_s, c_ex,
         thrust_dir_mci (3,), thrust_ut)
    thrust_ut is thrust per unit initial mass; acceleration = ut/x7.
    """
    (mu, te, pe, ve, ts, ps, vs, mu_e, mu_s, c_ex, tdir, ut) = p
    out = np.zeros(7)
    ar, at, ah = _perturb_lvlh(y[0], y[1], y[2], y[3], y[4], y[5], t, mu,
                               te, pe, ve, ts, ps, vs, mu_e, mu_s)
    if ut > 0.0:
        rx, ry, rz, vx, vy, vz = _mee_to_rv(y[0], y[1], y[2], y[3], y[4], y[5], mu)
        r1, r2, r3, t1, t2, t3, h1, h2, h3 = _lvlh_rows(rx, ry, rz, vx, vy, vz)
        amag = ut / y[6]
        ar += amag * (r1 * tdir[0] + r2 * tdir[1] + r3 * tdir[2])
        at += amag * (t1 * tdir[0] + t2 * tdir[1] + t3 * tdir[2])
        ah += amag * (h1 * tdir[0] + h2 * tdir[1] + h3 * tdir[2])
    _mee_rates(y, mu, ar, at, ah, out)
    out[6] = -ut / c_ex
    return out


@njit(cache=True, nogil=True)
def _orbit_rhs_coast(t, y, p):
    """RHS for the 6-state coast under Earth/Sun perturbations only.
    p = (mu, te, pe, ve, ts, ps, vs, mu_e, mu_s)."""
    (mu, te, pe, ve, ts, ps, vs, mu_e, mu_s) = p
    out = np.zeros(6)
    ar, at, ah = _perturb_lvlh(y[0], y[1], y[2], y[3], y[4], y[5], t, mu,
                               te, pe, ve, ts, ps, vs, mu_e, mu_s)
    _mee_rates(y, mu, ar, at, ah, out)
    return out


def orbit_rhs(state: MeeState, epoch: float, control_accel_lvlh, ephemeris,
              c_exhaust: float, mu: float = 1.0) -> np.ndarray:
    """Rates of (p, l, m, n, s, q, mass ratio) under an LVLH thrust
    acceleration (length/time^2, same unit system as mu) plus the Earth and
    Sun third-body terms from `ephemeris` (an EphemerisArrays bundle).

    The mass-ratio rate is -|a_thrust| x7 / c (zero while coasting).
    """
    a = np.asarray(control_accel_lvlh, dtype=float)
    y = state.vector
    out = np.zeros(7)
    ar, at, ah = _perturb_lvlh(y[0], y[1], y[2], y[3], y[4], y[5], epoch, mu,
                               *ephemeris.as_tuple())
    eta = _mee_rates(y, mu, ar + a[0], at + a[1], ah + a[2], out)
    if eta <= 0.0:
        raise ValueError("eta <= 0 during RHS evaluation")
    out[6] = -np.linalg.norm(a) * state.mass_ratio / c_exhaust
    return out


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) with quartic dense output
# ---------------------------------------------------------------------------

_DP_C = np.array([0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0])
_DP_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
])
_DP_B = np.array([35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0])
_DP_E = np.array([71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
                  -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0])
_DP_P = np.array([
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
])


@njit(cache=False, nogil=True)
def _dp54(rhs, t0, tf, y0, p, rtol, atol, max_step, store_dense):
    """Adaptive Dormand-Prince 5(4). Returns (status, ts, ys, hs, Ks):
    status 0 = reached tf, -1 = step underflow, -2 = step budget exhausted.
    ts/ys hold the accepted mesh (node states); hs[i], Ks[i] describe the
    step from ts[i] to ts[i+1] for dense evaluation.
    """
    n = y0.shape[0]
    direction = 1.0 if tf >= t0 else -1.0
    span = abs(tf - t0)

    cap = 512
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    hs = np.empty(cap)
    Ks = np.empty((cap, 7, n)) if store_dense else np.empty((1, 7, n))

    t = t0
    y = y0.copy()
    ts[0] = t
    ys[0] = y
    m = 1

    K = np.empty((7, n))
    f0 = rhs(t, y, p)
    if not np.all(np.isfinite(f0)):
        return -1, ts[:m], ys[:m], hs[:0], Ks[:0]

    # initial step heuristic
    sc0 = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / sc0) ** 2))
    d1 = np.sqrt(np.mean((f0 / sc0) ** 2))
    h = 1e-6 * span if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(h, span, max_step)
    if h <= 0.0:
        h = 1e-6 * span

    max_steps = 4_000_000
    nsteps = 0
    K[0] = f0
    while direction * (tf - t) > 0.0:
        nsteps += 1
        if nsteps > max_steps:
            return -2, ts[:m], ys[:m], hs[: m - 1], Ks[: m - 1 if store_dense else 1]
        h = min(h, abs(tf - t), max_step)
        if h < 1e-13 * max(abs(t), 1.0):
            return -1, ts[:m], ys[:m], hs[: m - 1], Ks[: m - 1 if store_dense else 1]
        hd = direction * h

        for i in range(1, 7):
            acc = np.zeros(n)
            if i < 6:
                for j in range(i):
                    aij = _DP_A[i, j]
                    if aij != 0.0:
                        acc += aij * K[j]
                K[i] = rhs(t + _DP_C[i] * hd, y + hd * acc, p)
            else:
                for j in range(6):
                    bj = _DP_B[j]
                    if bj != 0.0:
                        acc += bj * K[j]
                ynew = y + hd * acc
                K[6] = rhs(t + hd, ynew, p)

        errv = np.zeros(n)
        for j in range(7):
            ej = _DP_E[j]
            if ej != 0.0:
                errv += ej * K[j]
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        err = np.sqrt(np.mean((hd * errv / sc) ** 2))
        if not np.isfinite(err):
            h = h * 0.2
            continue

        if err <= 1.0:
            if store_dense and m - 1 >= Ks.shape[0]:
                Ks2 = np.empty((Ks.shape[0] * 2, 7, n))
                Ks2[: Ks.shape[0]] = Ks
                Ks = Ks2
            if m >= cap:
                cap *= 2
                ts2 = np.empty(cap)
                ts2[:m] = ts[:m]
                ts = ts2
                ys2 = np.empty((cap, n))
                ys2[:m] = ys[:m]
                ys = ys2
                hs2 = np.empty(cap)
                hs2[: m - 1] = hs[: m - 1]
                hs = hs2
            if store_dense:
                Ks[m - 1] = K
            hs[m - 1] = hd
            t = t + hd
            y = ynew
            ts[m] = t
            ys[m] = y
            m += 1
            K[0] = K[6]  # FSAL
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = h * factor
        else:
            h = h * max(0.2, 0.9 * err ** -0.2)

    return 0, ts[:m], ys[:m], hs[: m - 1], Ks[: m - 1] if store_dense else Ks[:1]


class DenseSolution:
    """Accepted mesh plus the quartic dense-output interpolant of the 5(4)
    pair. Callable on scalars or arrays of epochs inside the span."""

    def __init__(self, ts, ys, hs, Ks):
        self.ts = ts
        self.ys = ys
        self._hs = hs
        self._Ks = Ks
        self._dense = Ks.shape[0] == ts.shape[0] - 1

    @property
    def t(self):
        return self.ts

    @property
    def y(self):
        return self.ys

    def __call__(self, t):
        if not self._dense:
            raise ValueError("trajectory was propagated without dense output")
        tq = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = min(self.ts[0], self.ts[-1]), max(self.ts[0], self.ts[-1])
        if np.any(tq < lo - 1e-9 * max(1.0, abs(lo))) or np.any(tq > hi + 1e-9 * max(1.0, abs(hi))):
            raise ValueError("dense evaluation epoch outside the propagated span")
        sgn = 1.0 if self.ts[-1] >= self.ts[0] else -1.0
        idx = np.clip(np.searchsorted(sgn * self.ts, sgn * tq, side="right") - 1, 0, len(self._hs) - 1)
        out = np.empty((tq.size, self.ys.shape[1]))
        for r, (ti, i) in enumerate(zip(tq, idx)):
            h = self._hs[i]
            theta = (ti - self.ts[i]) / h
            tv = np.array([theta, theta**2, theta**3, theta**4])
            out[r] = self.ys[i] + h * (self._Ks[i].T @ (_DP_P @ tv))
        return out[0] if np.isscalar(t) or np.asarray(t).ndim == 0 else out


def propagate(rhs, t_span, y0, settings: IntegratorSettings = IntegratorSettings(),
              args: tuple = ()) -> DenseSolution:
    """Propagate a numba-compiled RHS f(t, y, p) over t_span = (t0, tf).

    Raises StiffnessError on step-size underflow (the partial trajectory is
    attached to the exception for diagnosis).
    """
    t0, tf = float(t_span[0]), float(t_span[1])
    y0 = np.asarray(y0, dtype=float)
    status, ts, ys, hs, Ks = _dp54(
        rhs, t0, tf, y0, args, settings.rtol, settings.atol,
        settings.max_step, settings.dense,
    )
    if status == -1:
        raise StiffnessError("step size underflow (stiff or singular dynamics)",
                             t=ts[-1], y=ys[-1])
    if status == -2:
        raise StiffnessError("step budget exhausted", t=ts[-1], y=ys[-1])
    return DenseSolution(ts, ys, hs, Ks if settings.dense else np.empty((0, 7, y0.shape[0])))
