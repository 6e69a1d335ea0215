"""Closed-loop transfer simulation: sampled Lyapunov guidance driving either
an ideal thruster (3-DoF mode) or the full attitude/actuation chain
(commanded frame -> tracking torque -> wheel steering -> actual torque ->
actual thrust direction), plus engine-failure injection and the Monte Carlo
campaign.

Architecture per guidance interval: the feedback command is computed from the
current orbit state and held (zero-order) in inertial axes; in 6-DoF mode the
attitude marches at a fixed substep under the tracking law while the orbit
advances under the actual body-axis thrust direction. When all three target
accuracies come within reach, the sampling interval shrinks (the "endgame")
so the held-command wobble no longer masks the termination window; with the
nominal interval alone, the inclination accuracy is unreachable under the
Earth-tide forcing.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .attitude import (
    DEFAULT_INERTIA,
    AttitudeGains,
    _attitude_rhs,
    _control_torque,
    _quat_to_dcm,
    commanded_frame_step,
    error_quaternion,
    quat_from_axis_angle,
)
from .constants import CANONICAL, PROPULSION, CanonicalUnits, PropulsionParams
from .dynamics import IntegratorSettings, StiffnessError, _orbit_rhs_controlled, _perturb_lvlh, propagate
from .elements import MeeState, _lvlh_rows, _mee_to_rv, mee_to_coe, wrap_angle
from .ephemeris import EphemerisSet, gateway_mee
from .guidance import GuidanceGains, TargetSet, _guidance_command
from .wheels import WheelArray, actuation_matrix

__all__ = [
    "SimConfig",
    "FailureWindow",
    "RunRecord",
    "CampaignStats",
    "run_closed_loop",
    "monte_carlo",
    "gain_tuning",
    "attitude_regulation_run",
]

# Eq.-like termination accuracies on (|psi1| [DU], |psi2|, |psi3|)
ACCURACIES = (1e-7, 1e-6, 1e-8)
# entering the endgame: all violations within these bands
ENDGAME_ENTRY = (1e-4, 1e-3, 1e-4)


@dataclass(frozen=True)
class FailureWindow:
    """Engine outage: onset measured from departure (days), duration days."""

    onset_days: float
    duration_days: float

    def contains(self, t_since_dep_s: float) -> bool:
        t0 = self.onset_days * 86400.0
        return t0 <= t_since_dep_s < t0 + self.duration_days * 86400.0

    @property
    def end_s(self) -> float:
        return (self.onset_days + self.duration_days) * 86400.0


@dataclass(frozen=True)
class SimConfig:
    """Closed-loop run configuration (SI inputs; converted internally)."""

    pd_km: float = 1837.4
    ed: float = 0.0
    id_deg: float = 90.0
    propulsion: PropulsionParams = PROPULSION
    guidance_gains: GuidanceGains = GuidanceGains()
    attitude_gains: AttitudeGains = AttitudeGains()
    inertia: np.ndarray = field(default_factory=lambda: DEFAULT_INERTIA.copy())
    wheels: WheelArray = WheelArray()
    guidance_interval_s: float = 600.0
    endgame_interval_s: float = 10.0
    attitude_substep_s: float = 1.0
    orbit_substep_s: float = 10.0
    accuracies: tuple = ACCURACIES
    endgame_entry: tuple = ENDGAME_ENTRY
    t0_s: float | None = None            # None: gateway reference epoch
    max_flight_days: float = 60.0
    failure: FailureWindow | None = None
    perfect_attitude: bool = False
    initial_attitude: tuple | None = None  # (eigenaxis (3,), eigenangle rad)
    rtol: float = 1e-11
    atol: float = 1e-12
    record_stride_s: float = 60.0
    record_fine_window_s: float = 7200.0

    def __post_init__(self):
        if self.attitude_substep_s > self.guidance_interval_s:
            raise ValueError("attitude substep must not exceed the guidance interval")
        if min(self.accuracies) <= 0.0 or min(self.endgame_entry) <= 0.0:
            raise ValueError("accuracies must be positive")

    def target(self, units: CanonicalUnits = CANONICAL) -> TargetSet:
        return TargetSet(pd=float(units.to_du(self.pd_km)), ed=self.ed,
                         id=float(np.deg2rad(self.id_deg)))


@dataclass
class RunRecord:
    """Per-run history (orbit at guidance samples, attitude/wheels decimated
    to the record stride) plus the termination summary."""

    status: str = "running"            # converged | max-time | integrator-failure
    t0_s: float = 0.0
    flight_time_s: float = 0.0
    mass_ratio_final: float = 1.0
    thrust_on_time_s: float = 0.0
    ceiling_time_s: float = 0.0
    impulse_per_mass_km_s: float = 0.0
    final_elements: dict = field(default_factory=dict)
    # orbit samples
    epochs_s: list = field(default_factory=list)
    mee: list = field(default_factory=list)            # canonical (p,l,m,n,s,q)
    mass_ratio: list = field(default_factory=list)
    accel_lvlh: list = field(default_factory=list)     # km/s^2, thrust+perturb
    psi: list = field(default_factory=list)
    lyapunov: list = field(default_factory=list)
    saturated: list = field(default_factory=list)
    command_ut: list = field(default_factory=list)     # km/s^2 thrust/initial-mass
    thrust_dir_mci: list = field(default_factory=list)
    failure_flags: list = field(default_factory=list)
    # attitude/wheel samples (6-DoF runs)
    att_epochs_s: list = field(default_factory=list)
    quats: list = field(default_factory=list)
    omegas: list = field(default_factory=list)
    qe0: list = field(default_factory=list)
    torque_cmd: list = field(default_factory=list)
    torque_act: list = field(default_factory=list)
    wheel_rates: list = field(default_factory=list)
    wheel_accels: list = field(default_factory=list)

    def as_arrays(self) -> "RunRecord":
        for name in ("epochs_s", "mee", "mass_ratio", "accel_lvlh", "psi",
                     "lyapunov", "saturated", "command_ut", "thrust_dir_mci",
                     "failure_flags", "att_epochs_s", "quats", "omegas", "qe0",
                     "torque_cmd", "torque_act", "wheel_rates", "wheel_accels"):
            setattr(self, name, np.asarray(getattr(self, name)))
        return self


@dataclass(frozen=True)
class CampaignStats:
    """Monte Carlo aggregates over converged runs (Table-style summary)."""

    n_runs: int
    n_converged: int
    mean_flight_days: float
    std_flight_days: float
    mean_p_km: float
    std_p_km: float
    mean_e: float
    std_e: float
    mean_i_deg: float
    std_i_deg: float
    mean_mass_ratio: float
    std_mass_ratio: float
    runs: list = field(default_factory=list)   # per-run summary dicts

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "n_runs", "n_converged", "mean_flight_days", "std_flight_days",
            "mean_p_km", "std_p_km", "mean_e", "std_e", "mean_i_deg",
            "std_i_deg", "mean_mass_ratio", "std_mass_ratio")}
        d["runs"] = self.runs
        return d


# ---------------------------------------------------------------------------
# compiled inner loops
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _attitude_march(q, w, ws, n_sub, dt, J, Jinv, W4, P4, a_gain, b_gain,
                    sign0, qc, wc, wcd, mc, rate_lim, accel_lim, control_on,
                    rec_q, rec_w, rec_ws, rec_wsd, rec_tc, rec_ta, rec_qe0, rec_b1):
    """March attitude + wheels over one guidance interval at fixed substeps.

    q (4,), w (3,), ws (n_wheels,) are advanced in place; per-substep records
    fill the rec_* arrays. Torque and wheel acceleration are held within a
    substep; wheel rates integrate exactly (linear) inside the RK4 stages.
    """
    nw = ws.shape[0]
    for k in range(n_sub):
        if control_on:
            tc = _control_torque(q, w, qc, wc, wcd, J, a_gain, b_gain, sign0, mc)
            wsd = -(P4 @ tc)
            for i in range(nw):
                if wsd[i] > accel_lim:
                    wsd[i] = accel_lim
                elif wsd[i] < -accel_lim:
                    wsd[i] = -accel_lim
        else:
            tc = np.zeros(3)
            wsd = np.zeros(nw)
        # rate rail: clamp the end-of-substep rate, fold into the realized accel
        for i in range(nw):
            nxt = ws[i] + wsd[i] * dt
            if nxt > rate_lim:
                nxt = rate_lim
            elif nxt < -rate_lim:
                nxt = -rate_lim
            wsd[i] = (nxt - ws[i]) / dt

        Wws = W4 @ ws
        Wwsd = W4 @ wsd
        ta0 = -(w[1] * Wws[2] - w[2] * Wws[1]) - Wwsd[0]
        ta1 = -(w[2] * Wws[0] - w[0] * Wws[2]) - Wwsd[1]
        ta2 = -(w[0] * Wws[1] - w[1] * Wws[0]) - Wwsd[2]

        # RK4 on (q, w) with linear wheel-rate evolution inside the stages
        k1q, k1w = _attitude_rhs(q, w, ws, wsd, J, Jinv, W4, mc)
        q2 = q + 0.5 * dt * k1q
        w2 = w + 0.5 * dt * k1w
        k2q, k2w = _attitude_rhs(q2, w2, ws + 0.5 * dt * wsd, wsd, J, Jinv, W4, mc)
        q3 = q + 0.5 * dt * k2q
        w3 = w + 0.5 * dt * k2w
        k3q, k3w = _attitude_rhs(q3, w3, ws + 0.5 * dt * wsd, wsd, J, Jinv, W4, mc)
        q4 = q + dt * k3q
        w4 = w + dt * k3w
        k4q, k4w = _attitude_rhs(q4, w4, ws + dt * wsd, wsd, J, Jinv, W4, mc)
        for i in range(4):
            q[i] += dt / 6.0 * (k1q[i] + 2.0 * k2q[i] + 2.0 * k3q[i] + k4q[i])
        qn = np.sqrt(q[0] ** 2 + q[1] ** 2 + q[2] ** 2 + q[3] ** 2)
        for i in range(4):
            q[i] /= qn
        for i in range(3):
            w[i] += dt / 6.0 * (k1w[i] + 2.0 * k2w[i] + 2.0 * k3w[i] + k4w[i])
        for i in range(nw):
            ws[i] += wsd[i] * dt

        # records (state after the substep; torques/accels applied during it)
        qe0 = qc[0] * q[0] + qc[1] * q[1] + qc[2] * q[2] + qc[3] * q[3]
        rec_qe0[k] = qe0
        for i in range(4):
            rec_q[k, i] = q[i]
        for i in range(3):
            rec_w[k, i] = w[i]
            rec_tc[k, i] = tc[i]
        rec_ta[k, 0] = ta0
        rec_ta[k, 1] = ta1
        rec_ta[k, 2] = ta2
        for i in range(nw):
            rec_ws[k, i] = ws[i]
            rec_wsd[k, i] = wsd[i]
        R = _quat_to_dcm(q)
        rec_b1[k, 0] = R[0, 0]
        rec_b1[k, 1] = R[0, 1]
        rec_b1[k, 2] = R[0, 2]


@njit(cache=True, nogil=True)
def _orbit_march(y, t_tu, n_steps, dt_tu, dirs, ut, c_ex,
                 te, pe, ve, ts, ps, vs, mu_e, mu_s):
    """Fixed-step RK4 march of (elements, mass ratio) under a piecewise-held
    MCI thrust direction sequence; returns the end epoch."""
    t = t_tu
    for k in range(n_steps):
        p = (1.0, te, pe, ve, ts, ps, vs, mu_e, mu_s, c_ex, dirs[k], ut)
        k1 = _orbit_rhs_controlled(t, y, p)
        k2 = _orbit_rhs_controlled(t + 0.5 * dt_tu, y + 0.5 * dt_tu * k1, p)
        k3 = _orbit_rhs_controlled(t + 0.5 * dt_tu, y + 0.5 * dt_tu * k2, p)
        k4 = _orbit_rhs_controlled(t + dt_tu, y + dt_tu * k3, p)
        for i in range(7):
            y[i] += dt_tu / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        t += dt_tu
    return t


def _thrust_dir_mci(y, u_vec):
    """Unit MCI direction of an LVLH command at the current state."""
    rx, ry, rz, vx, vy, vz = _mee_to_rv(y[0], y[1], y[2], y[3], y[4], y[5], 1.0)
    rows = _lvlh_rows(rx, ry, rz, vx, vy, vz)
    basis = np.array(rows).reshape(3, 3)
    d = basis.T @ (u_vec / np.linalg.norm(u_vec))
    return d / np.linalg.norm(d)


# ---------------------------------------------------------------------------
# closed-loop run
# ---------------------------------------------------------------------------

def run_closed_loop(config: SimConfig, eph: EphemerisSet) -> RunRecord:
    """Fly one transfer under sampled feedback guidance.

    3-DoF mode (perfect attitude): thrust applied exactly along the held
    commanded direction, orbit propagated adaptively over each interval.
    6-DoF mode: commanded frame -> tracking torque -> wheel steering with
    saturation -> actual torque -> attitude march -> orbit march along the
    actual first body axis. During an engine failure the thrust and all
    torque commands are zero, wheels hold their rates, and the commanded
    frame restarts a fresh tracking segment at engine recovery.
    """
    units = eph.units
    target = config.target(units)
    gains = config.guidance_gains
    ut_max = float(units.to_acc(config.propulsion.ut_max_km_s2))
    c_ex = float(units.to_vu(config.propulsion.c_km_s))
    arrs = eph.arrays.as_tuple()

    t0_s = eph.gateway.epoch_ref_s if config.t0_s is None else float(config.t0_s)
    t0_tu = float(units.to_tu(t0_s))
    mee0 = gateway_mee(eph.gateway, t0_s, units)
    y = np.concatenate([mee0.vector, [1.0]])
    t_tu = t0_tu
    max_tu = float(config.max_flight_days * 86400.0 / units.tu_s)

    sixdof = not config.perfect_attitude
    if sixdof:
        J = np.asarray(config.inertia, dtype=float)
        Jinv = np.linalg.inv(J)
        W4 = actuation_matrix(config.wheels)
        P4 = W4.T @ np.linalg.inv(W4 @ W4.T)
        mc = np.zeros(3)
        if config.initial_attitude is None:
            q_att = np.array([1.0, 0.0, 0.0, 0.0])
        else:
            axis, angle = config.initial_attitude
            q_att = quat_from_axis_angle(np.asarray(axis, dtype=float), float(angle))
        w_att = np.zeros(3)
        ws = np.zeros(config.wheels.n_wheels)
        frame = None
        sign0 = 0.0

    rec = RunRecord(t0_s=t0_s)
    endgame = False
    impulse = 0.0          # integral of |u_T| dt (canonical)
    ceiling_tu = 0.0
    thrust_on_tu = 0.0
    last_record_att_s = -np.inf
    settings_3dof = IntegratorSettings(rtol=config.rtol, atol=config.atol, dense=False)

    def record_sample(psi, v, a_lvlh_canonical, u_norm, sat, dir_mci, failed):
        rec.epochs_s.append(float(units.to_s(t_tu)))
        rec.mee.append(y[:6].copy())
        rec.mass_ratio.append(float(y[6]))
        rec.psi.append(np.asarray(psi, dtype=float))
        rec.lyapunov.append(float(v))
        rec.accel_lvlh.append(units.to_km_s2(np.asarray(a_lvlh_canonical)))
        rec.command_ut.append(float(units.to_km_s2(u_norm)))
        rec.saturated.append(bool(sat))
        rec.thrust_dir_mci.append(np.asarray(dir_mci, dtype=float))
        rec.failure_flags.append(bool(failed))

    status = "running"
    while True:
        elapsed_s = float(units.to_s(t_tu - t0_tu))
        aP = np.array(_perturb_lvlh(y[0], y[1], y[2], y[3], y[4], y[5],
                                    t_tu, 1.0, *arrs))
        out = _guidance_command(y[:6], y[6], 1.0, target.pd, target.ed,
                                target.tan2_half_i, gains.k1, gains.k2, gains.k3,
                                ut_max, aP[0], aP[1], aP[2])
        u_vec = np.array(out[:3])
        psi = np.array(out[6:9])
        sat = bool(out[9])
        v = 0.5 * float(psi @ (gains.array * psi))

        converged = (abs(psi[0]) <= config.accuracies[0]
                     and abs(psi[1]) <= config.accuracies[1]
                     and abs(psi[2]) <= config.accuracies[2])
        if converged:
            record_sample(psi, v, aP, 0.0, False, np.zeros(3), False)
            status = "converged"
            break
        if t_tu - t0_tu >= max_tu:
            record_sample(psi, v, aP, 0.0, sat, np.zeros(3), False)
            status = "max-time"
            break

        if not endgame:
            endgame = (abs(psi[0]) <= config.endgame_entry[0]
                       and abs(psi[1]) <= config.endgame_entry[1]
                       and abs(psi[2]) <= config.endgame_entry[2])
        interval_s = config.endgame_interval_s if endgame else config.guidance_interval_s

        in_failure = config.failure is not None and config.failure.contains(elapsed_s)
        if in_failure:
            # idle until the end of the outage in interval-sized chunks
            interval_s = min(config.guidance_interval_s,
                             config.failure.end_s - elapsed_s)
            interval_s = max(interval_s, config.attitude_substep_s)
        elif config.failure is not None:
            # never let a held command straddle the engine-failure onset
            to_onset = config.failure.onset_days * 86400.0 - elapsed_s
            if 0.0 < to_onset < interval_s:
                interval_s = max(to_onset, config.attitude_substep_s)
        interval_tu = interval_s / units.tu_s

        u_norm = np.linalg.norm(u_vec)
        coasting = in_failure or u_norm == 0.0
        dir_mci = np.zeros(3) if coasting else _thrust_dir_mci(y, u_vec)
        ut_held = 0.0 if coasting else float(u_norm)

        record_sample(psi, v, aP + (0.0 if coasting else u_vec / y[6]),
                      ut_held, sat, dir_mci, in_failure)

        try:
            if config.perfect_attitude:
                p = (1.0, *arrs, c_ex, dir_mci, ut_held)
                sol = propagate(_orbit_rhs_controlled, (t_tu, t_tu + interval_tu),
                                y, settings_3dof, args=p)
                y = sol.ys[-1].copy()
            else:
                n_sub = max(1, int(round(interval_s / config.attitude_substep_s)))
                dt_sub = interval_s / n_sub
                if coasting:
                    control_on = False
                    qc = np.array([1.0, 0.0, 0.0, 0.0])
                    wc = np.zeros(3)
                    wcd = np.zeros(3)
                    if in_failure:
                        frame = None   # engine restart begins a new segment
                        sign0 = 0.0
                else:
                    frame = commanded_frame_step(dir_mci, frame, dt=interval_s)
                    qc, wc, wcd = frame.quat, frame.omega, frame.omega_dot
                    if sign0 == 0.0:
                        qe0_now = float(error_quaternion(q_att, qc)[0])
                        sign0 = 1.0 if qe0_now >= 0.0 else -1.0
                    control_on = True
                nw = config.wheels.n_wheels
                rq = np.empty((n_sub, 4))
                rw = np.empty((n_sub, 3))
                rws = np.empty((n_sub, nw))
                rwsd = np.empty((n_sub, nw))
                rtc = np.empty((n_sub, 3))
                rta = np.empty((n_sub, 3))
                rqe0 = np.empty(n_sub)
                rb1 = np.empty((n_sub, 3))
                _attitude_march(q_att, w_att, ws, n_sub, dt_sub, J, Jinv, W4, P4,
                                config.attitude_gains.a, config.attitude_gains.b,
                                sign0 if control_on else 1.0, qc, wc, wcd, mc,
                                config.wheels.rate_limit, config.wheels.accel_limit,
                                control_on, rq, rw, rws, rwsd, rtc, rta, rqe0, rb1)
                # orbit march along the actual body axis, held per orbit substep
                n_orb = max(1, int(round(interval_s / config.orbit_substep_s)))
                stride = max(1, n_sub // n_orb)
                n_orb = (n_sub + stride - 1) // stride
                dirs = np.ascontiguousarray(rb1[::stride][:n_orb])
                if coasting:
                    dirs = np.zeros_like(dirs)
                dt_orb_tu = interval_tu / n_orb
                _orbit_march(y, t_tu, n_orb, dt_orb_tu, dirs, ut_held, c_ex, *arrs)
                # decimated attitude records
                fine = elapsed_s <= config.record_fine_window_s
                stride_rec = 1 if fine else max(1, int(round(
                    config.record_stride_s / dt_sub)))
                for k in range(0, n_sub, stride_rec):
                    tk = float(units.to_s(t_tu)) + (k + 1) * dt_sub
                    if tk - last_record_att_s < 0.999 * dt_sub:
                        continue
                    last_record_att_s = tk
                    rec.att_epochs_s.append(tk)
                    rec.quats.append(rq[k].copy())
                    rec.omegas.append(rw[k].copy())
                    rec.qe0.append(float(rqe0[k]))
                    rec.torque_cmd.append(rtc[k].copy())
                    rec.torque_act.append(rta[k].copy())
                    rec.wheel_rates.append(rws[k].copy())
                    rec.wheel_accels.append(rwsd[k].copy())
        except StiffnessError:
            status = "integrator-failure"
            break

        if ut_held > 0.0:
            impulse += ut_held * interval_tu
            thrust_on_tu += interval_tu
            if sat:
                ceiling_tu += interval_tu
        t_tu += interval_tu

    rec.status = status
    rec.flight_time_s = float(units.to_s(t_tu - t0_tu))
    rec.mass_ratio_final = float(y[6])
    rec.thrust_on_time_s = float(units.to_s(thrust_on_tu))
    rec.ceiling_time_s = float(units.to_s(ceiling_tu))
    rec.impulse_per_mass_km_s = float(units.to_km_s(impulse))
    mee_f = MeeState(p=float(y[0]), l=float(y[1]), m=float(y[2]), n=float(y[3]),
                     s=float(y[4]), q=wrap_angle(float(y[5])),
                     mass_ratio=float(np.clip(y[6], 1e-12, 1.0)))
    coe = mee_to_coe(mee_f)
    rec.final_elements = dict(
        p_km=float(units.to_km(y[0])), a_km=float(units.to_km(coe.a)),
        e=coe.e, i_deg=float(np.rad2deg(coe.i)),
        raan_deg=float(np.rad2deg(coe.raan)), argp_deg=float(np.rad2deg(coe.argp)))
    return rec.as_arrays()


# ---------------------------------------------------------------------------
# Monte Carlo campaign
# ---------------------------------------------------------------------------

def _draw_run_config(config: SimConfig, eph: EphemerisSet, seed) -> SimConfig:
    rng = np.random.default_rng(seed)
    t0 = eph.gateway.epoch_ref_s + rng.uniform(0.0, 1.0) * eph.gateway.period_s
    onset = rng.uniform(7.0, 10.0)
    duration = rng.uniform(1.0, 5.0)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, np.pi)
    failure = FailureWindow(onset, duration) if config.failure is None else config.failure
    return replace(config, t0_s=t0, failure=failure,
                   initial_attitude=(axis, angle))


def monte_carlo(config: SimConfig, eph: EphemerisSet, n_runs: int,
                master_seed: int = 0, n_workers: int = 2,
                randomize: bool = True, keep_records: bool = False):
    """Independent closed-loop runs with per-run seeds spawned from the
    master seed: random departure point within one Gateway period, random
    failure window, random initial attitude. Aggregation is index-ordered, so
    the statistics are deterministic regardless of scheduling."""
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    seeds = np.random.SeedSequence(master_seed).spawn(n_runs)
    configs = [(_draw_run_config(config, eph, seeds[i]) if randomize else config)
               for i in range(n_runs)]

    def one(i):
        try:
            return run_closed_loop(configs[i], eph)
        except Exception as exc:  # individual failures recorded, not fatal
            bad = RunRecord(status=f"error: {exc}")
            return bad

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(one, range(n_runs)))
    else:
        records = [one(i) for i in range(n_runs)]

    rows = []
    for i, r in enumerate(records):
        rows.append(dict(
            run=i, status=r.status, t0_s=r.t0_s,
            flight_days=r.flight_time_s / 86400.0,
            p_km=r.final_elements.get("p_km", float("nan")),
            e=r.final_elements.get("e", float("nan")),
            i_deg=r.final_elements.get("i_deg", float("nan")),
            mass_ratio=r.mass_ratio_final))
    ok = [row for row in rows if row["status"] == "converged"]

    def stat(key):
        vals = np.array([row[key] for row in ok]) if ok else np.array([np.nan])
        return float(np.mean(vals)), float(np.std(vals))

    mf, sf = stat("flight_days")
    mp, sp = stat("p_km")
    me, se = stat("e")
    mi, si = stat("i_deg")
    mm, sm = stat("mass_ratio")
    stats = CampaignStats(
        n_runs=n_runs, n_converged=len(ok),
        mean_flight_days=mf, std_flight_days=sf, mean_p_km=mp, std_p_km=sp,
        mean_e=me, std_e=se, mean_i_deg=mi, std_i_deg=si,
        mean_mass_ratio=mm, std_mass_ratio=sm, runs=rows)
    return (stats, records) if keep_records else stats


# ---------------------------------------------------------------------------
# attitude-only regulation (test/validation support)
# ---------------------------------------------------------------------------

def attitude_regulation_run(eigenaxis, eigenangle_deg: float, duration_s: float,
                            inertia=None, gains: AttitudeGains = AttitudeGains(),
                            array: WheelArray = WheelArray(),
                            substep_s: float = 1.0) -> dict:
    """Regulate from an eigenaxis/eigenangle offset to a fixed commanded
    frame; returns substep histories for convergence and saturation checks."""
    J = DEFAULT_INERTIA if inertia is None else np.asarray(inertia, dtype=float)
    Jinv = np.linalg.inv(J)
    W4 = actuation_matrix(array)
    P4 = W4.T @ np.linalg.inv(W4 @ W4.T)
    qc = np.array([1.0, 0.0, 0.0, 0.0])
    q = quat_from_axis_angle(np.asarray(eigenaxis, dtype=float),
                             np.deg2rad(eigenangle_deg))
    w = np.zeros(3)
    ws = np.zeros(array.n_wheels)
    qe0 = float(error_quaternion(q, qc)[0])
    sign0 = 1.0 if qe0 >= 0.0 else -1.0
    n = int(round(duration_s / substep_s))
    rq = np.empty((n, 4))
    rw = np.empty((n, 3))
    rws = np.empty((n, array.n_wheels))
    rwsd = np.empty((n, array.n_wheels))
    rtc = np.empty((n, 3))
    rta = np.empty((n, 3))
    rqe0 = np.empty(n)
    rb1 = np.empty((n, 3))
    _attitude_march(q, w, ws, n, substep_s, J, Jinv, W4, P4, gains.a, gains.b,
                    sign0, qc, np.zeros(3), np.zeros(3), np.zeros(3),
                    array.rate_limit, array.accel_limit, True,
                    rq, rw, rws, rwsd, rtc, rta, rqe0, rb1)
    qe_vec = np.array([np.linalg.norm(error_quaternion(rq[k], qc)[1:]) for k in range(n)])
    return dict(t=np.arange(1, n + 1) * substep_s, q=rq, w=rw, ws=rws,
                ws_dot=rwsd, tc=rtc, ta=rta, abs_qe0=np.abs(rqe0),
                qe_vec_norm=qe_vec, b1=rb1)


# ---------------------------------------------------------------------------
# gain tuning
# ---------------------------------------------------------------------------

def gain_tuning(eph: EphemerisSet, config: SimConfig,
                initial: GuidanceGains | None = None,
                bounds_decades: float = 1.0, max_evals: int = 40,
                objective: str = "flight-time") -> tuple[GuidanceGains, float]:
    """Simplex search over log-scaled guidance gains minimizing the 3-DoF
    flight time. Non-converging runs score +inf; the result is never worse
    than the starting gains."""
    start = initial or config.guidance_gains
    x0 = np.log10(start.array)

    def run_time(gains: GuidanceGains) -> float:
        cfg = replace(config, guidance_gains=gains, perfect_attitude=True)
        rec = run_closed_loop(cfg, eph)
        return rec.flight_time_s if rec.status == "converged" else np.inf

    def objective_fn(xlog):
        if np.max(np.abs(xlog - x0)) > bounds_decades:
            return np.inf
        return run_time(GuidanceGains(*np.power(10.0, xlog)))

    f0 = objective_fn(x0)
    if bounds_decades == 0.0 or max_evals <= 1:
        return start, float(f0)
    res = minimize(objective_fn, x0, method="Nelder-Mead",
                   options=dict(maxfev=max_evals, xatol=1e-3, fatol=1.0))
    if res.fun < f0:
        return GuidanceGains(*np.power(10.0, res.x)), float(res.fun)
    return start, float(f0)
