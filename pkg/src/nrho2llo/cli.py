"""Command-line front end: optimize / guide / simulate / montecarlo /
estimate-tof, with reproducibility manifests for every artifact set."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, parse_config
from .constants import CANONICAL
from .dynamics import IntegratorSettings, propagate
from .elements import wrap_angle
from .ephemeris import gateway_mee
from .indirect import DecisionVector, _tpbvp_rhs, pso_solve, shoot, simplex_refine
from .records import (
    ANGLES_HEADER,
    ATTITUDE_HEADER,
    ELEMENTS_HEADER,
    PSI_HEADER,
    QE0_HEADER,
    SYNODIC_HEADER,
    TORQUE_HEADER,
    TRAJECTORY_HEADER,
    WHEEL_HEADER,
    ResultManifest,
    write_csv,
)
from .simulation import RunRecord, monte_carlo, run_closed_loop
from .tof import TofInputs, bounds_for_search, estimate_tof, mean_nrho_sma

SUBCOMMANDS = ("optimize", "guide", "simulate", "montecarlo", "estimate-tof")


def _manifest(config: RunConfig, seeds: dict) -> ResultManifest:
    return ResultManifest(config_hash=config.config_hash,
                          code_version=__version__, seeds=seeds)


def _write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    return path


def _trajectory_rows(rec: RunRecord):
    u = CANONICAL
    for i in range(len(rec.epochs_s)):
        mee = rec.mee[i]
        acc = rec.accel_lvlh[i]
        yield [rec.epochs_s[i], float(u.to_km(mee[0])), mee[1], mee[2], mee[3],
               mee[4], wrap_angle(mee[5]), rec.mass_ratio[i], acc[0], acc[1], acc[2]]


def _psi_rows(rec: RunRecord):
    for i in range(len(rec.epochs_s)):
        p = rec.psi[i]
        yield [rec.epochs_s[i], p[0], p[1], p[2], rec.lyapunov[i]]


def _attitude_rows(rec: RunRecord):
    for i in range(len(rec.att_epochs_s)):
        q = rec.quats[i]
        w = rec.omegas[i]
        tc = rec.torque_cmd[i]
        yield [rec.att_epochs_s[i], q[0], q[1], q[2], q[3], w[0], w[1], w[2],
               rec.qe0[i], tc[0], tc[1], tc[2]]


def _wheel_rows(rec: RunRecord):
    r2d = np.rad2deg
    for i in range(len(rec.att_epochs_s)):
        ws = r2d(rec.wheel_rates[i])
        wd = r2d(rec.wheel_accels[i])
        yield [rec.att_epochs_s[i], ws[0], ws[1], ws[2], ws[3],
               wd[0], wd[1], wd[2], wd[3]]


def _synodic_rows(epochs_s, mee_rows, eph):
    """Moon-centered rotating-frame path for plotting: the element states are
    converted to inertial positions and rotated into the synodic axes built
    from the Earth table."""
    from .elements import mee_to_cartesian, synodic_frame, MeeState
    from .ephemeris import interpolate_state

    u = eph.units
    for t, mee in zip(epochs_s, mee_rows):
        state = MeeState(p=float(mee[0]), l=float(mee[1]), m=float(mee[2]),
                         n=float(mee[3]), s=float(mee[4]), q=float(mee[5]))
        r = u.to_km(mee_to_cartesian(state, 1.0)[0])
        e_pos, e_vel = interpolate_state(eph.earth, float(np.clip(
            t, eph.earth.span[0], eph.earth.span[1])))
        rot, _ = synodic_frame(e_pos, e_vel, np.zeros(3), np.zeros(3))
        xyz = rot @ r
        yield [t, xyz[0], xyz[1], xyz[2]]


def _elements_rows(epochs_s, mee_rows, u):
    from .elements import MeeState, mee_to_coe

    for t, mee in zip(epochs_s, mee_rows):
        state = MeeState(p=float(mee[0]), l=float(mee[1]), m=float(mee[2]),
                         n=float(mee[3]), s=float(mee[4]), q=float(mee[5]))
        coe = mee_to_coe(state)
        yield [t, float(u.to_km(state.p)), state.eccentricity,
               float(np.rad2deg(coe.i)), float(u.to_km(coe.a))]


def _torque_rows(rec: RunRecord):
    for i in range(len(rec.att_epochs_s)):
        tc = rec.torque_cmd[i]
        ta = rec.torque_act[i]
        yield [rec.att_epochs_s[i], tc[0], tc[1], tc[2], ta[0], ta[1], ta[2]]


def _run_summary(rec: RunRecord) -> dict:
    return dict(status=rec.status, t0_s=rec.t0_s,
                flight_time_s=rec.flight_time_s,
                flight_days=rec.flight_time_s / 86400.0,
                mass_ratio_final=rec.mass_ratio_final,
                thrust_on_time_s=rec.thrust_on_time_s,
                final_elements=rec.final_elements)


def cmd_estimate_tof(config: RunConfig, out: Path, seed: int | None) -> int:
    eph = config.ephemeris_set()
    abar = mean_nrho_sma(eph.gateway)
    inp = TofInputs(a0_km=abar, af_km=config["scenario.pd_km"],
                    ut_max_km_s2=config["scenario.ut_max_km_s2"],
                    c_km_s=config["scenario.c_km_s"])
    est = estimate_tof(inp)
    lo, hi = bounds_for_search(inp)
    d = est / 86400.0
    print(f"mean departure semimajor axis: {abar:.1f} km")
    print(f"estimated time of flight: {d:.2f} d "
          f"({int(d)} d {int((d % 1) * 24)} h {int(((d * 24) % 1) * 60)} min)")
    print(f"flight-time search bounds: [{lo / 86400.0:.2f}, {hi / 86400.0:.2f}] d")
    manifest = _manifest(config, {})
    path = _write_json(out / "tof_estimate.json", dict(
        mean_sma_km=abar, estimate_s=est, estimate_days=d,
        search_bounds_s=[lo, hi]))
    manifest.add(path, out)
    manifest.write(out / "manifest.json")
    return 0


def _export_extremal(best: DecisionVector, problem, out: Path, manifest) -> dict:
    """Re-shoot the converged decision vector densely; export the element and
    thrust-angle histories."""
    u = problem.eph.units
    mee0 = problem.initial_mee(best.t0)
    lam0 = best.lam / np.max(np.abs(best.lam))
    y0 = np.concatenate([mee0.vector, lam0])
    arrs = problem.eph.arrays.as_tuple()
    p = (1.0, *arrs, problem.ut_max, problem.c_ex, best.t0)
    sol = propagate(_tpbvp_rhs, (best.t0, best.t0 + best.dt), y0,
                    IntegratorSettings(rtol=problem.rtol_refine, atol=problem.atol),
                    args=p)
    ts = np.linspace(best.t0, best.t0 + best.dt, 4001)
    ys = sol(ts)
    from .indirect import _ham_terms  # angle history from the control law

    traj_rows, ang_rows = [], []
    for t, y in zip(ts, ys):
        x7 = 1.0 - problem.ut_max / problem.c_ex * (t - best.t0)
        hr, ht, hh, _ = _ham_terms(*y[:6], *y[6:12], 1.0)
        hn = np.sqrt(hr**2 + ht**2 + hh**2)
        app = problem.ut_max / x7 / max(hn, 1e-300)
        traj_rows.append([float(u.to_s(t)), float(u.to_km(y[0])), y[1], y[2],
                          y[3], y[4], wrap_angle(y[5]), x7,
                          float(u.to_km_s2(-hr * app)),
                          float(u.to_km_s2(-ht * app)),
                          float(u.to_km_s2(-hh * app))])
        alpha = float(np.arctan2(-hr, -ht))
        beta = float(np.arcsin(np.clip(-hh / max(hn, 1e-300), -1, 1)))
        ang_rows.append([float(u.to_s(t)), alpha, beta])
    p1 = write_csv(out / "extremal_trajectory.csv", TRAJECTORY_HEADER, traj_rows)
    p2 = write_csv(out / "thrust_angles.csv", ANGLES_HEADER, ang_rows)
    manifest.add(p1, out)
    manifest.add(p2, out)
    epochs_s = [u.to_s(t) for t in ts]
    p3 = write_csv(out / "extremal_synodic.csv", SYNODIC_HEADER,
                   _synodic_rows(epochs_s, ys[:, :6], problem.eph))
    manifest.add(p3, out)
    p4 = write_csv(out / "extremal_elements.csv", ELEMENTS_HEADER,
                   _elements_rows(epochs_s, ys[:, :6], u))
    manifest.add(p4, out)
    return dict(final_state=[float(v) for v in sol.ys[-1][:6]])


def cmd_optimize(config: RunConfig, out: Path, seed: int | None) -> int:
    eph = config.ephemeris_set()
    problem = config.transfer_problem(eph)
    settings = config.pso_settings(seed)
    best, fit, history = pso_solve(problem, settings)
    print(f"swarm search: fitness {fit:.4e} after {len(history)} iterations")
    refined, rfit = simplex_refine(best, problem,
                                   max_iter=config["optimizer.simplex_max_iter"])
    final = shoot(refined, problem, rtol=problem.rtol_refine)
    print(f"simplex refinement: fitness {rfit:.4e}; "
          f"residual norm {np.linalg.norm(final.residual):.3e}")
    tu = eph.units.tu_s
    manifest = _manifest(config, dict(optimizer=settings.seed))
    payload = dict(
        decision_vector=dict(t0_tu=refined.t0, dt_tu=refined.dt,
                             t0_s=refined.t0 * tu, dt_s=refined.dt * tu,
                             dt_days=refined.dt * tu / 86400.0,
                             lambda0=[float(v) for v in refined.lam]),
        fitness_after_swarm=fit, fitness_after_refine=rfit,
        residuals=[float(v) for v in final.residual],
        h_final=final.h_final, h0_coast=final.h0_coast,
        h0_ignition=final.h0_ignition,
        mass_ratio_final=final.mass_ratio_final,
        swarm_history=[float(v) for v in history])
    payload.update(_export_extremal(refined, problem, out, manifest))
    path = _write_json(out / "best_decision.json", payload)
    manifest.add(path, out)
    manifest.write(out / "manifest.json")
    print(f"flight time: {refined.dt * tu / 86400.0:.3f} d, "
          f"final mass ratio {final.mass_ratio_final:.4f}")
    return 0


def _export_run(rec: RunRecord, out: Path, manifest, eph, prefix: str = "",
                attitude: bool = True) -> None:
    u = CANONICAL
    p = write_csv(out / f"{prefix}trajectory.csv", TRAJECTORY_HEADER, _trajectory_rows(rec))
    manifest.add(p, out)
    p = write_csv(out / f"{prefix}psi_history.csv", PSI_HEADER, _psi_rows(rec))
    manifest.add(p, out)
    p = write_csv(out / f"{prefix}path_synodic.csv", SYNODIC_HEADER,
                  _synodic_rows(rec.epochs_s, rec.mee, eph))
    manifest.add(p, out)
    p = write_csv(out / f"{prefix}elements_history.csv", ELEMENTS_HEADER,
                  _elements_rows(rec.epochs_s, rec.mee, u))
    manifest.add(p, out)
    if attitude and len(rec.att_epochs_s):
        p = write_csv(out / f"{prefix}attitude.csv", ATTITUDE_HEADER, _attitude_rows(rec))
        manifest.add(p, out)
        p = write_csv(out / f"{prefix}wheels.csv", WHEEL_HEADER, _wheel_rows(rec))
        manifest.add(p, out)
        p = write_csv(out / f"{prefix}torques.csv", TORQUE_HEADER, _torque_rows(rec))
        manifest.add(p, out)
        p = write_csv(out / f"{prefix}qe0.csv", QE0_HEADER,
                      zip(rec.att_epochs_s, rec.qe0))
        manifest.add(p, out)


def cmd_guide(config: RunConfig, out: Path, seed: int | None) -> int:
    eph = config.ephemeris_set()
    rec = run_closed_loop(config.sim_config(perfect_attitude=True), eph)
    manifest = _manifest(config, {})
    _export_run(rec, out, manifest, eph)
    path = _write_json(out / "summary.json", _run_summary(rec))
    manifest.add(path, out)
    manifest.write(out / "manifest.json")
    print(f"status {rec.status}: flight {rec.flight_time_s / 86400.0:.3f} d, "
          f"mass ratio {rec.mass_ratio_final:.4f}")
    return 0 if rec.status == "converged" else 3


def cmd_simulate(config: RunConfig, out: Path, seed: int | None,
                 perfect_attitude: bool = False) -> int:
    eph = config.ephemeris_set()
    rec = run_closed_loop(config.sim_config(perfect_attitude=perfect_attitude), eph)
    manifest = _manifest(config, dict(sim=config["sim.seed"]))
    _export_run(rec, out, manifest, eph)
    path = _write_json(out / "summary.json", _run_summary(rec))
    manifest.add(path, out)
    manifest.write(out / "manifest.json")
    print(f"status {rec.status}: flight {rec.flight_time_s / 86400.0:.3f} d, "
          f"mass ratio {rec.mass_ratio_final:.4f}")
    return 0 if rec.status == "converged" else 3


def cmd_montecarlo(config: RunConfig, out: Path, seed: int | None,
                   n_runs: int = 20) -> int:
    eph = config.ephemeris_set()
    master = config["sim.seed"] if seed is None else seed
    stats, records = monte_carlo(config.sim_config(), eph, n_runs=n_runs,
                                 master_seed=master,
                                 n_workers=config["optimizer.workers"],
                                 keep_records=True)
    manifest = _manifest(config, dict(montecarlo=master))
    for i, rec in enumerate(records):
        if not len(rec.epochs_s):
            continue
        stride = max(1, len(rec.epochs_s) // 2000)
        p = write_csv(out / f"run_{i:03d}_elements.csv", ELEMENTS_HEADER,
                      _elements_rows(rec.epochs_s[::stride], rec.mee[::stride],
                                     CANONICAL))
        manifest.add(p, out)
        if len(rec.att_epochs_s):
            astride = max(1, len(rec.att_epochs_s) // 4000)
            p = write_csv(out / f"run_{i:03d}_qe0.csv", QE0_HEADER,
                          zip(rec.att_epochs_s[::astride], rec.qe0[::astride]))
            manifest.add(p, out)
    path = _write_json(out / "campaign.json", stats.as_dict())
    manifest.add(path, out)
    manifest.write(out / "manifest.json")
    print(f"{stats.n_converged}/{stats.n_runs} converged; mean flight "
          f"{stats.mean_flight_days:.2f} d, mean mass ratio {stats.mean_mass_ratio:.4f}")
    return 0 if stats.n_converged == stats.n_runs else 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nrho2llo",
        description="Low-thrust NRHO-to-LLO transfer optimization and "
                    "closed-loop guidance/control simulation")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="TOML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--runs", type=int, default=20,
                        help="montecarlo: number of runs")
    parser.add_argument("--perfect-attitude", action="store_true",
                        help="simulate: thrust exactly along the commanded direction")
    parser.add_argument("--explain", action="store_true",
                        help="print the resolved configuration and exit")
    args = parser.parse_args(argv)

    try:
        config = parse_config(args.config)
        if args.explain:
            print(config.explain())
            return 0
        out = Path(args.out) if args.out else config.resolve_path(config["output.dir"])
        out.mkdir(parents=True, exist_ok=True)
        if args.subcommand == "estimate-tof":
            return cmd_estimate_tof(config, out, args.seed)
        if args.subcommand == "optimize":
            return cmd_optimize(config, out, args.seed)
        if args.subcommand == "guide":
            return cmd_guide(config, out, args.seed)
        if args.subcommand == "simulate":
            return cmd_simulate(config, out, args.seed,
                                perfect_attitude=args.perfect_attitude)
        if args.subcommand == "montecarlo":
            return cmd_montecarlo(config, out, args.seed, n_runs=args.runs)
        raise ConfigError(f"unknown subcommand {args.subcommand}")
    except (ConfigError, ValueError, OSError) as exc:
        sys.stderr.write(json.dumps(dict(error=str(exc))) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
