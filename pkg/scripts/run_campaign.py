#!/usr/bin/env python3
"""Desk-scale Monte Carlo campaign with engine-failure injection."""

import argparse

from nrho2llo.ephemeris import default_ephemeris_set
from nrho2llo.simulation import SimConfig, monte_carlo


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    eph = default_ephemeris_set()
    stats = monte_carlo(SimConfig(), eph, n_runs=args.runs, master_seed=args.seed)
    print(f"{stats.n_converged}/{stats.n_runs} converged")
    print(f"flight time  {stats.mean_flight_days:.3f} +- {stats.std_flight_days:.3f} d")
    print(f"semilatus    {stats.mean_p_km:.3f} +- {stats.std_p_km:.2e} km")
    print(f"eccentricity {stats.mean_e:.3e} +- {stats.std_e:.2e}")
    print(f"inclination  {stats.mean_i_deg:.6f} +- {stats.std_i_deg:.2e} deg")
    print(f"mass ratio   {stats.mean_mass_ratio:.4f} +- {stats.std_mass_ratio:.2e}")


if __name__ == "__main__":
    main()
