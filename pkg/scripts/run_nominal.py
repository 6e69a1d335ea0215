#!/usr/bin/env python3
"""Fly the nominal transfer both ways (3-DoF guidance-only and full 6-DoF)
and print the headline numbers side by side."""

import numpy as np

from nrho2llo.ephemeris import default_ephemeris_set
from nrho2llo.simulation import SimConfig, run_closed_loop


def main():
    eph = default_ephemeris_set()
    for label, cfg in [("3-DoF guidance", SimConfig(perfect_attitude=True)),
                       ("6-DoF closed loop", SimConfig())]:
        rec = run_closed_loop(cfg, eph)
        fe = rec.final_elements
        print(f"{label}: {rec.status}, flight {rec.flight_time_s / 86400.0:.3f} d, "
              f"mass ratio {rec.mass_ratio_final:.4f}, "
              f"final p {fe['p_km']:.3f} km, e {fe['e']:.2e}, i {fe['i_deg']:.4f} deg")
        if len(rec.qe0):
            print(f"  |qe0| at end {abs(rec.qe0[-1]):.6f}, "
                  f"peak wheel rate {np.rad2deg(np.max(np.abs(rec.wheel_rates))):.0f} deg/s")


if __name__ == "__main__":
    main()
