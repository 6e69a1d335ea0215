#!/usr/bin/env python3
"""Regenerate the checked-in Earth/Sun state tables from the circular
Earth-Moon + Sun motion model (the same model the CR3BP Gateway mapping
uses, keeping third-body forcing and the Gateway trajectory consistent)."""

import argparse
from pathlib import Path

from nrho2llo.constants import EPOCH_REF_S
from nrho2llo.ephemeris import save_table, synthetic_earth_table, synthetic_sun_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=Path(__file__).resolve().parents[1] / "data")
    ap.add_argument("--start-s", type=float, default=EPOCH_REF_S - 5 * 86400.0)
    ap.add_argument("--end-s", type=float, default=EPOCH_REF_S + 125 * 86400.0)
    ap.add_argument("--step-s", type=float, default=3600.0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_table(synthetic_earth_table(args.start_s, args.end_s, args.step_s),
               out / "earth_mci.csv")
    save_table(synthetic_sun_table(args.start_s, args.end_s, args.step_s),
               out / "sun_mci.csv")
    print(f"wrote {out / 'earth_mci.csv'} and {out / 'sun_mci.csv'}")


if __name__ == "__main__":
    main()
