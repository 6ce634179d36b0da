"""Leg damping that gives the experimental cycle efficiency.

Solves for the body-foot damping b_B at which an unpowered hop from 1.5 m
has cycle efficiency 0.425 (the middle of the measured 0.35-0.5 band).

    python3 scripts/calibrate_losses.py [--target 0.425] [--drop 1.5]
"""

from __future__ import annotations

import argparse
from dataclasses import replace

from scipy.optimize import brentq

from hopdyn.core import default_params
from hopdyn.dynamics import SimState, simulate
from hopdyn.energy import cycle_efficiency, cycle_records


def efficiency(b_B: float, drop: float) -> float:
    p = replace(default_params(), b_B=b_B)
    traj = simulate(p, SimState.at_rest(drop, p), n_hops=1)
    return cycle_efficiency(cycle_records(traj, p)[0])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--target", type=float, default=0.425)
    ap.add_argument("--drop", type=float, default=1.5)
    args = ap.parse_args()
    b = brentq(lambda x: efficiency(x, args.drop) - args.target, 0.0, 40.0, xtol=1e-4)
    print(f"b_B = {b:.4f} N s/m gives eta_cyc = {efficiency(b, args.drop):.4f} at {args.drop} m")
    print(f"b_B = 5.47 (shipped) gives eta_cyc = {efficiency(5.47, args.drop):.4f}")


if __name__ == "__main__":
    main()
