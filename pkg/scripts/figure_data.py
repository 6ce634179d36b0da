"""Regenerate every figure's data set through the command line front end.

    python3 scripts/figure_data.py [OUT_DIR] [--jobs N]

Writes one sub-directory per figure panel group, each with its CSV/JSON
outputs and a run manifest.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from hopdyn.cli import main as hopdyn

RUNS = {
    "accumulation_40pct": ["simulate", "--alpha", "0.4", "--h0", "1", "--hops", "20", "--trace"],
    "no_drag": ["simulate", "--alpha", "0.31", "--h0", "1", "--hops", "50", "--no-drag"],
    "critical_surface": ["critical", "--resolution", "20"],
    "added_mass": ["whatif", "--delta-m", "0.1"],
    "stance_maps": ["stance", "--v-range", "1:8:15", "--theta-range", "0:20:21"],
    "stance_example": ["stance", "--v", "6", "--theta", "10"],
    "protocol_0pct": ["protocol", "--experimental", "--alpha-pct", "0"],
    "protocol_60pct": ["protocol", "--experimental", "--alpha-pct", "60"],
    "protocol_85pct": ["protocol", "--experimental", "--alpha-pct", "85"],
    "elastomer": ["elastomer"],
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", nargs="?", default="figure_data")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    for name, argv in RUNS.items():
        extra = ["--jobs", str(args.jobs)] if argv[0] in ("critical", "stance") else []
        code = hopdyn([*argv, *extra, "--out", str(Path(args.out) / name)])
        print(f"{name}: exit {code}")


if __name__ == "__main__":
    main()
