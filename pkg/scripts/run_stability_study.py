#!/usr/bin/env python3
"""Sweep every catalog decomposition configuration and tabulate the
log-growth fits of the measured stability ratios.

Writes one CSV/JSON pair per configuration into --out and prints a summary
table.  Slow at the default levels (minutes); shrink --levels for a quick
look.
"""

import argparse
import json
from pathlib import Path

from helmdec import verify

CONFIGS = [
    ("unit_cube", ["z=0"], "auto"),
    ("unit_cube", ["boundary"], "auto"),
    ("unit_cube", ["z=0", "z=1"], "auto"),
    ("unit_cube", ["e:x=0,y=0"], "auto"),
    ("unit_cube", ["z=0", "e:y=1,z=1"], "auto"),
    ("three_cube_L", ["concave"], "auto"),
    ("three_cube_L", ["x=0"], "auto"),
    ("pyramid", ["base"], "auto"),
    ("pyramid", ["lat:x-", "lat:x+"], "auto"),
    ("edge_junction_pair", ["x=0"], "auto"),
    ("vertex_junction_pair", ["x=0", "x=2"], "auto"),
]

RATIOS = ["w_h1", "R_scaled", "w_l2_p_h1"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/stability")
    ap.add_argument("--levels", default="1,2,3,4")
    ap.add_argument("--samples", type=int, default=20)
    ap.add_argument("--seed", type=int, default=20260810)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    levels = [int(x) for x in args.levels.split(",")]

    print(f"{'geometry':24s} {'trace':28s} {'ratio':10s} "
          f"{'a':>8s} {'b':>8s} {'resid':>7s} {'log?':>5s} verdict")
    for geometry, spec, route in CONFIGS:
        for key in RATIOS:
            rep = verify.sweep(geometry, spec, route, levels, args.samples,
                               args.seed, key)
            tag = f"{geometry}__{'+'.join(spec)}__{key}".replace("=", "")
            tag = "".join(c if c.isalnum() or c in "+_-" else "-" for c in tag)
            (out / f"{tag}.csv").write_text(rep.to_csv())
            (out / f"{tag}.json").write_text(rep.to_json() + "\n")
            print(f"{geometry:24s} {','.join(spec):28s} {key:10s} "
                  f"{rep.fit[0]:8.3f} {rep.fit[1]:+8.4f} {rep.fit_residual:7.3f} "
                  f"{'no' if rep.no_log_claim else 'yes':>5s} {rep.verdict}")
    print("\nverdict policy: residual <= 0.2, and |b| <= 0.1*a for no-log "
          "claims.  A FAIL with b < 0 means the ratio is still decreasing "
          "toward its constant at these levels (bounded, claim consistent); "
          "more samples per level flatten the max statistic.")


if __name__ == "__main__":
    main()
