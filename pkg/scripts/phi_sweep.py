#!/usr/bin/env python3
"""Sweep the backward-shift offset phi for BB-BSC on the HSDPA-like preset.

Larger offsets give the buffer controller more slack, so switching should
fall while average quality rises slightly.
"""

import argparse
import sys

from bscsim.metrics import aggregate
from bscsim.scenario import load_config, override, run_scenario


def sweep(preset, policy, phis, seeds):
    base = override(load_config(preset), "policy", policy)
    out = []
    for phi in phis:
        cfg = override(base, "phi", phi)
        runs = [run_scenario(cfg, s).metrics for s in range(seeds)]
        out.append((phi, aggregate(runs, range(seeds)).mean))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="hsdpa")
    ap.add_argument("--policy", default="bb-bsc")
    ap.add_argument("--phi", type=int, nargs="+", default=[2, 4, 6, 8, 10])
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args(argv)

    print(f"{'phi':>4} {'Kbps':>8} {'switches':>9} {'stalls':>7} {'startup s':>10}")
    for phi, m in sweep(args.preset, args.policy, args.phi, args.seeds):
        print(f"{phi:>4d} {m.average_quality / 1e3:>8.1f} {m.switch_count:>9.2f} "
              f"{m.interruption_count:>7.2f} {m.startup_delay:>10.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
