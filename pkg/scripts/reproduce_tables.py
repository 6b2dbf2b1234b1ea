#!/usr/bin/env python3
"""Regenerate the policy comparison tables from the bundled presets.

The three synthetic scenarios compare TB-BSC against TB-SVC; the HSDPA-like
preset compares the buffer-based family against the throughput-based one.
Each row is a mean over the preset's seeds.

Usage::

    python scripts/reproduce_tables.py --seeds 100 --csv out/tables.csv
"""

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor

from bscsim.metrics import aggregate
from bscsim.scenario import load_config, override, run_scenario

TABLES = (
    ("scenario1", ("tb-bsc", "tb-svc")),
    ("scenario2", ("tb-bsc", "tb-svc")),
    ("scenario3", ("tb-bsc", "tb-svc")),
    ("hsdpa", ("bb-bsc", "bba-0", "bba-1", "tb-bsc")),
)

COLUMNS = ("preset", "policy", "runs", "quality_kbps", "variance_kbps2", "switches",
           "interruptions", "stall_s", "startup_s")


def _one(args):
    preset, policy, seed = args
    cfg = override(load_config(preset), "policy", policy)
    return run_scenario(cfg, seed).metrics


def table_rows(seeds=None, workers=1):
    jobs = []
    for preset, policies in TABLES:
        cfg = load_config(preset)
        chosen = cfg.seeds if seeds is None else tuple(range(seeds))
        for policy in policies:
            jobs.append((preset, policy, chosen))
    flat = [(p, pol, s) for p, pol, chosen in jobs for s in chosen]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_one, flat, chunksize=8))
    else:
        results = [_one(j) for j in flat]
    rows, i = [], 0
    for preset, policy, chosen in jobs:
        rep = aggregate(results[i:i + len(chosen)], chosen)
        i += len(chosen)
        m = rep.mean
        rows.append((preset, policy, rep.count, m.average_quality / 1e3, m.quality_variance / 1e6,
                     m.switch_count, m.interruption_count, m.total_stall_time, m.startup_delay))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=None, help="override the preset seed count")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", default=None, help="also write the rows to this CSV file")
    args = ap.parse_args(argv)

    rows = table_rows(args.seeds, args.workers)
    print(f"{'preset':<10} {'policy':<7} {'runs':>4} {'Kbps':>8} {'var':>10} {'switch':>7} "
          f"{'stalls':>6} {'stall s':>8} {'start s':>7}")
    for r in rows:
        print(f"{r[0]:<10} {r[1]:<7} {r[2]:>4d} {r[3]:>8.1f} {r[4]:>10.1f} {r[5]:>7.2f} "
              f"{r[6]:>6.2f} {r[7]:>8.2f} {r[8]:>7.2f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
