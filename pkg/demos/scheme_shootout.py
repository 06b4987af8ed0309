#!/usr/bin/env python3
"""End-to-end scheme comparison on the wide-area topology.

Runs the same Poisson workload under each scheme and prints the headline
numbers the CSV reports carry.  Pass a seed to change the workload
(default 0); the numbers are exactly reproducible per seed.
"""

import sys

from treecast import engine as eng
from treecast import metrics as mt

SCHEMES = ("dccast", "quickcast_np", "quickcast_two", "quickcast")


def main(seed=0):
    print(f"gscale, lambda=1.0, 10 receivers, lognormal sizes, seed {seed}")
    print(f"{'scheme':<14} {'mean ct':>8} {'p99 ct':>8} {'max ct':>8} "
          f"{'bytes':>12} {'overhead':>9} {'tables':>7}")
    for scheme in SCHEMES:
        cfg = eng.SimConfig(topology="gscale", scheme=scheme, receivers=10,
                            arrival_rate=1.0, size_dist="lognormal",
                            size_sigma=2.0, slots=600, warmup=60, seed=seed)
        log = eng.run(cfg)
        rep = mt.build_report(log)
        print(f"{scheme:<14} {rep.mean_ct:>8.1f} {rep.p99_ct:>8.1f} "
              f"{rep.max_ct:>8.0f} {rep.total_bytes:>12.1f} "
              f"{rep.bw_overhead_vs_single_tree:>9.3f} {rep.max_group_entries:>7d}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
