#!/usr/bin/env python3
"""Survey minimum-spoof blocking attacks over random exclusive schedules.

Draws random columnwise transmitter assignments for each (sensors, period)
pair, solves each with both the branch-and-bound solver and the brute-force
oracle, and reports how often a blocking attack exists, the distribution of
minimal spoof counts, and the two solvers' runtimes.  Any disagreement is a
bug and aborts the sweep.
"""

import argparse
import time
from collections import Counter

import numpy as np

from schedsec.attack import bnb_optimal_attack, brute_force_optimal_attack
from schedsec.scheduling import Schedule


def random_exclusive(rng, n_sensors, period) -> Schedule:
    cols = rng.integers(0, n_sensors, size=period)
    rows = [[0] * period for _ in range(n_sensors)]
    for k, i in enumerate(cols):
        rows[int(i)][k] = 1
    return Schedule(period=period, rows=tuple(tuple(r) for r in rows))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=50,
                    help="schedules per (sensors, period) pair")
    ap.add_argument("--sensors", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--periods", type=int, nargs="+", default=[3, 4, 5, 6])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{args.trials} random schedules per cell, seed {args.seed}")
    print(f"{'N':>3} {'T':>3} {'blocking':>9} {'spoof counts':>24} "
          f"{'bnb ms':>8} {'brute ms':>9}")
    for N in args.sensors:
        for T in args.periods:
            counts = Counter()
            blocking = 0
            t_bnb = t_brute = 0.0
            for _ in range(args.trials):
                sched = random_exclusive(rng, N, T)
                t0 = time.perf_counter()
                a = bnb_optimal_attack(sched)
                t1 = time.perf_counter()
                b = brute_force_optimal_attack(sched)
                t2 = time.perf_counter()
                t_bnb += t1 - t0
                t_brute += t2 - t1
                if a.blocking != b.blocking or a.spoofed_count != b.spoofed_count:
                    raise AssertionError(
                        f"solver disagreement on rows {sched.rows}: "
                        f"bnb {a.spoofed_count}, brute {b.spoofed_count}")
                if a.blocking:
                    blocking += 1
                    counts[a.spoofed_count] += 1
            dist = " ".join(f"{k}:{v}" for k, v in sorted(counts.items()))
            print(f"{N:>3} {T:>3} {blocking:>6}/{args.trials:<3}"
                  f" {dist:>23} {1000 * t_bnb / args.trials:>8.2f} "
                  f"{1000 * t_brute / args.trials:>9.2f}")


if __name__ == "__main__":
    main()
