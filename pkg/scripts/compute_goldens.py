#!/usr/bin/env python3
"""Recompute every frozen constant used by the test suite.

Run this after changing numerical code to see which golden values moved.
Output is deterministic, one labelled value per line.
"""

import argparse
from importlib import resources

import numpy as np

from schedsec.attack import bnb_optimal_attack, brute_force_optimal_attack
from schedsec.lti_estimation import load_systems, steady_state
from schedsec.protocol_sequences import bounds, construct_shift_invariant
from schedsec.scheduling import (average_cost, optimal_schedule_search,
                                 reception_from_schedule)


def bundled_systems():
    ref = resources.files("schedsec") / "data" / "three_sensor_study.json"
    with ref.open("r", encoding="utf-8") as fh:
        return load_systems(fh)


def main():
    argparse.ArgumentParser(description=__doc__).parse_args()
    systems = bundled_systems()
    states = [steady_state(sys) for sys in systems]

    print("# steady states")
    for i, st in enumerate(states):
        print(f"P_bar[{i}] =")
        for row in st.P_bar:
            print("    [" + ", ".join(repr(float(v)) for v in row) + "]")
        print(f"trace[{i}] = {float(np.trace(st.P_bar))!r}  "
              f"(residual {st.residual:.3g}, {st.iterations} iterations)")

    print("\n# trace ladder, sensor 0, gaps 0..8")
    for t, v in enumerate(states[0].ladder(8)):
        print(f"L0({t}) = {v!r}")

    print("\n# optimal period-3 schedule")
    sched, report = optimal_schedule_search(systems, [3], ladders=states)
    for i, row in enumerate(sched.rows):
        print(f"row[{i}] = {list(row)}")
    print(f"cost = {report.total!r}")

    print("\n# minimum-spoof blocking attack on that schedule")
    bnb = bnb_optimal_attack(sched)
    brute = brute_force_optimal_attack(sched)
    print(f"bnb:   taus = {list(bnb.taus.taus)}, spoofed = {bnb.spoofed_count}")
    print(f"brute: taus = {list(brute.taus.taus)}, spoofed = {brute.spoofed_count}")

    print("\n# defense cost bounds (bundled ladders)")
    for label, factors in (("same-duty (1/3)^3", [(1, 3)] * 3),
                           ("shortest-period (1/2)^3", [(1, 2)] * 3)):
        ps = construct_shift_invariant(factors)
        br = bounds(ps, states)
        nominal = average_cost(reception_from_schedule(ps.to_schedule()),
                               states).total
        print(f"{label}: period {ps.period}, lower = {br.lower!r}, "
              f"upper = {br.upper!r}, zero-shift cost = {nominal!r}")


if __name__ == "__main__":
    main()
