"""Periodic transmission schedules over a shared collision channel.

N sensors share one channel in slotted time.  A schedule fixes, for each slot
of a period T, which sensors transmit; a packet gets through only when its
sender is the sole transmitter in the slot.  The long-run estimation cost of
a reception pattern depends only on the cyclic gap structure between
receptions: a sensor that last received t slots ago carries covariance
h^t(P_bar), so the per-period cost is the gap histogram weighted by the
trace ladder.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass
from fractions import Fraction
from math import inf, isinf
from typing import Sequence

from .errors import BudgetError, ValidationError, resolve_budget
from .lti_estimation import LinearSystem, SteadyState, steady_state


def _check_binary_rows(rows, period, context="schedule"):
    for i, row in enumerate(rows):
        if len(row) != period:
            raise ValidationError(
                f"{context}: row {i} has length {len(row)}, expected {period}")
        for k, v in enumerate(row):
            if v not in (0, 1):
                raise ValidationError(
                    f"{context}: row {i} slot {k} is {v!r}, expected 0 or 1")


@dataclass(frozen=True)
class Schedule:
    """Binary transmission policies: rows[i][k] = 1 iff sensor i transmits
    in slot k of the cyclic period."""

    period: int
    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.period < 1:
            raise ValidationError(f"period must be >= 1, got {self.period}")
        if not self.rows:
            raise ValidationError("schedule needs at least one sensor row")
        _check_binary_rows(self.rows, self.period)
        object.__setattr__(self, "rows",
                           tuple(tuple(int(v) for v in row) for row in self.rows))

    @property
    def n_sensors(self) -> int:
        return len(self.rows)

    @property
    def is_exclusive(self) -> bool:
        """True when every slot has exactly one transmitter."""
        return all(sum(row[k] for row in self.rows) == 1 for k in range(self.period))

    def require_exclusive(self):
        if not self.is_exclusive:
            raise ValidationError(
                "operation requires an exclusive schedule "
                "(exactly one transmitter per slot)")

    def duty_factors(self) -> list[Fraction]:
        return [duty_factor(row) for row in self.rows]

    def to_dict(self) -> dict:
        return {"T": self.period, "rows": [list(row) for row in self.rows]}

    @classmethod
    def from_dict(cls, doc: dict) -> "Schedule":
        if not isinstance(doc, dict) or "T" not in doc or "rows" not in doc:
            raise ValidationError('schedule document needs keys "T" and "rows"')
        return cls(period=int(doc["T"]), rows=tuple(tuple(r) for r in doc["rows"]))


def save_schedule(sched: Schedule, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(sched.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_schedule(source) -> Schedule:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            return Schedule.from_dict(json.load(fh))
    return Schedule.from_dict(json.load(source))


def duty_factor(row: Sequence[int]) -> Fraction:
    """Fraction of slots used by one policy row, in lowest terms."""
    if len(row) == 0:
        raise ValidationError("duty factor of an empty row is undefined")
    ones = sum(1 for v in row if v == 1)
    if ones + sum(1 for v in row if v == 0) != len(row):
        raise ValidationError("policy rows must be 0/1 valued")
    return Fraction(ones, len(row))


class GapHistogram:
    """Cyclic reception-gap counts for one sensor.

    counts[t] is the number of slots whose most recent reception lies t
    slots in the past (t = 0 marks the reception slots themselves).  The
    all-idle row maps to the distinguished never-received histogram, which
    has no counts at all.
    """

    def __init__(self, counts: Sequence[int], period: int):
        self.counts = tuple(int(c) for c in counts)
        self.period = int(period)
        if self.counts:
            if sum(self.counts) != self.period:
                raise ValidationError(
                    f"gap counts sum to {sum(self.counts)}, expected {self.period}")
            for t in range(1, len(self.counts)):
                if self.counts[t] > self.counts[t - 1]:
                    raise ValidationError("gap counts must be nonincreasing")

    @property
    def received(self) -> int:
        return self.counts[0] if self.counts else 0

    @property
    def never_received(self) -> bool:
        return not self.counts

    def count(self, t: int) -> int:
        return self.counts[t] if 0 <= t < len(self.counts) else 0

    def __iter__(self):
        return iter(self.counts)

    def __eq__(self, other):
        return (isinstance(other, GapHistogram)
                and self.counts == other.counts and self.period == other.period)

    def __repr__(self):
        if self.never_received:
            return f"GapHistogram(never received, period={self.period})"
        return f"GapHistogram({list(self.counts)}, period={self.period})"


def gap_histogram(reception_row: Sequence[int]) -> GapHistogram:
    """Histogram of cyclic distances to the most recent reception."""
    T = len(reception_row)
    if T == 0:
        raise ValidationError("reception row must be nonempty")
    _check_binary_rows([reception_row], T, context="reception row")
    row = [int(v) for v in reception_row]
    if not any(row):
        return GapHistogram((), T)
    counts: dict[int, int] = {}
    for k in range(T):
        t = 0
        while row[(k - t) % T] == 0:
            t += 1
        counts[t] = counts.get(t, 0) + 1
    return GapHistogram([counts.get(t, 0) for t in range(max(counts) + 1)], T)


@dataclass(frozen=True)
class CostReport:
    """Per-sensor long-run average covariance traces.

    Divergent sensors (zero receptions per period) carry the distinguished
    value inf, never a large finite float; the total is divergent exactly
    when some sensor is.
    """

    per_sensor: tuple[float, ...]

    @property
    def total(self) -> float:
        return sum(self.per_sensor)

    @property
    def divergent(self) -> tuple[bool, ...]:
        return tuple(isinf(v) for v in self.per_sensor)

    @property
    def any_divergent(self) -> bool:
        return any(self.divergent)

    def to_rows(self) -> list[dict]:
        return [{"sensor_index": i,
                 "average_trace": "" if isinf(v) else repr(v),
                 "divergent": bool(isinf(v))}
                for i, v in enumerate(self.per_sensor)]

    def write_csv(self, target):
        import csv
        own = isinstance(target, (str, os.PathLike))
        fh = open(target, "w", newline="", encoding="utf-8") if own else target
        try:
            w = csv.DictWriter(fh, fieldnames=["sensor_index", "average_trace", "divergent"])
            w.writeheader()
            for row in self.to_rows():
                w.writerow(row)
        finally:
            if own:
                fh.close()


def average_cost(receptions: Sequence[Sequence[int]],
                 ladders: Sequence[SteadyState]) -> CostReport:
    """Exact long-run average trace from cyclic reception patterns.

    receptions[i] is sensor i's per-slot reception indicator over one
    period; ladders[i] prices gaps.  A sensor that never receives is
    divergent (its covariance grows without bound for unstable dynamics).
    """
    if len(receptions) != len(ladders):
        raise ValidationError(
            f"got {len(receptions)} reception rows for {len(ladders)} ladders")
    per = []
    for row, lad in zip(receptions, ladders):
        hist = gap_histogram(row)
        if hist.never_received:
            per.append(inf)
            continue
        total = 0.0
        for t, c in enumerate(hist.counts):
            if c:
                total += c * lad.trace(t)
        per.append(total / hist.period)
    return CostReport(tuple(per))


def reception_from_schedule(sched: Schedule) -> list[list[int]]:
    """Collision-channel outcome of a schedule: sensor i receives in slot k
    iff it transmits there and nobody else does."""
    out = []
    for i, row in enumerate(sched.rows):
        lam = []
        for k in range(sched.period):
            ok = row[k]
            if ok:
                for j, other in enumerate(sched.rows):
                    if j != i and other[k]:
                        ok = 0
                        break
            lam.append(ok)
        out.append(lam)
    return out


def _flat_key(cols: tuple[int, ...], n_sensors: int) -> bytes:
    """Row-major flattened 0/1 matrix of a columnwise assignment, as bytes
    (lexicographic comparison on bytes matches the flattened-matrix order)."""
    T = len(cols)
    return bytes(1 if cols[k] == i else 0 for i in range(n_sensors) for k in range(T))


def _canonical_rotation(cols: tuple[int, ...], n_sensors: int):
    """The cyclic rotation whose flattened matrix is lexicographically
    smallest; returns (key, rotated assignment)."""
    best_key = None
    best = cols
    T = len(cols)
    for r in range(T):
        rot = tuple(cols[(k + r) % T] for k in range(T))
        key = _flat_key(rot, n_sensors)
        if best_key is None or key < best_key:
            best_key, best = key, rot
    return best_key, best


def optimal_schedule_search(systems: Sequence[LinearSystem],
                            T_candidates: Sequence[int],
                            ladders: Sequence[SteadyState] | None = None,
                            budget: int | None = None) -> tuple[Schedule, CostReport]:
    """Exhaustive search for the cost-minimizing exclusive schedule.

    Enumerates all columnwise transmitter assignments for each candidate
    period (N^T of them, deduplicated up to cyclic rotation), scores each by
    average_cost, and returns the minimum.  Ties break toward the
    lexicographically smallest flattened policy matrix, then the smallest
    period.  The total enumeration size is capped by the budget
    (SCHEDSEC_BUDGET); exceeding it raises BudgetError.
    """
    N = len(systems)
    if N < 1:
        raise ValidationError("need at least one system")
    cands = sorted(set(int(T) for T in T_candidates))
    if not cands:
        raise ValidationError("T_candidates must be nonempty")
    for T in cands:
        if T < N:
            raise ValidationError(
                f"period {T} cannot give all {N} sensors a slot; use T >= {N}")
    limit = resolve_budget(budget)
    total_size = sum(N ** T for T in cands)
    if total_size > limit:
        raise BudgetError(
            f"enumerating {total_size} assignments exceeds the budget {limit}; "
            f"drop the largest periods or raise SCHEDSEC_BUDGET")
    if ladders is None:
        ladders = [steady_state(s) for s in systems]
    best = None  # (total, flat_key, T, schedule, report)
    for T in cands:
        seen = set()
        for cols in itertools.product(range(N), repeat=T):
            key, canon = _canonical_rotation(cols, N)
            if key in seen:
                continue
            seen.add(key)
            sched = Schedule(period=T, rows=tuple(
                tuple(1 if canon[k] == i else 0 for k in range(T)) for i in range(N)))
            report = average_cost(reception_from_schedule(sched), ladders)
            entry = (report.total, key, T)
            if best is None or entry < best[:3]:
                best = (*entry, sched, report)
    assert best is not None
    return best[3], best[4]
