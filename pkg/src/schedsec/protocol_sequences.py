"""Shift-invariant protocol sequences as a clock-spoofing countermeasure.

A set of binary policy rows is shift invariant when the Hamming
cross-correlation of every subset of rows does not depend on the relative
cyclic shifts.  Under such a set, a clock-shift attacker cannot change how
often any sensor gets through: each sensor's reception count per period is
pinned at n_i * prod_{j != i} (d_j - n_j), whatever the shifts are.  What
the attacker can still do is cluster those receptions, which moves the cost
between the closed-form cost bounds computed by `bounds`.

Sets with prescribed rational duty factors n_i / d_i are built by
interleaving: sensor i cycles through D_{i-1} = d_1 ... d_{i-1} short
binary vectors of length d_i and weight n_i, writing one symbol of each in
round-robin order.  The result has period exactly D = d_1 ... d_N.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (BudgetError, SchedSecError, ValidationError,
                     resolve_budget)
from .scheduling import Schedule

_VERIFY_SAMPLES = 2000


@dataclass(frozen=True)
class RationalDutyFactor:
    """Reduced rational duty factor n/d with 0 < n < d."""

    n: int
    d: int

    def __post_init__(self):
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "d", int(self.d))
        if not 0 < self.n < self.d:
            raise ValidationError(
                f"duty factor needs 0 < n < d, got {self.n}/{self.d}")
        if math.gcd(self.n, self.d) != 1:
            raise ValidationError(
                f"duty factor {self.n}/{self.d} is not in lowest terms")

    @property
    def as_fraction(self) -> Fraction:
        return Fraction(self.n, self.d)

    @classmethod
    def coerce(cls, value) -> "RationalDutyFactor":
        if isinstance(value, RationalDutyFactor):
            return value
        if isinstance(value, Fraction):
            return cls(value.numerator, value.denominator)
        if isinstance(value, (tuple, list)) and len(value) == 2:
            frac = Fraction(int(value[0]), int(value[1]))
            return cls(frac.numerator, frac.denominator)
        raise ValidationError(f"cannot interpret {value!r} as a duty factor")


@dataclass(frozen=True)
class PolicySet:
    """Periodic policy rows carrying their design duty factors.

    Row i must use exactly period * n_i / d_i slots, and the period must be
    a multiple of d_1 ... d_N (the minimum possible for a shift-invariant
    set with these factors).
    """

    period: int
    rows: tuple[tuple[int, ...], ...]
    factors: tuple[RationalDutyFactor, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows",
                           tuple(tuple(int(v) for v in row) for row in self.rows))
        object.__setattr__(self, "factors",
                           tuple(RationalDutyFactor.coerce(f) for f in self.factors))
        if len(self.rows) != len(self.factors):
            raise ValidationError(
                f"{len(self.rows)} rows for {len(self.factors)} duty factors")
        denom_product = math.prod(f.d for f in self.factors)
        if self.period % denom_product != 0:
            raise ValidationError(
                f"period {self.period} is not a multiple of the denominator "
                f"product {denom_product}")
        for i, (row, f) in enumerate(zip(self.rows, self.factors)):
            if len(row) != self.period:
                raise ValidationError(
                    f"row {i} has length {len(row)}, expected {self.period}")
            bad = [v for v in row if v not in (0, 1)]
            if bad:
                raise ValidationError(f"row {i} contains non-binary entries")
            want = self.period * f.n // f.d
            if sum(row) != want:
                raise ValidationError(
                    f"row {i} has weight {sum(row)}, expected {want} "
                    f"for duty factor {f.n}/{f.d}")

    @property
    def n_sensors(self) -> int:
        return len(self.rows)

    def to_schedule(self) -> Schedule:
        return Schedule(period=self.period, rows=self.rows)

    def to_dict(self) -> dict:
        return {"T": self.period,
                "rows": [list(r) for r in self.rows],
                "factors": [{"n": f.n, "d": f.d} for f in self.factors]}

    @classmethod
    def from_dict(cls, doc: dict) -> "PolicySet":
        for key in ("T", "rows", "factors"):
            if key not in doc:
                raise ValidationError(f'policy document needs key "{key}"')
        return cls(period=int(doc["T"]),
                   rows=tuple(tuple(r) for r in doc["rows"]),
                   factors=tuple(RationalDutyFactor(f["n"], f["d"])
                                 for f in doc["factors"]))


def save_policy_set(ps: PolicySet, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ps.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_policy_set(source) -> PolicySet:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            return PolicySet.from_dict(json.load(fh))
    return PolicySet.from_dict(json.load(source))


def _rows_of(obj):
    """Rows and period of a PolicySet, Schedule, or plain row container."""
    if isinstance(obj, (PolicySet, Schedule)):
        return obj.rows, obj.period
    rows = tuple(tuple(int(v) for v in row) for row in obj)
    if not rows:
        raise ValidationError("need at least one row")
    period = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != period:
            raise ValidationError(f"row {i} has length {len(row)}, expected {period}")
        if any(v not in (0, 1) for v in row):
            raise ValidationError(f"row {i} contains non-binary entries")
    return rows, period


def _check_tuple(U, shifts, n_rows, period):
    if not U:
        raise ValidationError("sensor tuple must be nonempty")
    U = tuple(int(i) for i in U)
    if any(not 0 <= i < n_rows for i in U):
        raise ValidationError(f"sensor tuple {U} out of range for {n_rows} rows")
    if any(U[a] >= U[a + 1] for a in range(len(U) - 1)):
        raise ValidationError(f"sensor tuple {U} must be strictly ascending")
    shifts = tuple(int(t) for t in shifts)
    if len(shifts) != len(U):
        raise ValidationError(
            f"{len(shifts)} shifts for a {len(U)}-sensor tuple")
    if any(not 0 <= t < period for t in shifts):
        raise ValidationError(f"shifts {shifts} out of range for period {period}")
    return U, shifts


def hamming_cross_correlation(policies, U, shifts) -> int:
    """Number of slots in which every listed row, cyclically shifted by its
    own offset, transmits simultaneously."""
    rows, period = _rows_of(policies)
    U, shifts = _check_tuple(U, shifts, len(rows), period)
    total = 0
    for k in range(period):
        for i, t in zip(U, shifts):
            if not rows[i][(k + t) % period]:
                break
        else:
            total += 1
    return total


def throughput(policies, U, shifts, position: int) -> Fraction:
    """Exact fraction of slots in which member `position` of the tuple
    transmits while every other member stays silent."""
    rows, period = _rows_of(policies)
    U, shifts = _check_tuple(U, shifts, len(rows), period)
    if not 0 <= position < len(U):
        raise ValidationError(
            f"position {position} out of range for a {len(U)}-sensor tuple")
    count = 0
    for k in range(period):
        me = U[position]
        t_me = shifts[position]
        if not rows[me][(k + t_me) % period]:
            continue
        for pos, (i, t) in enumerate(zip(U, shifts)):
            if pos != position and rows[i][(k + t) % period]:
                break
        else:
            count += 1
    return Fraction(count, period)


@dataclass(frozen=True)
class InvarianceReport:
    """Outcome of a shift-invariance check; truthy iff invariant.

    exhaustive is False when some subset was only sampled, in which case a
    True verdict means "sampled, not proven".
    """

    invariant: bool
    witness: tuple | None
    exhaustive: bool

    def __bool__(self):
        return self.invariant


def is_shift_invariant(policies, budget: int | None = None,
                       samples: int | None = None,
                       seed: int = 0) -> InvarianceReport:
    """Check that every subset's cross-correlation ignores relative shifts.

    By cyclic reindexing of the slot counter, shifting all members of a
    subset by the same amount never changes the correlation, so the first
    member's shift is fixed at zero and only the remaining D^{|U|-1}
    combinations are enumerated (that reduction has its own unit test).
    Work per subset is capped by the budget; beyond it, pass `samples` to
    fall back to seeded random tuples, flagged by exhaustive=False.
    """
    rows, period = _rows_of(policies)
    N = len(rows)
    limit = resolve_budget(budget)
    rng = np.random.default_rng(seed)
    exhaustive = True
    subsets = sorted(itertools.chain.from_iterable(
        itertools.combinations(range(N), size) for size in range(1, N + 1)))
    for U in subsets:
        if len(U) == 1:
            continue  # a single row's weight cannot depend on its shift
        reference = hamming_cross_correlation(rows, U, (0,) * len(U))
        work = period ** len(U)
        if work <= limit:
            tuples = itertools.product(range(period), repeat=len(U) - 1)
        elif samples is not None:
            tuples = (tuple(int(v) for v in rng.integers(0, period, size=len(U) - 1))
                      for _ in range(samples))
            exhaustive = False
        else:
            raise BudgetError(
                f"exhaustive invariance check for subset {U} needs {work} "
                f"evaluations, above the budget {limit}; pass samples=... "
                f"for a sampled check")
        for rest in tuples:
            shifts = (0,) + tuple(rest)
            if hamming_cross_correlation(rows, U, shifts) != reference:
                return InvarianceReport(False, (U, shifts), exhaustive)
    return InvarianceReport(True, None, exhaustive)


def _rotate(vec, r):
    d = len(vec)
    return [vec[(k + r) % d] for k in range(d)]


def construct_shift_invariant(factors, interleavings=None,
                              verify: bool = True) -> PolicySet:
    """Build a shift-invariant policy set with the given duty factors.

    Sensor i's row interleaves D_{i-1} = d_1 ... d_{i-1} binary vectors of
    length d_i and weight n_i, one symbol from each in turn, then repeats to
    the common period D = d_1 ... d_N.  By default vector j is the cyclic
    rotation by (j - 1) of the base vector with ones in its last n_i
    positions; pass `interleavings` (one list of vectors per sensor) to
    choose them explicitly.  The result is checked to be shift invariant
    before it is returned.
    """
    fs = tuple(RationalDutyFactor.coerce(f) for f in factors)
    if not fs:
        raise ValidationError("need at least one duty factor")
    D = math.prod(f.d for f in fs)
    rows = []
    D_prev = 1
    for i, f in enumerate(fs):
        if interleavings is None:
            base = [0] * (f.d - f.n) + [1] * f.n
            vecs = [_rotate(base, j % f.d) for j in range(D_prev)]
        else:
            vecs = [list(v) for v in interleavings[i]]
            if len(vecs) != D_prev:
                raise ValidationError(
                    f"sensor {i} needs {D_prev} interleaving vectors, "
                    f"got {len(vecs)}")
            for j, v in enumerate(vecs):
                if len(v) != f.d:
                    raise ValidationError(
                        f"sensor {i} vector {j} has length {len(v)}, "
                        f"expected {f.d}")
                if any(x not in (0, 1) for x in v):
                    raise ValidationError(
                        f"sensor {i} vector {j} is not binary")
                if sum(v) != f.n:
                    raise ValidationError(
                        f"sensor {i} vector {j} has weight {sum(v)}, "
                        f"expected {f.n}")
        short = []
        for q in range(f.d):
            for r in range(D_prev):
                short.append(vecs[r][q])
        reps = D // len(short)
        rows.append(tuple(short * reps))
        D_prev *= f.d
    ps = PolicySet(period=D, rows=tuple(rows), factors=fs)
    if verify:
        try:
            report = is_shift_invariant(ps)
        except BudgetError:
            report = is_shift_invariant(ps, samples=_VERIFY_SAMPLES, seed=0)
        if not report:
            raise SchedSecError(
                f"constructed set failed its invariance check at witness "
                f"{report.witness}; this is a bug")
    return ps


def shortest_period_policies(n_sensors: int, verify: bool = True) -> PolicySet:
    """The shortest shift-invariant set: every duty factor 1/2, period 2^N."""
    if n_sensors < 1:
        raise ValidationError(f"need at least one sensor, got {n_sensors}")
    return construct_shift_invariant([(1, 2)] * n_sensors, verify=verify)


@dataclass(frozen=True)
class BoundsReport:
    """Worst- and best-case long-run cost of a shift-invariant defense.

    per_sensor_receptions[i] is the attack-independent number of packets
    sensor i receives per period.  lower corresponds to evenly spread
    receptions, upper to receptions bunched back to back.
    """

    lower: float
    upper: float
    per_sensor_receptions: tuple[int, ...]
    period: int

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise ValidationError(
                f"lower bound {self.lower} exceeds upper bound {self.upper}")


def bounds(factors, ladders) -> BoundsReport:
    """Cost bounds for a constructed defense with the given duty factors.

    `factors` may be a PolicySet or a list of duty factors; `ladders` are
    the per-sensor steady states.  Sensor i receives exactly
    N_i = n_i * prod_{j != i} (d_j - n_j) packets per period D = prod d_j
    under every shift tuple; the bounds price the extreme gap layouts of
    those receptions.
    """
    if isinstance(factors, PolicySet):
        fs = factors.factors
    else:
        fs = tuple(RationalDutyFactor.coerce(f) for f in factors)
    if len(fs) != len(ladders):
        raise ValidationError(
            f"{len(fs)} duty factors for {len(ladders)} ladders")
    D = math.prod(f.d for f in fs)
    receptions = []
    lower = 0.0
    upper = 0.0
    for i, (f, lad) in enumerate(zip(fs, ladders)):
        N_i = f.n * math.prod(g.d - g.n for j, g in enumerate(fs) if j != i)
        receptions.append(N_i)
        q, r = divmod(D, N_i)
        lower += N_i * sum(lad.trace(t) for t in range(q)) + r * lad.trace(q)
        upper += N_i * lad.trace(0) + sum(lad.trace(t) for t in range(1, D - N_i + 1))
    return BoundsReport(lower=lower / D, upper=upper / D,
                        per_sensor_receptions=tuple(receptions), period=D)
