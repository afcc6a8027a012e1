import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schedsec.errors import BudgetError, ValidationError
from schedsec.scheduling import (CostReport, GapHistogram, Schedule,
                                 average_cost, duty_factor, gap_histogram,
                                 load_schedule, optimal_schedule_search,
                                 reception_from_schedule, save_schedule)

GOLDEN_ROUND_ROBIN_COST = 2.0250433575300404

binary_row = st.lists(st.integers(0, 1), min_size=1, max_size=12)


def test_gap_histogram_hand_values():
    assert gap_histogram([1, 0, 0]).counts == (1, 1, 1)
    assert gap_histogram([1, 0, 1, 0]).counts == (2, 2)
    assert gap_histogram([1, 1, 1]).counts == (3,)
    assert gap_histogram([0, 1, 0, 0, 0]).counts == (1, 1, 1, 1, 1)
    h = gap_histogram([0, 0, 0])
    assert h.never_received
    assert h.counts == ()


def test_gap_histogram_wraps_cyclically():
    # last reception before slot 0 is slot 3 of the previous period
    h = gap_histogram([0, 0, 0, 1])
    assert h.counts == (1, 1, 1, 1)
    assert h.count(0) == 1
    assert h.count(7) == 0


def test_gap_histogram_rejects_non_binary():
    with pytest.raises(ValidationError):
        gap_histogram([0, 2, 0])
    with pytest.raises(ValidationError):
        gap_histogram([0.5, 0.5])


@settings(max_examples=200, deadline=None)
@given(row=binary_row)
def test_gap_histogram_invariants(row):
    h = gap_histogram(row)
    T = len(row)
    if not any(row):
        assert h.never_received
        return
    assert sum(h.counts) == T
    assert h.received == sum(row)
    for t in range(1, len(h.counts)):
        assert h.counts[t] <= h.counts[t - 1]


@settings(max_examples=200, deadline=None)
@given(row=binary_row, r=st.integers(0, 11))
def test_gap_histogram_rotation_invariant(row, r):
    rot = [row[(k + r) % len(row)] for k in range(len(row))]
    assert gap_histogram(rot) == gap_histogram(row)


def test_duty_factor_reduces():
    assert duty_factor([1, 0, 1, 0]) == Fraction(1, 2)
    assert duty_factor([0, 0, 1]) == Fraction(1, 3)
    assert duty_factor([0, 0]) == Fraction(0)


def test_schedule_validation():
    with pytest.raises(ValidationError):
        Schedule(period=2, rows=((0, 2), (1, 0)))
    with pytest.raises(ValidationError):
        Schedule(period=2, rows=((0.5, 0.5),))
    with pytest.raises(ValidationError):
        Schedule(period=3, rows=((0, 1), (1, 0)))
    s = Schedule(period=2, rows=((1, 1), (0, 1)))
    assert not s.is_exclusive
    with pytest.raises(ValidationError):
        s.require_exclusive()


def test_schedule_roundtrip(tmp_path, round_robin):
    path = tmp_path / "sched.json"
    save_schedule(round_robin, path)
    assert load_schedule(path) == round_robin


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 4), T=st.integers(1, 6))
def test_schedule_roundtrip_property(tmp_path_factory, seed, n, T):
    from conftest import random_exclusive_schedule
    rng = np.random.default_rng(seed)
    sched = random_exclusive_schedule(rng, n, T)
    assert Schedule.from_dict(sched.to_dict()) == sched


def test_average_cost_golden(round_robin, study_ladders):
    report = average_cost(reception_from_schedule(round_robin), study_ladders)
    assert report.total == pytest.approx(GOLDEN_ROUND_ROBIN_COST, rel=1e-8)
    assert not report.any_divergent


def test_average_cost_manual_small(study_ladders):
    # single sensor, receive every other slot: J = (L0 + L1) / 2
    lad = study_ladders[0]
    report = average_cost([[1, 0]], [lad])
    assert report.per_sensor[0] == pytest.approx(
        (lad.trace(0) + lad.trace(1)) / 2, rel=1e-12)


def test_average_cost_divergent_flags(study_ladders):
    report = average_cost([[0, 0], [1, 1]], study_ladders[:2])
    assert math.isinf(report.per_sensor[0])
    assert report.divergent == (True, False)
    assert math.isinf(report.total)
    assert report.any_divergent


def test_cost_report_csv(tmp_path, study_ladders):
    report = average_cost([[0, 0], [1, 0]], study_ladders[:2])
    path = tmp_path / "cost.csv"
    report.write_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "sensor_index,average_trace,divergent"
    assert lines[1] == "0,,True"
    val = float(lines[2].split(",")[1])
    assert val == pytest.approx(report.per_sensor[1], rel=1e-15)


def test_reception_drops_collisions():
    sched = Schedule(period=2, rows=((1, 1), (0, 1)))
    assert reception_from_schedule(sched) == [[1, 0], [0, 0]]


def test_optimal_schedule_search_study_instance(study_systems, study_ladders):
    sched, report = optimal_schedule_search(study_systems, [3],
                                            ladders=study_ladders)
    assert sched.rows == ((0, 0, 1), (0, 1, 0), (1, 0, 0))
    assert report.total == pytest.approx(GOLDEN_ROUND_ROBIN_COST, rel=1e-8)


def test_optimal_schedule_search_is_deterministic(study_systems, study_ladders):
    a = optimal_schedule_search(study_systems, [3, 4], ladders=study_ladders)
    b = optimal_schedule_search(study_systems, [4, 3], ladders=study_ladders)
    assert a[0] == b[0]
    assert a[1].total == b[1].total


def test_optimal_schedule_winner_is_uniform(study_systems, study_ladders):
    from conftest import is_uniform_row
    for T in (3, 4, 5):
        sched, _ = optimal_schedule_search(study_systems, [T],
                                           ladders=study_ladders)
        assert sched.is_exclusive
        for row in sched.rows:
            assert is_uniform_row(row)


def test_search_rejects_too_short_period(study_systems, study_ladders):
    with pytest.raises(ValidationError, match="T >= 3"):
        optimal_schedule_search(study_systems, [2], ladders=study_ladders)


def test_search_budget(study_systems, study_ladders):
    with pytest.raises(BudgetError, match="SCHEDSEC_BUDGET"):
        optimal_schedule_search(study_systems, [3], ladders=study_ladders,
                                budget=5)


def test_search_beats_every_explicit_candidate(study_systems, study_ladders):
    from conftest import all_exclusive_schedules
    best, report = optimal_schedule_search(study_systems, [4],
                                           ladders=study_ladders)
    for cand in all_exclusive_schedules(3, 4):
        cost = average_cost(reception_from_schedule(cand), study_ladders).total
        assert report.total <= cost + 1e-12


def test_gap_histogram_repr_and_count():
    h = GapHistogram(counts=(2, 1, 1), period=4)
    assert h.count(0) == 2
    assert h.count(2) == 1
    assert h.count(9) == 0
    assert "GapHistogram" in repr(h)


def test_histogram_sum_rule_matches_cost_definition(study_ladders):
    # cost assembled by hand from the histogram equals average_cost
    lad = study_ladders[2]
    row = [1, 0, 0, 1, 0]
    h = gap_histogram(row)
    manual = sum(h.count(t) * lad.trace(t) for t in range(5)) / 5
    report = average_cost([row], [lad])
    assert report.per_sensor[0] == pytest.approx(manual, rel=1e-12)
