import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schedsec.attack import (ShiftTuple, apply_shift, attacked_reception,
                             blocks_sensor, bnb_optimal_attack,
                             brute_force_optimal_attack, build_mip,
                             isolate_sensor_attack, load_shift_tuple,
                             lp_relaxation, random_attack, save_shift_tuple)
from schedsec.errors import BudgetError, InfeasibleError, ValidationError
from schedsec.scheduling import Schedule


def test_apply_shift_hand_values():
    assert apply_shift((1, 0, 0), 0) == (1, 0, 0)
    assert apply_shift((1, 0, 0), 1) == (0, 0, 1)
    assert apply_shift((1, 0, 0), 2) == (0, 1, 0)
    assert apply_shift((0, 1, 1, 0), 2) == (1, 0, 0, 1)


@settings(max_examples=200, deadline=None)
@given(row=st.lists(st.integers(0, 1), min_size=1, max_size=10),
       a=st.integers(0, 20), b=st.integers(0, 20))
def test_shift_group_laws(row, a, b):
    T = len(row)
    assert apply_shift(row, 0) == tuple(row)
    assert apply_shift(row, T) == tuple(row)
    assert apply_shift(apply_shift(row, a), b) == apply_shift(row, a + b)


def test_shift_tuple_validation(round_robin):
    t = ShiftTuple(taus=(0, 1, 2))
    t.validate_for(round_robin)
    with pytest.raises(ValidationError):
        ShiftTuple(taus=(0, 1)).validate_for(round_robin)
    with pytest.raises(ValidationError):
        ShiftTuple(taus=(0, 1, 3)).validate_for(round_robin)
    assert ShiftTuple(taus=(0, 2, 1)).spoofed_count == 2


def test_shift_tuple_roundtrip(tmp_path):
    t = ShiftTuple(taus=(0, 0, 2))
    path = tmp_path / "attack.json"
    save_shift_tuple(t, path)
    assert load_shift_tuple(path) == t


def test_attacked_reception_reference_tuple(round_robin):
    rec = attacked_reception(round_robin, ShiftTuple(taus=(0, 0, 2)))
    assert rec[0] == [0, 0, 1]     # sensor 0 still gets its slot
    assert rec[1] == [0, 0, 0]     # sensors 1 and 2 collide at slot 1
    assert rec[2] == [0, 0, 0]
    assert not blocks_sensor(round_robin, ShiftTuple(taus=(0, 0, 2)), 0)
    assert blocks_sensor(round_robin, ShiftTuple(taus=(0, 0, 2)), 1)
    assert blocks_sensor(round_robin, ShiftTuple(taus=(0, 0, 2)), 2)


def test_zero_attack_is_identity(round_robin):
    rec = attacked_reception(round_robin, ShiftTuple(taus=(0, 0, 0)))
    assert rec == [list(r) for r in round_robin.rows]


def test_random_attack_deterministic(round_robin):
    a = random_attack(3, 3, seed=42)
    b = random_attack(3, 3, seed=42)
    assert a == b
    a.validate_for(round_robin)


def test_isolate_each_study_sensor(round_robin):
    for target in range(3):
        attack = isolate_sensor_attack(round_robin, target)
        assert attack.taus[target] == 0
        assert blocks_sensor(round_robin, attack, target)


def test_isolate_infeasible_single_sensor():
    # a lone sensor owns every slot; nobody can collide with it
    sched = Schedule(period=3, rows=((1, 1, 1),))
    with pytest.raises(InfeasibleError):
        isolate_sensor_attack(sched, 0)


def test_isolate_shift_one_construction():
    # duty <= 1/2 and spread ones: shifting everyone else by one slot
    # must land a collision on each of the target's slots
    sched = Schedule(period=4, rows=((1, 0, 1, 0), (0, 1, 0, 0),
                                     (0, 0, 0, 1)))
    attack = isolate_sensor_attack(sched, 0)
    assert blocks_sensor(sched, attack, 0)


def test_bnb_study_instance(round_robin):
    result = bnb_optimal_attack(round_robin)
    assert result.blocking
    assert result.spoofed_count == 1
    assert result.per_target_costs == (1, 1, 1)
    assert result.nodes_explored >= 3
    assert result.blocked_sensors
    # reported tuple actually starves what it claims to starve
    rec = attacked_reception(round_robin, result.taus)
    for i in result.blocked_sensors:
        assert not any(rec[i])


def test_brute_force_study_instance(round_robin):
    result = brute_force_optimal_attack(round_robin)
    assert result.blocking
    assert result.spoofed_count == 1
    # lexicographic scan finds (0, 0, 1) first among the cost-1 tuples
    assert result.taus == ShiftTuple(taus=(0, 0, 1))


def test_reference_tuple_is_feasible_cost_one(round_robin):
    t = ShiftTuple(taus=(0, 0, 2))
    assert t.spoofed_count == 1
    assert blocks_sensor(round_robin, t, 1)


def test_bnb_matches_brute_force_on_random_schedules():
    from conftest import random_exclusive_schedule
    rng = np.random.default_rng(20240819)
    for _ in range(40):
        N = int(rng.integers(2, 5))
        T = int(rng.integers(2, 7))
        sched = random_exclusive_schedule(rng, N, T)
        b = brute_force_optimal_attack(sched)
        a = bnb_optimal_attack(sched)
        assert a.blocking == b.blocking
        if a.blocking:
            assert a.spoofed_count == b.spoofed_count
            rec = attacked_reception(sched, a.taus)
            assert any(not any(r) for r in rec)


def test_restricted_equals_unrestricted_brute_force():
    from conftest import random_exclusive_schedule
    rng = np.random.default_rng(5)
    for _ in range(30):
        N = int(rng.integers(2, 4))
        T = int(rng.integers(2, 6))
        sched = random_exclusive_schedule(rng, N, T)
        r = brute_force_optimal_attack(sched)
        u = brute_force_optimal_attack(sched, allow_shifted_target=True)
        assert r.blocking == u.blocking
        if r.blocking:
            assert r.spoofed_count == u.spoofed_count


def test_brute_force_budget():
    sched = Schedule(period=6, rows=tuple(
        tuple(1 if k == i else 0 for k in range(6)) for i in range(6)))
    with pytest.raises(BudgetError):
        brute_force_optimal_attack(sched, budget=10)


def test_single_sensor_cannot_be_blocked():
    sched = Schedule(period=3, rows=((1, 1, 1),))
    b = brute_force_optimal_attack(sched)
    a = bnb_optimal_attack(sched)
    assert not b.blocking and not a.blocking
    assert a.taus is None and a.spoofed_count is None
    assert a.per_target_costs == (None,)


def test_build_mip_requires_exclusive():
    sched = Schedule(period=2, rows=((1, 1), (0, 1)))
    with pytest.raises(ValidationError):
        build_mip(sched, 0)


def test_mip_encode_decode_roundtrip(round_robin):
    inst = build_mip(round_robin, 0)
    attack = ShiftTuple(taus=(0, 1, 2))
    sel = inst.encode(attack)
    assert inst.decode(sel) == attack
    with pytest.raises(ValidationError):
        inst.encode(ShiftTuple(taus=(1, 0, 0)))  # target must stay unshifted


def test_mip_feasibility_matches_blocking(round_robin):
    inst = build_mip(round_robin, 1)
    for taus in [(0, 0, 0), (1, 0, 1), (2, 0, 0), (1, 0, 2), (0, 0, 2)]:
        attack = ShiftTuple(taus=(taus[0], 0, taus[2]))
        sel = inst.encode(attack)
        assert inst.is_feasible(sel) == blocks_sensor(round_robin, attack, 1)


def test_mip_column_layout(round_robin):
    inst = build_mip(round_robin, 2)
    assert inst.block_sensors == (0, 1)
    assert inst.n_columns == 4
    assert inst.column_sensor == (0, 0, 1, 1)
    assert inst.column_shift == (1, 2, 1, 2)
    # column for sensor 0 shift 1 is its shifted transmission row
    np.testing.assert_array_equal(inst.columns[:, 0],
                                  apply_shift(round_robin.rows[0], 1))


def test_lp_relaxation_lower_bounds_integer_optimum(round_robin):
    from schedsec.attack import BnbState
    for target in range(3):
        inst = build_mip(round_robin, target)
        state = BnbState(live=set(inst.block_sensors), fixed={})
        got = lp_relaxation(inst, state)
        assert got is not None
        _, obj = got
        assert obj <= 1 + 1e-9  # integer optimum is 1 spoof


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_decoded_bnb_attack_verifies(seed):
    from conftest import random_exclusive_schedule
    rng = np.random.default_rng(seed)
    sched = random_exclusive_schedule(rng, int(rng.integers(2, 4)),
                                      int(rng.integers(2, 6)))
    result = bnb_optimal_attack(sched)
    if result.blocking:
        rec = attacked_reception(sched, result.taus)
        assert set(result.blocked_sensors) == {
            i for i in range(sched.n_sensors) if not any(rec[i])}
        assert result.taus.spoofed_count == result.spoofed_count
