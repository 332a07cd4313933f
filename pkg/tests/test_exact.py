import itertools

import numpy as np
import pytest

from ofdma_alloc.assignment import min_power_offset, min_power_square
from ofdma_alloc.core import InfeasibleError, OfdmaInstance, UtilityKind, rates, utility
from ofdma_alloc.exact import (
    EnumerationBudgetExceeded,
    assignments,
    enumeration_size,
    exact_feasibility,
    exact_max_utility,
    exact_min_power,
)
from ofdma_alloc.reductions import ThreeDMInstance, reduce_feasibility
from ofdma_alloc.transport import max_sum_rate_no_total_budget
from ofdma_alloc.waterfill import SingleUserChannel, max_rate_single_user, min_power_single_user
from oracles import EXAMPLE_TRIPLES, feasible_by_enumeration, random_min_power_instance

EXAMPLE = ThreeDMInstance(4, frozenset(EXAMPLE_TRIPLES))


def random_utility_instance(rng, K, N):
    inst = random_min_power_instance(rng, K, N)
    return inst.replace(rate_target=None, user_budget=rng.uniform(0.5, 6, K))


def test_assignments_enumerate_each_map_once():
    maps = [a.owner for a in assignments(2, 3)]
    assert len(maps) == len(set(maps)) == enumeration_size(2, 3) == 27


def test_single_user_collapse():
    rng = np.random.default_rng(0)
    for _ in range(10):
        inst = random_min_power_instance(rng, 1, 4)
        ch = SingleUserChannel.of_user(inst, 0)
        try:
            ref = min_power_single_user(ch, float(inst.rate_target[0])).total_power
        except InfeasibleError:
            continue
        assert exact_min_power(inst).total == pytest.approx(ref, abs=1e-12)
        u = random_utility_instance(rng, 1, 4)
        r = max_rate_single_user(SingleUserChannel.of_user(u, 0), float(u.user_budget[0])).rate
        for kind in UtilityKind:
            assert exact_max_utility(u, kind).value == pytest.approx(r, abs=1e-12)


def test_square_matches_hungarian():
    rng = np.random.default_rng(1)
    for _ in range(40):
        K = int(rng.integers(1, 5))
        inst = random_min_power_instance(rng, K, K)
        try:
            ref = min_power_square(inst).total
        except InfeasibleError:
            with pytest.raises(InfeasibleError):
                exact_min_power(inst)
            continue
        assert exact_min_power(inst).total == pytest.approx(ref, abs=1e-8)


def test_gadget_min_power_and_feasibility():
    inst = reduce_feasibility(EXAMPLE)
    sol = exact_min_power(inst)
    assert sol.total == pytest.approx(20, abs=1e-9)
    assert exact_feasibility(inst)
    assert not exact_feasibility(inst.replace(rate_target=np.full(4, 4.0)))
    assert exact_feasibility(inst.replace(rate_target=np.full(4, 1e-9)))


@pytest.mark.parametrize("seed", range(3))
def test_dp_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    for _ in range(8):
        K = int(rng.integers(1, 4))
        N = K + int(rng.integers(0, 3))
        inst = random_min_power_instance(rng, K, N)
        assert exact_feasibility(inst) == exact_feasibility(inst, strategy="enumerate")
        assert exact_feasibility(inst) == feasible_by_enumeration(inst)
        try:
            a = exact_min_power(inst).total
        except InfeasibleError:
            with pytest.raises(InfeasibleError):
                exact_min_power(inst, strategy="enumerate")
        else:
            assert exact_min_power(inst, strategy="enumerate").total == pytest.approx(a, abs=1e-12)
        u = random_utility_instance(rng, K, N)
        for kind in UtilityKind:
            a = exact_max_utility(u, kind).value
            b = exact_max_utility(u, kind, strategy="enumerate").value
            assert a == pytest.approx(b, abs=1e-12)


def test_offset_agreement():
    rng = np.random.default_rng(5)
    for _ in range(40):
        K = int(rng.integers(1, 4))
        N = K + int(rng.integers(0, 6 - K))
        inst = random_min_power_instance(rng, K, N)
        try:
            ref = exact_min_power(inst).total
        except InfeasibleError:
            continue
        assert min_power_offset(inst).total == pytest.approx(ref, abs=1e-8)


def test_unbounded_budget_matches_transport():
    rng = np.random.default_rng(6)
    for _ in range(30):
        K = int(rng.integers(1, 4))
        N = K + int(rng.integers(0, 3))
        inst = random_min_power_instance(rng, K, N).replace(rate_target=None)
        free = inst.replace(user_budget=inst.subcarrier_budget.sum(axis=1))
        sol = exact_max_utility(free, UtilityKind.SUM_RATE)
        ref = max_sum_rate_no_total_budget(inst).value
        assert sol.rates.sum() == pytest.approx(ref, abs=1e-8)


def test_decoupling_beats_joint_grid():
    # joint grid over all four powers with OFDMA enforced per column
    rng = np.random.default_rng(7)
    grid = np.linspace(0, 1, 41)
    for _ in range(5):
        inst = random_utility_instance(rng, 2, 2).replace(subcarrier_budget=np.ones((2, 2)))
        for kind in (UtilityKind.SUM_RATE, UtilityKind.MIN_RATE):
            best = exact_max_utility(inst, kind).value
            top = -np.inf
            for owner in itertools.product(range(2), repeat=2):
                for a, b in itertools.product(grid, grid):
                    p = np.zeros((2, 2))
                    p[owner[0], 0], p[owner[1], 1] = a, b
                    if np.any(p.sum(axis=1) > inst.user_budget + 1e-12):
                        continue
                    top = max(top, utility(kind, rates(inst, p)))
            assert top <= best + 1e-6


def test_monotone_in_targets_and_budgets():
    rng = np.random.default_rng(8)
    inst = random_min_power_instance(rng, 2, 4, target=(0.3, 1.0))
    a = exact_min_power(inst).total
    b = exact_min_power(inst.replace(rate_target=inst.rate_target + [0.2, 0])).total
    assert b >= a
    u = random_utility_instance(rng, 2, 4)
    for kind in UtilityKind:
        lo = exact_max_utility(u, kind).value
        hi = exact_max_utility(u.replace(user_budget=u.user_budget * 1.5), kind).value
        assert hi >= lo - 1e-12


def test_budget_guard():
    inst = OfdmaInstance(np.ones((2, 10)), np.ones((2, 10)), np.ones((2, 10)), rate_target=[1, 1])
    assert exact_feasibility(inst)  # 3^10 is well inside the default budget
    with pytest.raises(EnumerationBudgetExceeded):
        exact_feasibility(inst, enum_budget=1000)


def test_missing_fields_rejected():
    inst = OfdmaInstance(np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1)))
    with pytest.raises(ValueError):
        exact_min_power(inst)
    with pytest.raises(ValueError):
        exact_max_utility(inst, "sum-rate")
