"""Exhaustive exact solvers for the general (strongly NP-hard) problems.

Fixing which user owns each subcarrier decouples the problem into K
single-user problems, each solved by water-filling.  The optimum is found
over all (K+1)^N owner maps (every subcarrier goes to one user or stays
idle).  Two equivalent search strategies are provided:

``"dp"``
    dynamic programming over subsets: ``best_k(mask)`` is the best value
    using users 0..k-1 on subcarriers inside ``mask``.  Every owner map is
    covered by a chain of disjoint submasks, so the result equals full
    enumeration while costing O(K 3^N) instead of O((K+1)^N).
``"enumerate"``
    literal enumeration of every owner map.

Both evaluate the same per-(user, block) subproblems, cached by bitmask.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterator

import numpy as np

from .core import (
    InfeasibleError,
    MinPowerSolution,
    OfdmaInstance,
    PowerAllocation,
    SubcarrierAssignment,
    UtilityKind,
    UtilitySolution,
    rates,
    utility,
)
from .waterfill import (
    RATE_TOL,
    SingleUserChannel,
    full_power_rate,
    max_rate_single_user,
    min_power_single_user,
)

__all__ = [
    "EnumerationBudgetExceeded",
    "DEFAULT_ENUM_BUDGET",
    "assignments",
    "enumeration_size",
    "exact_min_power",
    "exact_feasibility",
    "exact_max_utility",
]

DEFAULT_ENUM_BUDGET = 10**8


class EnumerationBudgetExceeded(RuntimeError):
    """The (K+1)^N owner maps exceed the configured enumeration budget."""


def enumeration_size(K: int, N: int) -> int:
    return (K + 1) ** N


def assignments(K: int, N: int) -> Iterator[SubcarrierAssignment]:
    """Every owner map subcarrier -> {None, 0..K-1}, each exactly once."""
    for owner in itertools.product((None, *range(K)), repeat=N):
        yield SubcarrierAssignment(owner)


def _check_budget(inst: OfdmaInstance, budget):
    K, N = inst.num_users, inst.num_subcarriers
    size = enumeration_size(K, N)
    if size > budget:
        raise EnumerationBudgetExceeded(
            f"(K+1)^N = {K + 1}^{N} = {size} owner maps exceed the budget {int(budget)}"
        )


def _mask_members(mask: int, N: int) -> tuple:
    return tuple(n for n in range(N) if mask >> n & 1)


class _BlockTable:
    """Lazily evaluated per-(user, block) subproblem results."""

    def __init__(self, inst: OfdmaInstance, solve: Callable):
        self.inst = inst
        self.solve = solve
        self._cache = {}

    def __call__(self, k: int, mask: int):
        key = (k, mask)
        if key not in self._cache:
            block = _mask_members(mask, self.inst.num_subcarriers)
            self._cache[key] = self.solve(k, block)
        return self._cache[key]


# A subproblem returns (score, powers_on_block).  Scores combine across
# users with ``combine`` and are maximized; -inf marks an infeasible block.


def _dp(K: int, N: int, score, combine, identity):
    full = (1 << N) - 1
    best = [np.full(full + 1, identity, dtype=float)]
    choice = []
    for k in range(K):
        prev = best[-1]
        cur = np.full(full + 1, -math.inf)
        arg = np.zeros(full + 1, dtype=np.int64)
        sk = [score(k, s) for s in range(full + 1)]
        for mask in range(full + 1):
            top, top_sub = -math.inf, 0
            sub = mask
            while True:
                val = combine(prev[mask ^ sub], sk[sub])
                if val > top:
                    top, top_sub = val, sub
                if sub == 0:
                    break
                sub = (sub - 1) & mask
            cur[mask] = top
            arg[mask] = top_sub
        best.append(cur)
        choice.append(arg)
    value = best[-1][full]
    masks = [0] * K
    mask = full
    for k in range(K - 1, -1, -1):
        masks[k] = int(choice[k][mask])
        mask ^= masks[k]
    return value, masks


def _enumerate(K: int, N: int, score, combine, identity):
    top, top_masks = -math.inf, None
    for a in assignments(K, N):
        masks = [0] * K
        for n, k in enumerate(a.owner):
            if k is not None:
                masks[k] |= 1 << n
        val = identity
        for k in range(K):
            val = combine(val, score(k, masks[k]))
        if top_masks is None or val > top:
            top, top_masks = val, masks
    return top, top_masks


def _add(a, b):
    return a + b


def _search(inst, score, combine, identity, strategy, enum_budget):
    _check_budget(inst, enum_budget)
    K, N = inst.num_users, inst.num_subcarriers
    if strategy == "dp":
        if K == 1:
            # a lone user can only gain from more subcarriers
            full = (1 << N) - 1
            return combine(identity, score(0, full)), [full]
        return _dp(K, N, score, combine, identity)
    if strategy == "enumerate":
        return _enumerate(K, N, score, combine, identity)
    raise ValueError(f"unknown strategy {strategy!r}")


def _assemble(inst, table, masks) -> np.ndarray:
    K, N = inst.num_users, inst.num_subcarriers
    power = np.zeros((K, N))
    for k, mask in enumerate(masks):
        _, p = table(k, mask)
        if p is not None:
            power[k, list(_mask_members(mask, N))] = p
    return power


def exact_min_power(inst: OfdmaInstance, eps: float = 1e-10, strategy: str = "dp",
                    enum_budget=DEFAULT_ENUM_BUDGET) -> MinPowerSolution:
    """Global minimum total power meeting every rate target.

    Raises ``InfeasibleError`` when no owner map makes all users feasible and
    ``EnumerationBudgetExceeded`` for oversize instances.
    """
    if inst.rate_target is None:
        raise ValueError("power minimization needs rate_target")

    def solve(k, block):
        if not block:
            return -math.inf, None
        ch = SingleUserChannel.of_user(inst, k, block)
        try:
            res = min_power_single_user(ch, float(inst.rate_target[k]), eps)
        except InfeasibleError:
            return -math.inf, None
        return -res.total_power, res.powers

    table = _BlockTable(inst, solve)
    value, masks = _search(inst, lambda k, m: table(k, m)[0], _add, 0.0, strategy, enum_budget)
    if value == -math.inf:
        raise InfeasibleError("no subcarrier assignment meets every rate target")
    power = _assemble(inst, table, masks)
    return MinPowerSolution(PowerAllocation(power), float(power.sum()))


def exact_feasibility(inst: OfdmaInstance, strategy: str = "dp",
                      enum_budget=DEFAULT_ENUM_BUDGET) -> bool:
    """True iff some owner map lets every user reach its target at full power."""
    if inst.rate_target is None:
        raise ValueError("feasibility needs rate_target")

    def solve(k, block):
        ch = SingleUserChannel.of_user(inst, k, block)
        ok = full_power_rate(ch) >= float(inst.rate_target[k]) - RATE_TOL
        return (0.0 if ok else -math.inf), None

    table = _BlockTable(inst, solve)
    value, _ = _search(inst, lambda k, m: table(k, m)[0], _add, 0.0, strategy, enum_budget)
    return value > -math.inf


def _utility_score(kind: UtilityKind):
    """Monotone per-user transform and combiner whose maximum maximizes H."""
    if kind is UtilityKind.SUM_RATE:
        return (lambda r: r), _add, 0.0
    if kind is UtilityKind.PROPORTIONAL_FAIRNESS:
        return (lambda r: math.log(r) if r > 0 else -math.inf), _add, 0.0
    if kind is UtilityKind.HARMONIC_MEAN:
        return (lambda r: -1.0 / r if r > 0 else -math.inf), _add, 0.0
    return (lambda r: r), min, math.inf


def exact_max_utility(inst: OfdmaInstance, kind, strategy: str = "dp",
                      enum_budget=DEFAULT_ENUM_BUDGET) -> UtilitySolution:
    """Global maximum of a system utility under per-user total budgets.

    Every utility is nondecreasing in each rate, so for a fixed owner map
    each user simply maximizes its own rate on its block.
    """
    kind = UtilityKind(kind)
    if inst.user_budget is None:
        raise ValueError("utility maximization needs user_budget")
    transform, combine, identity = _utility_score(kind)

    def solve(k, block):
        if not block:
            return 0.0, None
        ch = SingleUserChannel.of_user(inst, k, block)
        res = max_rate_single_user(ch, float(inst.user_budget[k]))
        return res.rate, res.powers

    table = _BlockTable(inst, solve)
    _, masks = _search(inst, lambda k, m: transform(table(k, m)[0]), combine, identity,
                       strategy, enum_budget)
    alloc = PowerAllocation(_assemble(inst, table, masks))
    r = rates(inst, alloc)
    return UtilitySolution(alloc, utility(kind, r), r)
