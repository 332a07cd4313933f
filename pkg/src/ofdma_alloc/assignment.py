"""Power minimization when subcarriers barely outnumber users.

With N = K each user gets exactly one subcarrier, so the problem is a
K x K assignment problem whose edge weight is the single-subcarrier power
``(2^gamma - 1) eta / alpha`` (or a big-M sentinel when the budget cannot
reach the target).  With N = K + C the subcarriers are first split into K
nonempty blocks; each block/user weight is a single-user water-filling
power, and every split is solved as an assignment problem.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .core import InfeasibleError, MinPowerSolution, OfdmaInstance, PowerAllocation
from .waterfill import RATE_TOL, SingleUserChannel, min_power_single_user

__all__ = [
    "WeightMatrix",
    "Partition",
    "stirling",
    "partitions",
    "hungarian",
    "edge_weights_square",
    "block_weights",
    "min_power_square",
    "min_power_offset",
]


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Assignment weights with the big-M sentinel ``sum_k sum_n P_k^n``.

    ``feasible[k, m]`` records whether column ``m`` can carry user ``k`` at
    all; infeasible entries hold ``big_m``.
    """

    w: np.ndarray
    big_m: float
    feasible: np.ndarray

    def solve_costs(self) -> np.ndarray:
        """Weights with infeasible entries pushed strictly above any feasible total.

        A feasible assignment can cost exactly ``big_m`` (each user spends its
        whole budget), so ties with the sentinel must be broken explicitly.
        """
        penalty = 2.0 * self.big_m + 1.0
        return np.where(self.feasible, self.w, penalty)


@dataclass(frozen=True)
class Partition:
    """Unlabeled split of subcarriers into nonempty disjoint blocks."""

    blocks: tuple


@lru_cache(maxsize=None)
def stirling(n: int, k: int) -> int:
    """Stirling number of the second kind via S(n+1,k) = S(n,k-1) + k S(n,k)."""
    if n < 0 or k < 0:
        raise ValueError("n and k must be nonnegative")
    if k > n:
        return 0
    if k == n:
        return 1
    if k == 0:
        return 0
    return stirling(n - 1, k - 1) + k * stirling(n - 1, k)


def partitions(n: int, k: int) -> Iterator[Partition]:
    """Yield every split of ``range(n)`` into exactly ``k`` nonempty blocks once.

    Blocks are listed in order of their smallest element (restricted growth
    strings), which makes each unlabeled partition appear exactly once.
    """
    if not n >= k >= 1:
        raise ValueError("need n >= k >= 1")
    labels = [0] * n

    def rec(i, used):
        if n - i < k - used:
            return
        if i == n:
            blocks = [[] for _ in range(used)]
            for item, lab in enumerate(labels):
                blocks[lab].append(item)
            yield Partition(tuple(tuple(b) for b in blocks))
            return
        for lab in range(min(used + 1, k)):
            labels[i] = lab
            yield from rec(i + 1, max(used, lab + 1))

    labels[0] = 0
    yield from rec(1, 1)


def hungarian(w) -> tuple[np.ndarray, float]:
    """Minimum-weight perfect matching of a square cost matrix.

    Shortest augmenting paths with row/column potentials, O(K^3).  Returns
    ``(perm, value)`` where row ``k`` is matched to column ``perm[k]``.
    """
    cost = np.asarray(getattr(w, "w", w), dtype=float)
    n, m = cost.shape
    if n != m:
        raise ValueError("cost matrix must be square")
    if n == 0:
        return np.zeros(0, dtype=int), 0.0
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match_col = np.zeros(n + 1, dtype=int)  # column j -> row (1-based, 0 = free)
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        match_col[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match_col[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            upd = free & (cur < minv[1:])
            minv[1:][upd] = cur[upd]
            way[1:][upd] = j0
            cand = np.where(free, minv[1:], inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            used_idx = np.flatnonzero(used)
            u[match_col[used_idx]] += delta
            v[used_idx] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if match_col[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match_col[j0] = match_col[j1]
            j0 = j1
    perm = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        perm[match_col[j] - 1] = j - 1
    value = float(cost[np.arange(n), perm].sum())
    return perm, value


def _require_targets(inst: OfdmaInstance):
    if inst.rate_target is None:
        raise ValueError("power minimization needs rate_target")


def edge_weights_square(inst: OfdmaInstance) -> WeightMatrix:
    """Single-subcarrier powers ``(2^gamma_k - 1) eta_k^n / alpha_k^n``."""
    _require_targets(inst)
    K, N = inst.num_users, inst.num_subcarriers
    if N != K:
        raise ValueError(f"square weights need N == K, got N={N}, K={K}")
    big_m = float(inst.subcarrier_budget.sum())
    gamma = inst.rate_target[:, None]
    gain, noise, cap = inst.direct_gain, inst.noise, inst.subcarrier_budget
    with np.errstate(divide="ignore"):
        full = np.log2(1.0 + gain * cap / noise)
        need = np.where(gain > 0, (2.0 ** gamma - 1.0) * noise / np.where(gain > 0, gain, 1.0), np.inf)
    feasible = (gain > 0) & (full >= gamma - RATE_TOL)
    # within the rate tolerance the budget itself is the exact requirement
    w = np.where(feasible, np.minimum(need, cap), big_m)
    return WeightMatrix(w, big_m, feasible)


def min_power_square(inst: OfdmaInstance) -> MinPowerSolution:
    """Global optimum of power minimization when N == K."""
    wm = edge_weights_square(inst)
    perm, _ = hungarian(wm.solve_costs())
    K = inst.num_users
    rows = np.arange(K)
    if not np.all(wm.feasible[rows, perm]):
        raise InfeasibleError("no assignment of one subcarrier per user meets every target")
    power = np.zeros((K, K))
    power[rows, perm] = wm.w[rows, perm]
    return MinPowerSolution(PowerAllocation(power), float(power.sum()))


def block_weights(inst: OfdmaInstance, blocks, eps: float = 1e-10, cache=None) -> tuple[WeightMatrix, dict]:
    """User x block weights: single-user minimum power on each block.

    Returns the weight matrix and a dict ``(k, block) -> powers`` holding
    the water-filling powers of every feasible entry.
    """
    _require_targets(inst)
    K = inst.num_users
    big_m = float(inst.subcarrier_budget.sum())
    cache = {} if cache is None else cache
    w = np.full((K, len(blocks)), big_m)
    feasible = np.zeros((K, len(blocks)), dtype=bool)
    powers = {}
    for k in range(K):
        for m, block in enumerate(blocks):
            key = (k, block)
            if key not in cache:
                ch = SingleUserChannel.of_user(inst, k, block)
                try:
                    res = min_power_single_user(ch, float(inst.rate_target[k]), eps)
                    cache[key] = (res.total_power, res.powers)
                except InfeasibleError:
                    cache[key] = None
            hit = cache[key]
            if hit is not None:
                w[k, m] = hit[0]
                feasible[k, m] = True
                powers[key] = hit[1]
    return WeightMatrix(w, big_m, feasible), powers


def min_power_offset(inst: OfdmaInstance, C: int | None = None, eps: float = 1e-10) -> MinPowerSolution:
    """Global optimum of power minimization when N == K + C.

    Enumerates all S(K+C, K) splits of the subcarriers into K blocks, solves
    each as a K x K assignment on water-filling block weights, and keeps the
    cheapest.  Work grows like O(K^(2C+3)).
    """
    _require_targets(inst)
    K, N = inst.num_users, inst.num_subcarriers
    if C is None:
        C = N - K
    if N != K + C or C < 0:
        raise ValueError(f"instance has N - K = {N - K}, expected C = {C}")
    rows = np.arange(K)
    cache = {}
    best = None
    for part in partitions(N, K):
        wm, powers = block_weights(inst, part.blocks, eps, cache)
        perm, value = hungarian(wm.solve_costs())
        if not np.all(wm.feasible[rows, perm]):
            continue
        if best is None or value < best[0]:
            best = (value, part.blocks, perm, powers)
    if best is None:
        raise InfeasibleError("no split of the subcarriers meets every target")
    _, blocks, perm, powers = best
    power = np.zeros((K, N))
    for k in range(K):
        block = blocks[perm[k]]
        power[k, list(block)] = powers[(k, block)]
    return MinPowerSolution(PowerAllocation(power), float(power.sum()))
