"""(Weighted) sum-rate maximization without per-user total power limits.

Without a total budget the objective separates over subcarriers and every
optimal power is either 0 or the full per-subcarrier budget, so the problem
is a Hitchcock transportation problem: K sources with supply N, N unit
terminals (the subcarriers) and one dummy terminal absorbing the remaining
(K-1)N units at zero cost.  Shipping from user k to subcarrier n costs
``c_bar - w_k log2(1 + alpha P / eta)``.  Integral supplies and demands give
an integral optimal flow, recovered here by successive shortest paths.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .core import OfdmaInstance, PowerAllocation, UtilitySolution, rates

__all__ = [
    "HitchcockInstance",
    "build_hitchcock",
    "solve_transportation",
    "transport_cost",
    "max_sum_rate_no_total_budget",
]


@dataclass(frozen=True, eq=False)
class HitchcockInstance:
    supplies: np.ndarray  # int, length K
    demands: np.ndarray  # int, length N+1 (last entry is the dummy terminal)
    cost: np.ndarray  # K x (N+1)
    c_bar: float = 0.0

    @property
    def balanced(self) -> bool:
        return int(self.supplies.sum()) == int(self.demands.sum())


def _full_rates(inst: OfdmaInstance) -> np.ndarray:
    return np.log2(1.0 + inst.direct_gain * inst.subcarrier_budget / inst.noise)


def build_hitchcock(inst: OfdmaInstance, weights=None) -> HitchcockInstance:
    K, N = inst.num_users, inst.num_subcarriers
    w = np.ones(K) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (K,):
        raise ValueError(f"need {K} weights, got shape {w.shape}")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    gain = w[:, None] * _full_rates(inst)
    c_bar = float(gain.max())
    cost = np.zeros((K, N + 1))
    cost[:, :N] = np.maximum(c_bar - gain, 0.0)
    supplies = np.full(K, N, dtype=np.int64)
    demands = np.ones(N + 1, dtype=np.int64)
    demands[N] = (K - 1) * N
    return HitchcockInstance(supplies, demands, cost, c_bar)


def transport_cost(h: HitchcockInstance, flow) -> float:
    return float(np.sum(h.cost * np.asarray(flow)))


def solve_transportation(h: HitchcockInstance) -> np.ndarray:
    """Integral min-cost flow for a balanced transportation problem.

    Successive shortest paths on the residual bipartite network, with
    Dijkstra on reduced costs kept nonnegative by node potentials.  Each
    augmentation pushes the bottleneck amount, so flows stay integers.
    """
    supplies = np.asarray(h.supplies, dtype=np.int64)
    demands = np.asarray(h.demands, dtype=np.int64)
    cost = np.asarray(h.cost, dtype=float)
    if not h.balanced:
        raise ValueError(f"unbalanced instance: supply {supplies.sum()} != demand {demands.sum()}")
    if np.any(cost < 0):
        raise ValueError("costs must be nonnegative")
    S, T = cost.shape
    flow = np.zeros((S, T), dtype=np.int64)
    left = supplies.copy()
    need = demands.copy()
    # nodes: 0..S-1 sources, S..S+T-1 terminals, S+T super-source
    src = S + T
    pot = np.zeros(S + T + 1)
    for s in range(S):
        pot[s] = 0.0
    # potentials for terminals: cheapest way in (valid since costs >= 0)
    pot[S:S + T] = cost.min(axis=0) if S else 0.0

    while need.sum() > 0:
        dist = np.full(S + T + 1, np.inf)
        prev = np.full(S + T + 1, -1)
        dist[src] = 0.0
        heap = [(0.0, src)]
        done = np.zeros(S + T + 1, dtype=bool)
        while heap:
            d, x = heapq.heappop(heap)
            if done[x]:
                continue
            done[x] = True
            if x == src:
                nbrs = [(s, 0.0) for s in range(S) if left[s] > 0]
            elif x < S:
                # forward arcs source -> terminal, uncapacitated
                nbrs = [(S + t, cost[x, t]) for t in range(T)]
            else:
                t = x - S
                # backward arcs terminal -> source where flow > 0
                nbrs = [(s, -cost[s, t]) for s in np.flatnonzero(flow[:, t] > 0)]
            px = pot[x] if x != src else 0.0
            for y, c in nbrs:
                rc = max(c + px - pot[y], 0.0)
                nd = d + rc
                if nd < dist[y] - 1e-15:
                    dist[y] = nd
                    prev[y] = x
                    heapq.heappush(heap, (nd, y))
        open_t = [t for t in range(T) if need[t] > 0 and np.isfinite(dist[S + t])]
        if not open_t:
            raise RuntimeError("no augmenting path; instance infeasible")
        t_best = min(open_t, key=lambda t: (dist[S + t] + pot[S + t], t))
        # walk back to find the bottleneck
        path = []
        y = S + t_best
        while y != src:
            path.append((prev[y], y))
            y = prev[y]
        path.reverse()
        amount = need[t_best]
        first_source = path[0][1]
        amount = min(amount, left[first_source])
        for a, b in path[1:]:
            if a >= S:  # backward arc terminal a -> source b
                amount = min(amount, flow[b, a - S])
        for a, b in path[1:]:
            if a < S:
                flow[a, b - S] += amount
            else:
                flow[b, a - S] -= amount
        left[first_source] -= amount
        need[t_best] -= amount
        finite = np.isfinite(dist)
        pot[finite] += dist[finite]
    return flow


def max_sum_rate_no_total_budget(inst: OfdmaInstance, weights=None) -> UtilitySolution:
    """Optimal (weighted) sum rate when only per-subcarrier budgets apply.

    ``value`` is ``sum_k w_k R_k`` with unit weights by default.
    """
    K, N = inst.num_users, inst.num_subcarriers
    w = np.ones(K) if weights is None else np.asarray(weights, dtype=float)
    h = build_hitchcock(inst, w)
    if h.c_bar <= 0.0:
        alloc = PowerAllocation.zeros(K, N)
        return UtilitySolution(alloc, 0.0, np.zeros(K))
    flow = solve_transportation(h)
    x = flow[:, :N]
    alloc = PowerAllocation(x * inst.subcarrier_budget)
    r = rates(inst, alloc)
    return UtilitySolution(alloc, float(np.dot(w, r)), r)
