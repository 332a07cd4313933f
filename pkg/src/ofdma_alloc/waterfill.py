"""Single-user power control by capped ("extended") water-filling.

Powers follow ``p^n = min(P^n, (tau - eta^n/alpha^n)_+)`` for a water level
``tau``.  Two problems are solved:

* minimum total power subject to a rate target (bracket ``tau`` between
  breakpoints, then solve inside the bracket), and
* maximum rate subject to a total power budget (the total is piecewise
  linear in ``tau``, so the bracket yields ``tau`` in closed form).

Subcarriers with zero gain never receive power and contribute no
breakpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import InfeasibleError

__all__ = [
    "SingleUserChannel",
    "WaterLevel",
    "MinPowerResult",
    "MaxRateResult",
    "InfeasibleError",
    "breakpoints",
    "allocation_at",
    "rate_at",
    "full_power_rate",
    "min_power_single_user",
    "max_rate_single_user",
    "kkt_residual",
    "RATE_TOL",
]

#: Slack allowed when deciding whether a rate target is reachable.
RATE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SingleUserChannel:
    gain: np.ndarray
    noise: np.ndarray
    cap: np.ndarray

    def __post_init__(self):
        arrs = [np.array(a, dtype=float, ndmin=1) for a in (self.gain, self.noise, self.cap)]
        if not (arrs[0].shape == arrs[1].shape == arrs[2].shape) or arrs[0].ndim != 1:
            raise ValueError("gain, noise and cap must be 1-D sequences of equal length")
        if np.any(arrs[0] < 0) or np.any(arrs[2] < 0):
            raise ValueError("gain and cap must be nonnegative")
        if np.any(~(arrs[1] > 0)):
            raise ValueError("noise must be > 0")
        for name, a in zip(("gain", "noise", "cap"), arrs):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def of_user(cls, inst, user: int, block=None) -> "SingleUserChannel":
        """Channel of ``user`` restricted to the subcarriers in ``block``."""
        cols = slice(None) if block is None else list(block)
        return cls(
            inst.direct_gain[user, cols],
            inst.noise[user, cols],
            inst.subcarrier_budget[user, cols],
        )

    def __len__(self):
        return self.gain.size

    @property
    def usable(self) -> np.ndarray:
        return self.gain > 0

    def floor(self) -> np.ndarray:
        """eta/alpha on usable subcarriers, +inf elsewhere."""
        out = np.full(self.gain.shape, np.inf)
        u = self.usable
        out[u] = self.noise[u] / self.gain[u]
        return out


@dataclass(frozen=True)
class WaterLevel:
    """Water level ``tau`` and its multiplier ``lam = 1/tau``.

    When the total power budget is slack the level is unbounded:
    ``tau = inf`` and ``lam = 0``.
    """

    tau: float
    lam: float

    @classmethod
    def from_tau(cls, tau: float) -> "WaterLevel":
        return cls(float(tau), 0.0 if math.isinf(tau) else 1.0 / tau)


@dataclass(frozen=True, eq=False)
class MinPowerResult:
    powers: np.ndarray
    total_power: float
    water_level: WaterLevel
    rate: float
    eps_rate: float


@dataclass(frozen=True, eq=False)
class MaxRateResult:
    powers: np.ndarray
    rate: float
    water_level: WaterLevel


def breakpoints(ch: SingleUserChannel) -> np.ndarray:
    """Sorted water levels where some subcarrier changes regime.

    Each usable subcarrier contributes ``eta/alpha`` (starts filling) and
    ``eta/alpha + P`` (saturates).  Duplicates are kept.
    """
    fl = ch.floor()[ch.usable]
    return np.sort(np.concatenate([fl, fl + ch.cap[ch.usable]]), kind="stable")


def allocation_at(ch: SingleUserChannel, tau: float) -> np.ndarray:
    p = np.zeros(len(ch))
    u = ch.usable
    p[u] = np.clip(tau - ch.noise[u] / ch.gain[u], 0.0, ch.cap[u])
    return p


def _rate(ch: SingleUserChannel, p) -> float:
    return float(np.sum(np.log2(1.0 + ch.gain * p / ch.noise)))


def rate_at(ch: SingleUserChannel, tau: float) -> float:
    return _rate(ch, allocation_at(ch, tau))


def full_power_rate(ch: SingleUserChannel) -> float:
    return _rate(ch, ch.cap)


def _levels_table(ch: SingleUserChannel, b: np.ndarray):
    """Powers (len(b) x N) on usable subcarriers at each water level in b."""
    u = ch.usable
    fl = ch.noise[u] / ch.gain[u]
    p = np.clip(b[:, None] - fl[None, :], 0.0, ch.cap[u][None, :])
    return fl, p


def _bracket_sets(ch: SingleUserChannel, lo: float, hi: float):
    """Saturated and filling subcarriers for tau strictly inside (lo, hi)."""
    fl = ch.floor()
    top = fl + ch.cap
    mid = 0.5 * (lo + hi)
    active = ch.usable & (fl < mid) & (mid < top)
    saturated = ch.usable & (top <= lo)
    return saturated, active


def min_power_single_user(ch: SingleUserChannel, gamma: float, eps: float = 1e-10,
                          method: str = "closed") -> MinPowerResult:
    """Least total power whose capped water-filling reaches rate ``gamma``.

    The rate is evaluated at every breakpoint to find the bracket
    ``v[j] <= gamma < v[j+1]``.  Inside the bracket the active set is fixed
    and the rate is ``R_sat + sum_A log2(tau * alpha/eta)``, which is solved
    for ``tau`` directly (``method="closed"``) or by bisection to width
    ``eps`` (``method="bisect"``).  The returned rate is never below
    ``gamma`` unless the target is within ``RATE_TOL`` of the full-power rate.

    Raises
    ------
    InfeasibleError
        If full power on every subcarrier misses ``gamma`` by more than
        ``RATE_TOL``.
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if eps <= 0:
        raise ValueError("eps must be > 0")
    full = full_power_rate(ch)
    if full < gamma - RATE_TOL:
        raise InfeasibleError(f"full-power rate {full:.12g} < target {gamma:.12g}")
    b = breakpoints(ch)
    if full <= gamma:
        tau = float(b[-1]) if b.size else math.inf
        p = np.array(ch.cap, dtype=float)
        p[~ch.usable] = 0.0
        return MinPowerResult(p, float(p.sum()), WaterLevel.from_tau(tau), full, full - gamma)

    fl, table = _levels_table(ch, b)
    v = np.sum(np.log2(1.0 + table / fl[None, :]), axis=1)
    j = int(np.searchsorted(v, gamma, side="left"))
    if j < b.size and v[j] == gamma:
        tau = float(b[j])
    else:
        # v[j-1] < gamma < v[j]; the bracket has positive width and j >= 1
        # because v[0] == 0 < gamma.
        lo, hi = float(b[j - 1]), float(b[j])
        if method == "closed":
            tau = _solve_rate_bracket(ch, lo, hi, gamma)
        elif method == "bisect":
            tau = _bisect_rate(ch, lo, hi, gamma, eps)
        else:
            raise ValueError(f"unknown method {method!r}")
        # float round-off may leave the rate a hair under gamma
        for _ in range(64):
            if rate_at(ch, tau) >= gamma:
                break
            tau = math.nextafter(tau, math.inf)
    p = allocation_at(ch, tau)
    r = _rate(ch, p)
    return MinPowerResult(p, float(p.sum()), WaterLevel.from_tau(tau), r, r - gamma)


def _solve_rate_bracket(ch, lo, hi, gamma):
    saturated, active = _bracket_sets(ch, lo, hi)
    r_sat = _rate(ch, np.where(saturated, ch.cap, 0.0))
    g, e = ch.gain[active], ch.noise[active]
    log_tau = (gamma - r_sat - np.sum(np.log2(g / e))) / active.sum()
    return min(max(2.0 ** log_tau, lo), hi)


def _bisect_rate(ch, lo, hi, gamma, eps):
    while hi - lo > eps:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if rate_at(ch, mid) < gamma:
            lo = mid
        else:
            hi = mid
    return hi


def max_rate_single_user(ch: SingleUserChannel, P: float) -> MaxRateResult:
    """Largest rate reachable with total power at most ``P``.

    If ``P`` covers every cap, all caps are used.  Otherwise the total power
    at each breakpoint brackets the water level, and within the bracket the
    total ``sum_sat P^n + sum_A (tau - eta^n/alpha^n)`` is linear in tau.
    """
    if P < 0:
        raise ValueError("P must be >= 0")
    usable = ch.usable
    cap_total = float(ch.cap[usable].sum())
    if P >= cap_total:
        p = np.where(usable, ch.cap, 0.0)
        if P == cap_total and cap_total > 0:
            tau = float(breakpoints(ch)[-1])
        else:
            tau = math.inf
        return MaxRateResult(p, _rate(ch, p), WaterLevel.from_tau(tau))
    b = breakpoints(ch)
    fl, table = _levels_table(ch, b)
    u = table.sum(axis=1)
    j = int(np.searchsorted(u, P, side="left"))
    if u[j] == P:
        # several breakpoints may share this total; take the smallest level
        tau = float(b[j])
    else:
        lo, hi = float(b[j - 1]), float(b[j])
        saturated, active = _bracket_sets(ch, lo, hi)
        tau = (P - ch.cap[saturated].sum() + ch.floor()[active].sum()) / active.sum()
        tau = min(max(float(tau), lo), hi)
    p = allocation_at(ch, tau)
    return MaxRateResult(p, _rate(ch, p), WaterLevel.from_tau(tau))


def kkt_residual(ch: SingleUserChannel, P: float, powers, water_level, tol: float = 1e-12) -> float:
    """Largest violation of the KKT system of max-rate under budget ``P``.

    Multipliers for ``p <= cap`` (xi) and ``p >= 0`` (nu) are built from the
    powers and ``lam``: zero power gives ``nu = lam - g``, full power gives
    ``xi = g - lam``, and interior power gives ``xi = nu = 0``, where
    ``g = alpha/(eta + alpha p)``.  The objective is taken in natural-log
    units so that ``lam = 1/tau``.
    """
    lam = water_level.lam if isinstance(water_level, WaterLevel) else float(water_level)
    p = np.asarray(powers, dtype=float)
    cap = ch.cap
    g = ch.gain / (ch.noise + ch.gain * p)
    scale = max(1.0, float(cap.max(initial=0.0)))
    at_zero = p <= tol * scale
    at_cap = ~at_zero & (p >= cap - tol * scale)
    xi = np.zeros_like(p)
    nu = np.zeros_like(p)
    nu[at_zero] = lam - g[at_zero]
    xi[at_cap] = g[at_cap] - lam
    # a subcarrier with cap 0 sits on both bounds; split the multiplier
    both = at_zero & (cap <= tol * scale)
    xi[both] = np.maximum(g[both] - lam, 0.0)
    nu[both] = np.maximum(lam - g[both], 0.0)

    slack = float(p.sum()) - P
    terms = [
        np.abs(-g + lam + xi - nu).max(initial=0.0),
        max(slack, 0.0),
        max(-lam, 0.0),
        abs(lam * slack),
        np.maximum(p - cap, 0.0).max(initial=0.0),
        np.maximum(-p, 0.0).max(initial=0.0),
        np.maximum(-xi, 0.0).max(initial=0.0),
        np.maximum(-nu, 0.0).max(initial=0.0),
        np.abs((cap - p) * xi).max(initial=0.0),
        np.abs(p * nu).max(initial=0.0),
    ]
    return float(max(terms))
