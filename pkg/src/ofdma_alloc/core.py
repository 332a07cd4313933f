"""Instance data model, OFDMA rates and system utilities.

Users and subcarriers are indexed from 0.  Rates are in bits per channel
use (base-2 logarithm).  Because at most one user transmits on a
subcarrier, cross-channel gains never enter a rate and are not part of the
data model.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "OfdmaInstance",
    "PowerAllocation",
    "SubcarrierAssignment",
    "UtilityKind",
    "InvalidInstanceError",
    "OfdmaViolationError",
    "InfeasibleError",
    "MinPowerSolution",
    "UtilitySolution",
    "validate_instance",
    "is_ofdma",
    "rates",
    "utility",
    "block_rate",
]


class InvalidInstanceError(ValueError):
    """Raised when an instance violates its invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class OfdmaViolationError(ValueError):
    """Raised when two users transmit on the same subcarrier."""


class InfeasibleError(Exception):
    """No allocation meets the rate targets within the power budgets."""


def _frozen(a, ndim):
    arr = np.array(a, dtype=float, ndmin=ndim)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class OfdmaInstance:
    """K users sharing N subcarriers.

    ``direct_gain``, ``noise`` and ``subcarrier_budget`` are K x N arrays
    (row = user).  ``user_budget`` is the per-user total power limit used by
    utility maximization; ``rate_target`` is the per-user rate demand used by
    power minimization.  Either may be None.
    """

    direct_gain: np.ndarray
    noise: np.ndarray
    subcarrier_budget: np.ndarray
    user_budget: Optional[np.ndarray] = None
    rate_target: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "direct_gain", _frozen(self.direct_gain, 2))
        object.__setattr__(self, "noise", _frozen(self.noise, 2))
        object.__setattr__(self, "subcarrier_budget", _frozen(self.subcarrier_budget, 2))
        if self.user_budget is not None:
            object.__setattr__(self, "user_budget", _frozen(self.user_budget, 1))
        if self.rate_target is not None:
            object.__setattr__(self, "rate_target", _frozen(self.rate_target, 1))

    @property
    def num_users(self) -> int:
        return self.direct_gain.shape[0]

    @property
    def num_subcarriers(self) -> int:
        return self.direct_gain.shape[1]

    def replace(self, **changes) -> "OfdmaInstance":
        fields = dict(
            direct_gain=self.direct_gain,
            noise=self.noise,
            subcarrier_budget=self.subcarrier_budget,
            user_budget=self.user_budget,
            rate_target=self.rate_target,
        )
        fields.update(changes)
        return OfdmaInstance(**fields)

    def __eq__(self, other):
        if not isinstance(other, OfdmaInstance):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and bool(np.array_equal(a, b))

        return (
            same(self.direct_gain, other.direct_gain)
            and same(self.noise, other.noise)
            and same(self.subcarrier_budget, other.subcarrier_budget)
            and same(self.user_budget, other.user_budget)
            and same(self.rate_target, other.rate_target)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    """K x N matrix of transmit powers."""

    power: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "power", _frozen(self.power, 2))

    @classmethod
    def zeros(cls, num_users: int, num_subcarriers: int) -> "PowerAllocation":
        return cls(np.zeros((num_users, num_subcarriers)))

    def total(self) -> float:
        return float(self.power.sum())

    def assignment(self) -> "SubcarrierAssignment":
        """Owner of each subcarrier (the user with positive power, if any)."""
        if not is_ofdma(self):
            raise OfdmaViolationError("allocation is not OFDMA")
        owner = []
        for col in self.power.T:
            pos = np.flatnonzero(col > 0)
            owner.append(int(pos[0]) if pos.size else None)
        return SubcarrierAssignment(tuple(owner))


@dataclass(frozen=True)
class SubcarrierAssignment:
    """Owner of each subcarrier; ``None`` marks an unassigned subcarrier."""

    owner: tuple

    def block(self, user: int) -> list[int]:
        return [n for n, k in enumerate(self.owner) if k == user]


class UtilityKind(enum.Enum):
    SUM_RATE = "sum-rate"
    PROPORTIONAL_FAIRNESS = "proportional-fairness"
    HARMONIC_MEAN = "harmonic-mean"
    MIN_RATE = "min-rate"


def validate_instance(inst: OfdmaInstance) -> list[str]:
    """Return every invariant violation of ``inst``; empty when well formed."""
    out = []
    gain, noise, budget = inst.direct_gain, inst.noise, inst.subcarrier_budget
    if gain.ndim != 2:
        return ["direct_gain: must be a K x N matrix"]
    K, N = gain.shape
    if K < 1 or N < 1:
        out.append("num_users and num_subcarriers must be positive")
    if N < K:
        out.append("num_subcarriers < num_users")
    for name, arr in (("noise", noise), ("subcarrier_budget", budget)):
        if arr.shape != (K, N):
            out.append(f"{name}: shape {arr.shape} != ({K}, {N})")
    if out and any("shape" in v for v in out):
        return out
    for name, arr in (("direct_gain", gain), ("noise", noise), ("subcarrier_budget", budget)):
        if not np.all(np.isfinite(arr)):
            out.append(f"{name}: entries must be finite")
    if np.any(gain < 0):
        out.append("direct_gain: gains must be >= 0")
    if np.any(~(noise > 0)):
        bad = [(int(k), int(n)) for k, n in np.argwhere(~(noise > 0))]
        out.append(f"noise must be > 0 (entries {bad})")
    if np.any(budget < 0):
        out.append("subcarrier_budget: budgets must be >= 0")
    for name in ("user_budget", "rate_target"):
        vec = getattr(inst, name)
        if vec is None:
            continue
        if vec.shape != (K,):
            out.append(f"{name}: length {vec.shape[0] if vec.ndim else 0} != {K}")
        elif not np.all(np.isfinite(vec)) or np.any(vec <= 0):
            out.append(f"{name}: entries must be finite and > 0")
    return out


def is_ofdma(alloc) -> bool:
    """True iff every subcarrier carries positive power for at most one user."""
    power = np.asarray(getattr(alloc, "power", alloc))
    return bool(np.all((power > 0).sum(axis=0) <= 1))


def block_rate(gain, noise, power) -> float:
    """Single-user rate sum_n log2(1 + gain*power/noise)."""
    gain, noise, power = (np.asarray(x, dtype=float) for x in (gain, noise, power))
    return float(np.sum(np.log2(1.0 + gain * power / noise)))


def rates(inst: OfdmaInstance, alloc) -> np.ndarray:
    """Per-user rates R_k = sum_n log2(1 + a_k^n p_k^n / eta_k^n).

    The interference-free formula is only valid for OFDMA allocations, so
    anything else is rejected.
    """
    power = np.asarray(getattr(alloc, "power", alloc), dtype=float)
    if power.shape != inst.direct_gain.shape:
        raise ValueError(f"allocation shape {power.shape} != {inst.direct_gain.shape}")
    if not is_ofdma(power):
        raise OfdmaViolationError("allocation violates the OFDMA property")
    return np.sum(np.log2(1.0 + inst.direct_gain * power / inst.noise), axis=1)


def utility(kind: UtilityKind, r: Sequence[float]) -> float:
    """System utility of a nonnegative rate vector.

    Any zero rate sends the proportional-fairness, harmonic-mean and
    min-rate utilities to 0 (their continuous limit).
    """
    kind = UtilityKind(kind)
    r = np.asarray(r, dtype=float)
    if r.size == 0:
        raise ValueError("empty rate vector")
    if np.any(r < 0):
        raise ValueError("rates must be nonnegative")
    if kind is UtilityKind.SUM_RATE:
        return float(r.mean())
    if np.any(r == 0):
        return 0.0
    if kind is UtilityKind.PROPORTIONAL_FAIRNESS:
        return float(np.exp(np.mean(np.log(r))))
    if kind is UtilityKind.HARMONIC_MEAN:
        with np.errstate(over="ignore"):
            return float(r.size / np.sum(1.0 / r))
    return float(r.min())


@dataclass(frozen=True, eq=False)
class MinPowerSolution:
    """Optimal allocation of a power-minimization problem."""

    alloc: PowerAllocation
    total: float


@dataclass(frozen=True, eq=False)
class UtilitySolution:
    """Optimal allocation of a utility-maximization problem."""

    alloc: PowerAllocation
    value: float
    rates: np.ndarray
