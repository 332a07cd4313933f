"""3-dimensional matching gadgets and their round-trip verification.

A 3DM instance of size K has X = Y = Z = {0..K-1} and a set of triples.
``reduce_feasibility`` builds a K-user, 2K-subcarrier system (subcarriers
0..K-1 stand for Y, K..2K-1 for Z) with rate target 3 for every user:

* budget 3 on Y subcarriers and 2 on Z subcarriers;
* noise 1 where (x, y) occurs in a triple, 2 where (x, z) occurs, else 3;
* gain 1 on every subcarrier that occurs in some triple of the user, else
  0.25.

A match gives each user full power on its y and z, i.e. rate
log2(4) + log2(2) = 3.

``reduce_feasibility_c`` pads the gadget with dummy ("type-II") users and
subcarriers to reach any ratio N/K = c > 1, and ``reduce_utility`` adds the
per-user budget 5 used by the utility-maximization variant.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import OfdmaInstance, PowerAllocation, UtilityKind, utility
from .exact import DEFAULT_ENUM_BUDGET, exact_feasibility, exact_max_utility

__all__ = [
    "ThreeDMInstance",
    "Match",
    "ReducedInstanceBundle",
    "RoundTrip",
    "Variant",
    "SizeBoundExceeded",
    "is_match",
    "solve_3dm_exact",
    "random_3dm",
    "reduce_feasibility",
    "match_to_allocation",
    "reduce_feasibility_c",
    "reduce_utility",
    "verify_reduction_roundtrip",
    "LOG2_11",
    "UTILITY_TOL",
]

LOG2_11 = math.log2(11.0)
#: Tolerance for comparing an optimal utility against its threshold.
UTILITY_TOL = 1e-9

# type-II user on type-II subcarrier / any cross-type pair: (noise, gain, budget)
_DUMMY_GOOD = (0.3, 1.0, 3.0)
_DUMMY_BAD = (3.0, 0.25, 1.0)


class SizeBoundExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ThreeDMInstance:
    size: int
    triples: frozenset

    def __post_init__(self):
        trip = frozenset(tuple(int(c) for c in t) for t in self.triples)
        for t in trip:
            if len(t) != 3 or not all(0 <= c < self.size for c in t):
                raise ValueError(f"triple {t} out of range for size {self.size}")
        object.__setattr__(self, "triples", trip)

    def sorted_triples(self) -> list:
        return sorted(self.triples)

    def to_dict(self) -> dict:
        return {"size": self.size, "triples": [list(t) for t in self.sorted_triples()]}

    @classmethod
    def from_dict(cls, d: dict) -> "ThreeDMInstance":
        return cls(int(d["size"]), frozenset(tuple(t) for t in d["triples"]))


@dataclass(frozen=True)
class Match:
    chosen: tuple


def is_match(tdm: ThreeDMInstance, m) -> bool:
    """Chosen triples are in the relation, pairwise disjoint and cover X, Y, Z."""
    chosen = list(getattr(m, "chosen", m))
    if len(chosen) != tdm.size or not all(tuple(t) in tdm.triples for t in chosen):
        return False
    full = set(range(tdm.size))
    return all({t[i] for t in chosen} == full for i in range(3))


def solve_3dm_exact(tdm: ThreeDMInstance, max_size: int = 8) -> Optional[Match]:
    """Backtracking over x-coordinates; returns a Match or None."""
    if tdm.size > max_size:
        raise SizeBoundExceeded(f"3DM size {tdm.size} exceeds bound {max_size}")
    by_x = [[] for _ in range(tdm.size)]
    for t in tdm.sorted_triples():
        by_x[t[0]].append(t)
    if any(not opts for opts in by_x):
        return None
    used_y, used_z, chosen = set(), set(), []

    def rec(x):
        if x == tdm.size:
            return True
        for t in by_x[x]:
            if t[1] in used_y or t[2] in used_z:
                continue
            used_y.add(t[1])
            used_z.add(t[2])
            chosen.append(t)
            if rec(x + 1):
                return True
            chosen.pop()
            used_y.discard(t[1])
            used_z.discard(t[2])
        return False

    return Match(tuple(chosen)) if rec(0) else None


def random_3dm(rng: np.random.Generator, size: int, num_triples: Optional[int] = None) -> ThreeDMInstance:
    """Uniformly chosen distinct triples; count uniform in [size, size^2] by default."""
    if num_triples is None:
        num_triples = int(rng.integers(size, size * size + 1))
    flat = rng.choice(size**3, size=num_triples, replace=False)
    triples = frozenset((int(f // (size * size)), int(f // size % size), int(f % size)) for f in flat)
    return ThreeDMInstance(size, triples)


def _gadget_arrays(tdm: ThreeDMInstance):
    K = tdm.size
    budget = np.empty((K, 2 * K))
    budget[:, :K] = 3.0
    budget[:, K:] = 2.0
    noise = np.full((K, 2 * K), 3.0)
    gain = np.full((K, 2 * K), 0.25)
    for x, y, z in tdm.triples:
        noise[x, y] = 1.0
        noise[x, K + z] = 2.0
        gain[x, y] = 1.0
        gain[x, K + z] = 1.0
    return gain, noise, budget


def reduce_feasibility(tdm: ThreeDMInstance) -> OfdmaInstance:
    """Feasibility instance that is feasible iff ``tdm`` has a match (ratio 2)."""
    gain, noise, budget = _gadget_arrays(tdm)
    return OfdmaInstance(gain, noise, budget, rate_target=np.full(tdm.size, 3.0))


def match_to_allocation(tdm: ThreeDMInstance, m) -> PowerAllocation:
    """Power 3 on each matched y and 2 on each matched z."""
    if not is_match(tdm, m):
        raise ValueError("not a match for this instance")
    K = tdm.size
    power = np.zeros((K, 2 * K))
    for x, y, z in getattr(m, "chosen", m):
        power[x, y] = 3.0
        power[x, K + z] = 2.0
    return PowerAllocation(power)


@dataclass(frozen=True, eq=False)
class ReducedInstanceBundle:
    instance: OfdmaInstance
    source: ThreeDMInstance
    user_roles: tuple
    subcarrier_roles: tuple
    c: Fraction = Fraction(2)
    threshold: Optional[float] = None
    kind: Optional[UtilityKind] = None
    meta: dict = field(default_factory=dict)

    def sidecar(self) -> dict:
        """JSON-ready description of how the instance was built."""
        K = self.source.size
        return {
            "source_3dm": self.source.to_dict(),
            "c": f"{self.c.numerator}/{self.c.denominator}",
            "threshold": self.threshold,
            "utility": None if self.kind is None else self.kind.value,
            "user_roles": list(self.user_roles),
            "subcarrier_roles": list(self.subcarrier_roles),
            "index_convention": (
                f"type-I users first; type-I subcarriers 0..{K - 1} are Y, "
                f"{K}..{2 * K - 1} are Z; type-II subcarriers follow"
            ),
            **self.meta,
        }


def _split_counts(m: int, c: Fraction):
    """(total users, type-II users, type-II subcarriers) for a size-m gadget."""
    if c <= 1:
        raise ValueError("c must be > 1")
    if c == 2:
        return m, 0, 0
    if c < 2:
        K = m / (c - 1)
        if K.denominator != 1:
            raise ValueError(
                f"for 1 < c < 2 the 3DM size must make (c-1)K = m integral: "
                f"K = m/(c-1) = {K} is not an integer"
            )
        K = int(K)
        return K, K - m, K - m
    K = m + 1
    N = c * K
    if N.denominator != 1:
        raise ValueError(
            f"for c > 2 the subcarrier count cK = {c}*{K} must be an integer"
        )
    return K, 1, int(N) - 2 * m


def _padded_gadget(tdm: ThreeDMInstance, c: Fraction):
    m = tdm.size
    K, k2, n2 = _split_counts(m, c)
    g1, e1, b1 = _gadget_arrays(tdm)
    N = 2 * m + n2
    gain = np.full((K, N), _DUMMY_BAD[1])
    noise = np.full((K, N), _DUMMY_BAD[0])
    budget = np.full((K, N), _DUMMY_BAD[2])
    gain[:m, :2 * m], noise[:m, :2 * m], budget[:m, :2 * m] = g1, e1, b1
    noise[m:, 2 * m:], gain[m:, 2 * m:], budget[m:, 2 * m:] = _DUMMY_GOOD
    if c < 2:
        dummy_target = LOG2_11
        dummy_budget = _DUMMY_GOOD[2]
    else:
        dummy_target = n2 * LOG2_11
        dummy_budget = n2 * _DUMMY_GOOD[2]
    targets = np.concatenate([np.full(m, 3.0), np.full(k2, dummy_target)])
    user_roles = ("I",) * m + ("II",) * k2
    sub_roles = ("I",) * (2 * m) + ("II",) * n2
    return gain, noise, budget, targets, dummy_budget, user_roles, sub_roles


def _as_fraction(c_num, c_den) -> Fraction:
    if int(c_den) <= 0:
        raise ValueError("c_den must be positive")
    return Fraction(int(c_num), int(c_den))


def reduce_feasibility_c(tdm: ThreeDMInstance, c_num: int, c_den: int = 1) -> ReducedInstanceBundle:
    """Feasibility instance with N/K = c_num/c_den embedding ``tdm``.

    For 1 < c < 2 there are (2-c)K dummy users, each with one dummy
    subcarrier and target log2 11; for c > 2 a single dummy user must use
    all (c-2)K + 2 dummy subcarriers at full power.
    """
    c = _as_fraction(c_num, c_den)
    if c == 2:
        inst = reduce_feasibility(tdm)
        K = tdm.size
        return ReducedInstanceBundle(inst, tdm, ("I",) * K, ("I",) * (2 * K), c)
    gain, noise, budget, targets, _, ur, sr = _padded_gadget(tdm, c)
    inst = OfdmaInstance(gain, noise, budget, rate_target=targets)
    return ReducedInstanceBundle(inst, tdm, ur, sr, c)


def reduce_utility(tdm: ThreeDMInstance, kind=UtilityKind.SUM_RATE, c_num: int = 2,
                   c_den: int = 1) -> ReducedInstanceBundle:
    """Utility instance whose optimum reaches ``threshold`` iff ``tdm`` has a match.

    Gadget users get total budget 5.  At c = 2 the threshold is 3 for every
    utility.  For other c the threshold is the utility of the rate vector a
    match would produce (3 per gadget user, the dummy targets otherwise);
    dummy users get exactly the budget that reaches their target.
    """
    kind = UtilityKind(kind)
    c = _as_fraction(c_num, c_den)
    if c == 2:
        gain, noise, budget = _gadget_arrays(tdm)
        K = tdm.size
        targets = np.full(K, 3.0)
        user_budget = np.full(K, 5.0)
        ur, sr = ("I",) * K, ("I",) * (2 * K)
    else:
        gain, noise, budget, targets, dummy_budget, ur, sr = _padded_gadget(tdm, c)
        user_budget = np.where(np.array(ur) == "I", 5.0, dummy_budget)
    inst = OfdmaInstance(gain, noise, budget, user_budget=user_budget)
    return ReducedInstanceBundle(inst, tdm, ur, sr, c, utility(kind, targets), kind)


class Variant(enum.Enum):
    FEASIBILITY = "feasibility"
    FEASIBILITY_C = "feasibility-c"
    UTILITY = "utility"


@dataclass(frozen=True)
class RoundTrip:
    tdm_answer: bool
    ofdma_answer: bool
    detail: Optional[float] = None

    @property
    def agree(self) -> bool:
        return self.tdm_answer == self.ofdma_answer


def verify_reduction_roundtrip(tdm: ThreeDMInstance, variant="feasibility", c_num: int = 2,
                               c_den: int = 1, kind=UtilityKind.SUM_RATE,
                               enum_budget=DEFAULT_ENUM_BUDGET) -> RoundTrip:
    """Solve ``tdm`` directly and through its reduced instance; compare answers."""
    variant = Variant(variant)
    tdm_answer = solve_3dm_exact(tdm) is not None
    if variant is Variant.FEASIBILITY:
        inst = reduce_feasibility(tdm)
        return RoundTrip(tdm_answer, exact_feasibility(inst, enum_budget=enum_budget))
    if variant is Variant.FEASIBILITY_C:
        bundle = reduce_feasibility_c(tdm, c_num, c_den)
        return RoundTrip(tdm_answer, exact_feasibility(bundle.instance, enum_budget=enum_budget))
    bundle = reduce_utility(tdm, kind, c_num, c_den)
    sol = exact_max_utility(bundle.instance, bundle.kind, enum_budget=enum_budget)
    return RoundTrip(tdm_answer, sol.value >= bundle.threshold - UTILITY_TOL, sol.value)


def all_3dm_instances(size: int):
    """Every relation over {0..size-1}^3 (only sensible for size <= 2)."""
    cells = list(itertools.product(range(size), repeat=3))
    for bits in range(1 << len(cells)):
        yield ThreeDMInstance(size, frozenset(c for i, c in enumerate(cells) if bits >> i & 1))
