"""JSON instance format and seeded random instance generation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import OfdmaInstance

__all__ = [
    "instance_to_dict",
    "instance_from_dict",
    "dumps",
    "load_instance",
    "save_instance",
    "GenSpec",
    "generate_instance",
]


def instance_to_dict(inst: OfdmaInstance) -> dict:
    def vec(a):
        return None if a is None else [float(x) for x in a]

    return {
        "K": inst.num_users,
        "N": inst.num_subcarriers,
        "direct_gain": inst.direct_gain.tolist(),
        "noise": inst.noise.tolist(),
        "subcarrier_budget": inst.subcarrier_budget.tolist(),
        "user_budget": vec(inst.user_budget),
        "rate_target": vec(inst.rate_target),
    }


def instance_from_dict(d: dict) -> OfdmaInstance:
    inst = OfdmaInstance(
        direct_gain=d["direct_gain"],
        noise=d["noise"],
        subcarrier_budget=d["subcarrier_budget"],
        user_budget=d.get("user_budget"),
        rate_target=d.get("rate_target"),
    )
    K, N = int(d["K"]), int(d["N"])
    if (inst.num_users, inst.num_subcarriers) != (K, N):
        raise ValueError(
            f"declared K={K}, N={N} but direct_gain is {inst.num_users}x{inst.num_subcarriers}"
        )
    return inst


def dumps(obj) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"


def save_instance(inst: OfdmaInstance, path) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst)))


def load_instance(path) -> OfdmaInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class GenSpec:
    """Log-uniform ranges for random instances."""

    K: int
    N: int
    seed: int = 0
    gain: tuple = (0.1, 10.0)
    noise: tuple = (0.1, 10.0)
    budget: tuple = (0.5, 5.0)
    target: tuple | None = (0.5, 4.0)
    user_budget: tuple | None = None

    def __post_init__(self):
        for name in ("gain", "noise", "budget", "target", "user_budget"):
            r = getattr(self, name)
            if r is not None and not (0 < r[0] <= r[1]):
                raise ValueError(f"{name} range must satisfy 0 < lo <= hi, got {r}")
        if not (self.K >= 1 and self.N >= self.K):
            raise ValueError("need N >= K >= 1")


def _log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size=size))


def generate_instance(spec: GenSpec) -> OfdmaInstance:
    """Deterministic instance for ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    shape = (spec.K, spec.N)
    gain = _log_uniform(rng, *spec.gain, shape)
    noise = _log_uniform(rng, *spec.noise, shape)
    budget = _log_uniform(rng, *spec.budget, shape)
    target = None if spec.target is None else _log_uniform(rng, *spec.target, spec.K)
    ub = None if spec.user_budget is None else _log_uniform(rng, *spec.user_budget, spec.K)
    return OfdmaInstance(gain, noise, budget, user_budget=ub, rate_target=target)
