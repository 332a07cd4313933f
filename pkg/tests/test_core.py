import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ofdma_alloc.core import (
    InvalidInstanceError,
    OfdmaInstance,
    OfdmaViolationError,
    PowerAllocation,
    SubcarrierAssignment,
    UtilityKind,
    is_ofdma,
    rates,
    utility,
    validate_instance,
)
from ofdma_alloc.io import dumps, instance_from_dict, instance_to_dict


def one(gain=1.0, noise=1.0, budget=3.0, target=3.0):
    return OfdmaInstance([[gain]], [[noise]], [[budget]], rate_target=[target])


def test_minimal_instance_is_valid():
    assert validate_instance(one()) == []


def test_fewer_subcarriers_than_users():
    inst = OfdmaInstance(np.ones((2, 1)), np.ones((2, 1)), np.ones((2, 1)))
    assert validate_instance(inst) == ["num_subcarriers < num_users"]


def test_zero_noise_reported():
    noise = np.ones((2, 2))
    noise[1, 1] = 0
    v = validate_instance(OfdmaInstance(np.ones((2, 2)), noise, np.ones((2, 2))))
    assert len(v) == 1 and v[0].startswith("noise must be > 0")


def test_shape_mismatch_and_bad_vectors():
    inst = OfdmaInstance(np.ones((2, 3)), np.ones((2, 2)), np.ones((2, 3)))
    assert any("noise: shape" in v for v in validate_instance(inst))
    inst = OfdmaInstance(np.ones((2, 2)), np.ones((2, 2)), np.ones((2, 2)), rate_target=[1, -1])
    assert any("rate_target" in v for v in validate_instance(inst))
    with pytest.raises(InvalidInstanceError) as err:
        raise InvalidInstanceError(["a", "b"])
    assert err.value.violations == ["a", "b"]


def test_instance_arrays_are_frozen():
    inst = one()
    with pytest.raises(ValueError):
        inst.direct_gain[0, 0] = 5


def test_rates_gadget_point():
    inst = OfdmaInstance([[1, 1]], [[1, 2]], [[3, 2]])
    assert rates(inst, [[3, 2]])[0] == pytest.approx(3.0, abs=1e-15)
    assert rates(inst, [[3, 0]])[0] == pytest.approx(2.0, abs=1e-15)
    assert np.all(rates(inst, np.zeros((1, 2))) == 0)


def test_rates_rejects_non_ofdma():
    inst = OfdmaInstance(np.ones((2, 2)), np.ones((2, 2)), np.ones((2, 2)))
    with pytest.raises(OfdmaViolationError):
        rates(inst, [[1, 0], [1, 0]])


def test_is_ofdma_examples():
    assert is_ofdma([[3], [0]])
    assert not is_ofdma([[3], [2]])
    assert is_ofdma(np.zeros((3, 4)))


def test_utility_examples():
    for kind in UtilityKind:
        assert utility(kind, [3, 3, 3, 3]) == pytest.approx(3.0, abs=1e-15)
    assert utility("sum-rate", [0, 5]) == 2.5
    for kind in ("proportional-fairness", "harmonic-mean", "min-rate"):
        assert utility(kind, [0, 5]) == 0.0
    vals = [utility(k, [1, 4]) for k in UtilityKind]
    assert vals == pytest.approx([2.5, 2.0, 1.6, 1.0], abs=1e-14)


def test_assignment_blocks():
    alloc = PowerAllocation([[0, 2, 0], [1, 0, 0]])
    a = alloc.assignment()
    assert a.owner == (1, 0, None)
    assert a.block(0) == [1]
    assert SubcarrierAssignment((None, None)).block(0) == []


rate_vectors = st.lists(st.floats(0, 1e3, allow_nan=False), min_size=1, max_size=8)


@settings(max_examples=300, deadline=None)
@given(rate_vectors)
def test_utility_ordering(r):
    h = [utility(k, r) for k in UtilityKind]
    scale = max(1.0, max(r))
    for a, b in zip(h, h[1:]):
        assert a >= b - 1e-12 * scale


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_rates_monotone_and_decomposable(K, extra, seed):
    rng = np.random.default_rng(seed)
    N = K + extra
    inst = OfdmaInstance(rng.uniform(0, 3, (K, N)), rng.uniform(0.1, 3, (K, N)), np.ones((K, N)))
    owner = rng.integers(-1, K, N)
    p = np.zeros((K, N))
    for n, k in enumerate(owner):
        if k >= 0:
            p[k, n] = rng.uniform(0, 1)
    r = rates(inst, p)
    for k in range(K):
        blk = np.flatnonzero(owner == k)
        direct = sum(np.log2(1 + inst.direct_gain[k, n] * p[k, n] / inst.noise[k, n]) for n in blk)
        assert r[k] == pytest.approx(direct, abs=1e-12)
    q = p * 1.5
    assert np.all(rates(inst, q) >= r - 1e-15)


def test_json_roundtrip_exact():
    rng = np.random.default_rng(3)
    inst = OfdmaInstance(rng.random((2, 3)), rng.random((2, 3)) + 0.1, rng.random((2, 3)),
                         user_budget=rng.random(2) + 1, rate_target=rng.random(2) + 0.5)
    back = instance_from_dict(json.loads(dumps(instance_to_dict(inst))))
    assert back == inst


def test_json_declared_shape_checked():
    d = instance_to_dict(one())
    d["N"] = 2
    with pytest.raises(ValueError):
        instance_from_dict(d)
