import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ofdma_alloc.core import InfeasibleError, OfdmaInstance, rates
from ofdma_alloc.waterfill import (
    SingleUserChannel,
    WaterLevel,
    allocation_at,
    breakpoints,
    full_power_rate,
    kkt_residual,
    max_rate_single_user,
    min_power_single_user,
    rate_at,
)
from oracles import convex_min_power, grid_min_power

GADGET = SingleUserChannel([1, 1], [1, 2], [3, 2])


def random_channel(rng, n=None):
    n = int(rng.integers(1, 17)) if n is None else n
    return SingleUserChannel(
        np.exp(rng.uniform(np.log(0.05), np.log(20), n)),
        np.exp(rng.uniform(np.log(0.1), np.log(10), n)),
        np.exp(rng.uniform(np.log(0.1), np.log(10), n)),
    )


@st.composite
def channels(draw, max_n=8):
    n = draw(st.integers(1, max_n))
    pos = st.floats(0.05, 20, allow_nan=False)
    g = draw(st.lists(st.one_of(st.just(0.0), pos), min_size=n, max_size=n))
    e = draw(st.lists(st.floats(0.1, 10), min_size=n, max_size=n))
    c = draw(st.lists(st.floats(0.0, 10), min_size=n, max_size=n))
    return SingleUserChannel(g, e, c)


def test_breakpoints_examples():
    assert breakpoints(GADGET).tolist() == [1, 2, 4, 4]
    assert breakpoints(SingleUserChannel([1], [1], [3])).tolist() == [1, 4]
    assert breakpoints(SingleUserChannel([1, 1], [1, 1], [3, 3])).tolist() == [1, 1, 4, 4]


def test_zero_gain_excluded_from_breakpoints():
    ch = SingleUserChannel([0, 2], [1, 1], [3, 3])
    assert breakpoints(ch).tolist() == [0.5, 3.5]
    assert allocation_at(ch, 10).tolist() == [0, 3]


def test_allocation_at_examples():
    assert allocation_at(GADGET, 4).tolist() == [3, 2]
    assert allocation_at(GADGET, 0.5).tolist() == [0, 0]
    assert allocation_at(GADGET, 1).tolist() == [0, 0]
    assert allocation_at(GADGET, 100).tolist() == [3, 2]


def test_channel_validation():
    with pytest.raises(ValueError):
        SingleUserChannel([1, 1], [1], [1, 1])
    with pytest.raises(ValueError):
        SingleUserChannel([1], [0], [1])
    with pytest.raises(ValueError):
        SingleUserChannel([-1], [1], [1])


@pytest.mark.parametrize("method", ["closed", "bisect"])
def test_min_power_gadget(method):
    res = min_power_single_user(GADGET, 3, method=method)
    assert res.total_power == pytest.approx(5, abs=1e-9)
    assert res.powers == pytest.approx([3, 2], abs=1e-9)
    assert res.water_level.tau == pytest.approx(4, abs=1e-9)
    assert res.rate >= 3


def test_min_power_full_power_exact():
    res = min_power_single_user(SingleUserChannel([1, 1], [1, 1], [3, 3]), 4)
    assert res.powers.tolist() == [3, 3] and res.total_power == 6


def test_min_power_vanishing_target():
    assert min_power_single_user(GADGET, 1e-9).total_power < 1e-8


def test_min_power_infeasible():
    with pytest.raises(InfeasibleError):
        min_power_single_user(GADGET, 3.5)
    with pytest.raises(InfeasibleError):
        min_power_single_user(SingleUserChannel([0, 0], [1, 1], [3, 3]), 0.1)


def test_max_rate_examples():
    res = max_rate_single_user(GADGET, 5)
    assert res.powers.tolist() == [3, 2] and res.rate == pytest.approx(3, abs=1e-15)
    assert max_rate_single_user(GADGET, 10).powers.tolist() == [3, 2]
    sym = max_rate_single_user(SingleUserChannel([1, 1], [1, 1], [10, 10]), 4)
    assert sym.powers == pytest.approx([2, 2], abs=1e-12)


def test_kkt_examples():
    assert kkt_residual(GADGET, 5, [3, 2], WaterLevel.from_tau(4)) <= 1e-8
    assert kkt_residual(GADGET, 5, [3, 2], 0.25) <= 1e-8
    assert kkt_residual(GADGET, 5, [0, 0], WaterLevel.from_tau(4)) > 0
    assert kkt_residual(GADGET, 5, [0, 0], WaterLevel.from_tau(math.inf)) > 0


def test_cap_free_matches_textbook():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n = int(rng.integers(1, 8))
        g, e = rng.uniform(0.1, 5, n), rng.uniform(0.1, 5, n)
        P = rng.uniform(0.1, 10)
        res = max_rate_single_user(SingleUserChannel(g, e, np.full(n, P + 1)), P)
        # textbook level by sorting floors
        fl = np.sort(e / g)
        for m in range(n, 0, -1):
            tau = (P + fl[:m].sum()) / m
            if tau > fl[m - 1]:
                break
        assert res.powers == pytest.approx(np.maximum(tau - e / g, 0), abs=1e-10)


@settings(max_examples=300, deadline=None)
@given(channels(), st.floats(0.01, 30))
def test_max_rate_properties(ch, P):
    res = max_rate_single_user(ch, P)
    cap_total = float(ch.cap[ch.gain > 0].sum())
    assert res.powers.sum() == pytest.approx(min(P, cap_total), rel=1e-12, abs=1e-12)
    assert np.all(res.powers >= 0) and np.all(res.powers <= ch.cap)
    assert kkt_residual(ch, P, res.powers, res.water_level) <= 1e-8


@settings(max_examples=300, deadline=None)
@given(channels(), st.floats(0.001, 1.0))
def test_min_power_properties(ch, frac):
    full = full_power_rate(ch)
    if full <= 1e-6:
        return
    gamma = frac * full
    res = min_power_single_user(ch, gamma)
    inst = OfdmaInstance([ch.gain], [ch.noise], [ch.cap])
    r = rates(inst, [res.powers])[0]
    assert gamma <= r <= gamma + max(res.eps_rate, 0) + 1e-12
    assert kkt_residual(ch, res.total_power, res.powers, res.water_level) <= 1e-8
    back = max_rate_single_user(ch, res.total_power)
    assert back.rate == pytest.approx(gamma, abs=1e-6)


def test_rate_at_monotone():
    rng = np.random.default_rng(2)
    ch = random_channel(rng, 6)
    taus = np.linspace(0, breakpoints(ch)[-1] + 1, 500)
    v = [rate_at(ch, t) for t in taus]
    assert np.all(np.diff(v) >= -1e-15)


def test_closed_and_bisect_agree():
    rng = np.random.default_rng(5)
    for _ in range(100):
        ch = random_channel(rng)
        gamma = rng.uniform(0.05, 1) * full_power_rate(ch)
        a = min_power_single_user(ch, gamma, method="closed")
        b = min_power_single_user(ch, gamma, eps=1e-12, method="bisect")
        assert a.total_power == pytest.approx(b.total_power, abs=1e-8)


def test_against_convex_solver():
    rng = np.random.default_rng(7)
    for _ in range(40):
        ch = random_channel(rng, int(rng.integers(1, 9)))
        gamma = rng.uniform(0.05, 0.95) * full_power_rate(ch)
        ours = min_power_single_user(ch, gamma).total_power
        ref = convex_min_power(ch.gain, ch.noise, ch.cap, gamma)
        # the conic solver meets the rate constraint only to its own tolerance
        assert abs(ours - ref) <= 1e-6 * max(1.0, ref)


def test_against_grid_two_subcarriers():
    rng = np.random.default_rng(8)
    for _ in range(30):
        ch = random_channel(rng, 2)
        gamma = rng.uniform(0.05, 0.95) * full_power_rate(ch)
        ours = min_power_single_user(ch, gamma).total_power
        ref = grid_min_power(ch.gain, ch.noise, ch.cap, gamma, steps=20001)
        assert ours <= ref + 1e-9
        assert ref - ours <= 1e-3 * max(1.0, ref)
