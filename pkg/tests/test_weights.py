import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import polygamma

from ultrasemi import weights as wt


def test_gevrey_s2_small_table():
    W = wt.make_gevrey(2.0, 3)
    assert np.allclose(W.logM, [0.0, 0.0, math.log(4), math.log(36)], atol=0)
    assert np.allclose(W.m, [1.0, 4.0, 9.0])


def test_gevrey_s15_ratios():
    W = wt.make_gevrey(1.5, 2)
    assert np.allclose(W.m, [1.0, 2.0**1.5])


def test_gevrey_rejects_boundary():
    with pytest.raises(ValueError):
        wt.make_gevrey(1.0, 5)
    with pytest.raises(ValueError):
        wt.make_gevrey(2.0, 1)


def test_conditions_gevrey2():
    W = wt.make_gevrey(2.0, 200)
    rep = wt.verify_conditions(W)
    assert rep.m1_ok and rep.m1_min_slack >= -1e-12
    assert rep.m2_H >= 1.0 and np.isfinite(rep.m2_A)
    # brute-force comparison of the partial sum against pi^2/6
    brute = sum(1.0 / p**2 for p in range(1, 201))
    assert abs(rep.m3_partial_sum - brute) < 1e-14
    assert rep.m3_partial_sum < np.pi**2 / 6.0
    assert rep.m3_ok


def test_conditions_gevrey15():
    rep = wt.verify_conditions(wt.make_gevrey(1.5, 100))
    assert rep.all_pass


def test_m1_violation_witness():
    # ratios 1, 4, 1: log-convexity fails at p = 2
    W = wt.from_table([1.0, 1.0, 4.0, 4.0])
    rep = wt.verify_conditions(W)
    assert not rep.m1_ok
    assert rep.m1_witness == 2


def test_from_table_validation():
    with pytest.raises(ValueError):
        wt.from_table([2.0, 1.0, 1.0])  # M_0 != 1
    with pytest.raises(ValueError):
        wt.from_table([1.0, 1.0, 4.0, 4.0], require_log_convex=True)


def test_assoc_at_four_matches_brute_force():
    W = wt.make_gevrey(2.0, 100)
    v = wt.assoc(W, 4.0)
    brute = max(p * math.log(4.0) - W.logM[p] for p in range(101))
    assert v == brute
    assert abs(v - math.log(4.0)) < 1e-14
    _, argmax, _ = wt.assoc_detail(W, 4.0)
    assert argmax == 1  # ties break toward smaller p (p = 1 and 2 tie)


def test_assoc_zero_and_one():
    W = wt.make_gevrey(2.0, 50)
    assert wt.assoc(W, 0.0) == 0.0
    assert wt.assoc(W, 1.0) == 0.0  # rho^p / M_p <= 1, equality at p = 0


def test_assoc_brute_force_grid():
    W = wt.make_gevrey(2.0, 300)
    for rho in np.logspace(-3, 5, 40):
        brute = max(p * math.log(rho) - W.logM[p] for p in range(301))
        brute = max(brute, 0.0)
        assert wt.assoc(W, rho) == brute


def test_assoc_saturation_flag():
    W = wt.make_gevrey(2.0, 10)
    _, _, sat = wt.assoc_detail(W, 1e12)
    assert sat
    _, _, sat2 = wt.assoc_detail(W, 2.0)
    assert not sat2


@given(st.floats(min_value=1e-6, max_value=1e6),
       st.floats(min_value=1e-6, max_value=1e6))
def test_assoc_monotone(r1, r2):
    W = wt.make_gevrey(2.0, 120)
    lo, hi = min(r1, r2), max(r1, r2)
    assert wt.assoc(W, lo) <= wt.assoc(W, hi) + 1e-12


def test_assoc_many_matches_scalar():
    W = wt.make_gevrey(2.0, 150)
    rhos = np.logspace(-2, 4, 37)
    vec = wt.assoc_many(W, rhos)
    scal = np.array([wt.assoc(W, r) for r in rhos])
    assert np.array_equal(vec, scal)


def test_assoc_gevrey_scaling_property():
    # assoc_s(rho) = s * assoc_1(rho^{1/s}) wherever neither argmax saturates
    s = 2.0
    Ws = wt.make_gevrey(s, 400)
    W1 = wt.make_gevrey(1.0 + 1e-12, 400)  # index-1 limit of the constructor
    # build the exact index-1 table directly instead
    p = np.arange(1, 401, dtype=float)
    W1 = wt.WeightSequence(pmax=400, logM=np.concatenate([[0.0], np.cumsum(np.log(p))]),
                           m=p, gevrey_index=1.0)
    for rho in [2.0, 10.0, 1e3, 1e4]:
        vs, ps, sat_s = wt.assoc_detail(Ws, rho)
        v1, p1, sat_1 = wt.assoc_detail(W1, rho ** (1.0 / s))
        if sat_s or sat_1:
            continue
        assert abs(vs - s * v1) < 1e-9


def test_assoc_asymptotic_trend_s2():
    # M(rho)/sqrt(rho) -> 2 for the Gevrey-2 family (brute-force evaluation)
    W = wt.make_gevrey(2.0, 1500)
    for rho in [1e4, 1e5, 1e6]:
        v, _, sat = wt.assoc_detail(W, rho)
        assert not sat
        assert abs(v / math.sqrt(rho) - 2.0) < 0.1  # within 5% of 2


def test_m3_exact_tail_s2():
    pmax = 400
    rep = wt.verify_conditions(wt.make_gevrey(2.0, pmax))
    exact = np.pi**2 / 6.0 - float(polygamma(1, pmax + 1))
    assert abs(rep.m3_partial_sum - exact) < 1e-6


def test_extend_gevrey():
    W = wt.make_gevrey(2.0, 50)
    W2 = wt.extend(W, 100)
    assert W2.pmax == 100
    assert np.array_equal(W2.logM[:51], W.logM)
    with pytest.raises(ValueError):
        wt.extend(wt.from_table([1.0, 1.0, 4.0]), 10)
