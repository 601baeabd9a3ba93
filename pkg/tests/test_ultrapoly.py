import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ultrasemi import ultrapoly as up
from ultrasemi import weights as wt


@pytest.fixture(scope="module")
def W():
    return wt.make_gevrey(2.0, 60)


# -- build ---------------------------------------------------------------------


def test_build_single_factor(W):
    P = up.build(W, 1.0, 1)
    assert np.allclose(P.coeffs, [1.0, 0.0, 1.0], atol=0)


def test_build_two_factors(W):
    P = up.build(W, 1.0, 2)
    assert np.allclose(P.coeffs, [1.0, 0.0, 1.0 + 1.0 / 16, 0.0, 1.0 / 16])


def test_build_flagship_a2(W2000):
    P = up.build(W2000, 0.5, 2000)
    # a_2 = sum_{p<=N} L^2/m_p^2 = 0.25 * truncated sum of p^-4
    brute = 0.25 * sum(1.0 / p**4 for p in range(1, 2001))
    assert abs(P.coeffs[2] - brute) < 1e-12
    assert abs(P.coeffs[2] - 0.27058) < 1e-5


def test_build_rejects_missing_ratios():
    Wt = wt.from_table([1.0, 1.0, 4.0, 36.0])
    with pytest.raises(ValueError):
        up.build(Wt, 1.0, 10)


def test_build_gevrey_extension(W400):
    P = up.build(W400, 0.5, 2000)  # N > pmax: exact closed-form extension
    assert P.N == 2000
    assert len(P.factor_coeffs) == 2000


def test_build_per_factor_scales(W):
    scales = np.array([1.0, 0.5, 0.25])
    P = up.build(W, scales, 3)
    assert P.per_factor_scales
    expect = (scales / W.m[:3]) ** 2
    assert np.allclose(P.factor_coeffs, expect, atol=0)


def test_coefficients_even_and_nonnegative(W):
    P = up.build(W, 0.7, 12)
    assert np.all(P.coeffs[1::2] == 0.0)
    assert np.all(P.coeffs >= 0.0)
    assert P.coeffs[0] == 1.0


# -- evaluation ------------------------------------------------------------------


def test_eval_at_zero(W):
    P = up.build(W, 0.5, 20)
    res = P.eval(0.0)
    assert res.value == 1.0
    assert res.rel_error_bound == 0.0


def test_eval_zero_at_factor_root(W):
    P = up.build(W, 1.0, 5)
    res = P.eval(1j)  # first factor 1 + (i)^2 = 0, zeros at i m_p / L
    assert res.value == 0.0
    assert res.log_modulus == -np.inf


def test_eval_high_truncation_consistency():
    Wbig = wt.make_gevrey(2.0, 1_000_000)
    P5 = up.build(Wbig, 1.0, 100_000, store_coeffs=False)
    P6 = up.build(Wbig, 1.0, 1_000_000, store_coeffs=False)
    v5, v6 = P5.eval(1.0), P6.eval(1.0)
    assert abs(v5.value - v6.value) <= 1e-10 * abs(v6.value)
    # and the tail certificate covers the difference
    assert abs(v5.value - v6.value) <= abs(v6.value) * v5.rel_error_bound + 1e-15


def test_eval_product_matches_coeffs(W):
    P = up.build(W, 0.8, 50)
    rng = np.random.default_rng(5)
    for _ in range(25):
        z = complex(rng.uniform(-10, 10), rng.uniform(-3, 3))
        via_prod = P.eval(z).value
        via_coef = P.eval_via_coeffs(z)
        assert abs(via_prod - via_coef) <= 1e-9 * max(abs(via_coef), 1.0)


def test_log_eval_many_matches_scalar(W):
    P = up.build(W, 0.6, 30)
    zs = np.array([0.5 + 0.1j, 3.0, 10.0 - 1.0j, 100.0 + 5.0j])
    many = P.log_eval_many(zs)
    for z, lv in zip(zs, many):
        single = P.log_eval(z)
        assert abs(lv.real - single.real) < 1e-9 * max(abs(single.real), 1.0)


# -- admissible region -------------------------------------------------------------


def test_region_examples():
    assert up.region_contains(1.0 + 0.0j, 1.0)        # 0 < 1.5
    assert not up.region_contains(2.0j, 1.0)          # 2 >= 1
    assert not up.region_contains(2.0 + 2.0j, 1.0)    # boundary is strict


@given(st.floats(min_value=-50, max_value=50),
       st.floats(min_value=-50, max_value=50))
def test_region_definition(x, y):
    L = 0.5
    z = complex(x, y)
    assert up.region_contains(z, L) == (abs(y) < abs(x) / 2.0 + 1.0 / L)


# -- growth bounds ------------------------------------------------------------------


def test_lower_bound_real_axis(P_flagship):
    rep = up.verify_growth_bounds(P_flagship, np.array([1.0, 10.0, 100.0]))
    assert rep.violations_statement == 0
    assert np.all(rep.margin_statement + rep.tail_allowance >= 0.0)
    # positive slack away from zero
    assert rep.margin_statement[1] > 0 and rep.margin_statement[2] > 0


def test_lower_bound_at_origin_is_equality(P_flagship):
    rep = up.verify_growth_bounds(P_flagship, np.array([1e-30 + 0.0j]))
    assert abs(rep.logP[0]) < 1e-12 and abs(rep.margin_statement[0]) < 1e-12


def test_halton_experiment(P_flagship):
    zs = up.region_samples(P_flagship.L, 1000, 1000.0)
    assert len(zs) > 900
    rep = up.verify_growth_bounds(P_flagship, zs)
    assert rep.violations_statement == 0
    assert rep.lower_ok
    # capped-convention upper pair at L1 = 2L is reported and finite
    L1, C = rep.upper_capped
    assert L1 == 2.0 * P_flagship.L and np.isfinite(C)


def test_display_variant_genuinely_fails(P_flagship, W400):
    """The stronger e^{2M(|z|)} form is violated at real z = 2 for L = 0.5:
    |P(2)| ~ 2.17 < e^{2M(2)} = 4 (this is why the weaker statement form is
    the gate)."""
    logP = P_flagship.log_eval(2.0).real
    assert logP < 2.0 * wt.assoc(W400, 2.0) - 0.1


def test_growth_bounds_rejects_outside(P_flagship):
    with pytest.raises(ValueError):
        up.verify_growth_bounds(P_flagship, np.array([100.0j]))


# -- exponential conjugation ---------------------------------------------------------


def test_conjugate_identity_operator():
    b, _ = up.exp_conjugate([1.0], 5.0)
    assert np.array_equal(b, [1.0])


def test_conjugate_canonical_example():
    b, rep = up.exp_conjugate([1.0, 0.0, 1.0], 1.0)
    assert np.array_equal(b, [2.0, -2.0, 1.0])
    assert rep["finite"]


def test_conjugate_zero_shift():
    a = [0.3, -1.0, 2.0, 0.1]
    b, _ = up.exp_conjugate(a, 0.0)
    assert np.array_equal(b, a)


def test_conjugate_first_derivative():
    b, _ = up.exp_conjugate([0.0, 1.0], 2.0)  # e^{2x} D e^{-2x} = D - 2
    assert np.array_equal(b, [-2.0, 1.0])


def test_conjugate_rejects_jmax():
    with pytest.raises(ValueError):
        up.exp_conjugate([1.0, 0.0, 1.0], 1.0, jmax=5)


def test_operator_identity_random_cases():
    rng = np.random.default_rng(11)
    xs = np.linspace(-1.5, 1.5, 10)
    for _ in range(20):
        g = rng.normal(size=int(rng.integers(2, 8)))
        a = rng.normal(size=int(rng.integers(1, 6)))
        shift = float(rng.choice([-1.0, 0.5, 2.0]))
        assert up.conjugation_identity_residual(a, shift, g, xs) < 1e-9


@given(st.floats(min_value=-2.0, max_value=2.0))
def test_conjugate_involution(h):
    a = np.array([0.5, -1.0, 2.0, 0.25, 0.1])
    b, _ = up.exp_conjugate(a, h)
    back, _ = up.exp_conjugate(b, -h)
    assert np.max(np.abs(back - a)) < 1e-10


def test_binomial_inequality_paper_range():
    # C(j+k, j) <= 2^{k+1} k^k e^j for 1 <= j, k <= 40
    for j in range(1, 41):
        for k in range(1, 41):
            assert math.comb(j + k, j) <= 2.0 ** (k + 1) * float(k) ** k * math.exp(j)


def test_power_inequality_paper_range():
    # j^k <= k^k e^j for 1 <= j, k <= 60
    for j in range(1, 61):
        for k in range(1, 61):
            assert float(j) ** k <= float(k) ** k * math.exp(j)


def test_flagship_coefficient_fit(P_flagship, W400):
    b, rep = up.exp_conjugate(P_flagship.coeffs, 1.0, W=wt.extend(W400, 2000))
    assert rep["finite"] and np.isfinite(rep["sup"])


def test_coefficient_decay_envelope(P_flagship):
    """|a_p| <= C1 L2^p / M_p for the fitted C1 with L2 a small multiple of L."""
    W = P_flagship.W
    a = P_flagship.coeffs[::2]
    p = np.arange(len(a))
    nz = a > 0
    logM2 = W.logM[: 2 * len(a) : 2]  # M_{2p}
    need = np.log(a[nz]) + logM2[nz]
    k = 2 * p[nz]
    k = k[1:]
    L2 = np.exp(np.max(need[1:] / k))
    assert L2 < 2.0 * P_flagship.L  # empirically ~L; the bound is generous
