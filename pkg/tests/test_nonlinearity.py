import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anisolab.errors import InvalidLevelError
from anisolab.nonlinearity import (
    check_structure, check_subcritical, critical_exponent, custom, growth_decay,
    parse_nonlinearity, power, truncate, untruncated, zero,
)

levels = st.sampled_from([1.0, 2.0, 3.5, 8.0, 64.0])
values = st.floats(-50.0, 50.0, allow_nan=False)


def test_critical_exponents():
    assert critical_exponent(2) == 3.0
    assert critical_exponent(3) == 2.0


def test_power_is_odd_and_matches_formula():
    g = power(2.5)
    s = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(g(s), np.abs(s) ** 1.5 * s)
    np.testing.assert_allclose(g(-s), -g(s))
    np.testing.assert_allclose(g.prime(s), 2.5 * np.abs(s) ** 1.5)


def test_parse_nonlinearity():
    assert parse_nonlinearity("power:2.0").p == 2.0
    assert parse_nonlinearity(" Zero ").is_zero
    assert parse_nonlinearity("linear").is_zero
    with pytest.raises(ValueError):
        parse_nonlinearity("exp:1")


@settings(max_examples=200, deadline=None, derandomize=True)
@given(levels, values)
def test_truncation_sandwich_and_oddness(n, s):
    g = power(2.0)
    gn = truncate(g, n)
    v = float(gn(s))
    assert abs(v) <= min(abs(float(g(s))), n) + 1e-12
    assert float(gn(-s)) == -v
    assert v * s >= 0


@settings(max_examples=200, deadline=None, derandomize=True)
@given(levels, values, values)
def test_truncation_is_nondecreasing(n, a, b):
    gn = truncate(power(3.0), n)
    lo, hi = min(a, b), max(a, b)
    assert float(gn(lo)) <= float(gn(hi)) + 1e-12


@settings(max_examples=100, deadline=None, derandomize=True)
@given(levels, st.floats(0.0, 20.0))
def test_truncation_derivative_matches_difference_quotient(n, s):
    gn = truncate(power(2.0), n)
    d = 1e-6
    dq = (float(gn(s + d)) - float(gn(s - d))) / (2 * d)
    assert float(gn.prime(s)) == pytest.approx(dq, rel=1e-4, abs=1e-6)


def test_truncation_is_c1_at_the_knee():
    g = power(2.0)
    gn = truncate(g, 5.0)
    knee = math.sqrt(4.0)  # g(knee) = n - 1
    left = gn.prime(knee - 1e-9)
    right = gn.prime(knee + 1e-9)
    assert left == pytest.approx(right, rel=1e-6)
    assert float(gn(knee)) == pytest.approx(4.0)


def test_truncation_monotone_in_level():
    # larger cap, larger absorption on s > 0 (g_n <= g_{n+1})
    g = power(2.0)
    s = np.linspace(0, 10, 101)
    for n in (1, 2, 4, 8):
        assert np.all(truncate(g, n)(s) <= truncate(g, 2 * n)(s) + 1e-15)


def test_truncation_inactive_range():
    g = power(2.0)
    gn = truncate(g, 10.0)
    assert gn.inactive_on(3.0)
    assert not gn.inactive_on(3.1)
    s = np.linspace(-3, 3, 31)
    np.testing.assert_array_equal(gn(s), g(s))


def test_invalid_levels():
    with pytest.raises(InvalidLevelError):
        truncate(power(2.0), 0.5)
    with pytest.raises(InvalidLevelError):
        truncate(power(2.0), float("nan"))
    assert untruncated(power(2.0)).label == "power:2"
    assert truncate(power(2.0), 4).label == "power:2|n=4"


def test_infinite_level_is_the_identity_and_warning_free():
    g = power(2.0)
    gi = untruncated(g)
    s = np.array([-1e3, -1.0, 0.0, 2.0])
    with np.errstate(all="raise"):
        np.testing.assert_array_equal(gi(s), g(s))
        np.testing.assert_array_equal(gi.prime(s), g.prime(s))


@pytest.mark.parametrize("N,p,ok", [(2, 2.0, True), (2, 2.99, True), (2, 3.0, False),
                                    (2, 3.5, False), (3, 1.5, True), (3, 2.0, False)])
def test_check_subcritical_power(N, p, ok):
    res = check_subcritical(power(p), N)
    assert res["converges"] is ok
    assert res["critical_exponent"] == critical_exponent(N)
    if ok:
        q = critical_exponent(N)
        # closed form: int_1^inf s^{p-1-q} ds = 1/(q-p)
        assert res["integral_estimate"] == pytest.approx(1.0 / (q - p), rel=1e-6)


def test_check_subcritical_custom_and_zero():
    log_g = custom(lambda s: np.log1p(np.abs(s)) * np.sign(s),
                   lambda s: 1.0 / (1.0 + np.abs(s)), label="log")
    assert check_subcritical(log_g, 2)["converges"]
    assert check_subcritical(zero(), 2)["integral_estimate"] == 0.0


def test_check_structure_power_two():
    res = check_structure(power(2.0))
    assert res["holds"]
    assert np.isfinite(res["c1_estimate"])
    # the ratio blows up like 1/sqrt(t) as s, t -> 0 with t ~ s^2: the box edge wins
    assert res["max_at_box_edge"]
    assert res["c1_estimate"] == pytest.approx(1.0 / math.sqrt(1e-3), rel=0.1)


def test_check_structure_linear_is_bounded_by_one():
    res = check_structure(power(1.0))
    assert res["c1_estimate"] <= 1.0 + 1e-9


def test_growth_decay_samples():
    rows = growth_decay(power(2.0), 2, s_max=1e4, samples=5)
    s, v = np.array(rows).T
    np.testing.assert_allclose(v, s ** -1.0)
