import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import binom, eval_jacobi, roots_jacobi

from twopoint.jacobi import (CoefficientSequence, JacobiParams, QuadratureError, alpha_raising_check,
                             analyze_coefficients, gauss_jacobi_rule, jacobi_at_one, jacobi_envelope, jacobi_eval,
                             jacobi_series, jacobi_table, legendre_eval, read_coefficients_csv)

PAIRS = [(0, 0), (0.5, 0.5), (0, -0.5), (1, 0), (3, 1), (7, 3), (0.5, -0.5)]


def explicit_jacobi(n, a, b, x):
    """``sum_k binom(n+a, n-k) binom(n+b, k) ((x-1)/2)^k ((x+1)/2)^(n-k)``."""
    return sum(binom(n + a, n - k) * binom(n + b, k) * ((x - 1) / 2) ** k * ((x + 1) / 2) ** (n - k)
               for k in range(n + 1))


@pytest.mark.parametrize("a, b", PAIRS)
def test_recurrence_matches_explicit_sum_and_scipy(a, b):
    x = np.linspace(-1, 1, 41)
    for n in range(0, 13):
        ours = jacobi_eval((a, b), n, x)
        assert np.allclose(ours, explicit_jacobi(n, a, b, x), rtol=1e-10, atol=1e-10)
        assert np.allclose(ours, eval_jacobi(n, a, b, x), rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("a, b", [(7, 3), (3, 1)])
def test_high_degree_against_mpmath(a, b):
    mpmath.mp.dps = 40
    for x in (-0.93, -0.2, 0.31, 0.77):
        exact = float(mpmath.jacobi(64, a, b, x))
        assert math.isclose(jacobi_eval((a, b), 64, x), exact, rel_tol=1e-12, abs_tol=1e-12 * abs(exact) + 1e-300)


@given(a=st.sampled_from(PAIRS), n=st.integers(0, 200))
def test_normalized_value_at_one(a, n):
    assert math.isclose(jacobi_eval(a, n, 1.0, normalized=True), 1.0, rel_tol=1e-12)


def test_value_at_one_is_binomial():
    assert math.isclose(jacobi_at_one((1, 0), 5), 6.0)
    assert math.isclose(jacobi_at_one((0.5, 0.5), 3), binom(3.5, 3))


@pytest.mark.parametrize("a, b", PAIRS)
def test_table_and_series_agree(a, b):
    x = np.linspace(-1, 1, 17)
    T = jacobi_table((a, b), 20, x)
    c = np.random.default_rng(0).standard_normal(21)
    assert np.allclose(c @ T, jacobi_series(c, (a, b), x), atol=1e-12)


@given(a=st.sampled_from(PAIRS), n=st.integers(1, 300), theta=st.floats(1e-3, math.pi - 1e-3))
def test_envelope_bounds_polynomial(a, n, theta):
    if min(a) < -0.5:
        return
    p = abs(jacobi_eval(a, n, math.cos(theta), normalized=True))
    assert p <= jacobi_envelope(a, n, theta).item() * (1 + 1e-12)


def test_legendre():
    x = np.linspace(-1, 1, 9)
    assert np.allclose(legendre_eval(5, x), eval_jacobi(5, 0, 0, x))
    assert legendre_eval(0, 0.3) == 1.0


@pytest.mark.parametrize("a, b", PAIRS)
def test_gauss_rule_matches_scipy(a, b):
    rule = gauss_jacobi_rule((a, b), 20)
    x, w = roots_jacobi(20, a, b)
    assert np.allclose(rule.nodes, x, atol=1e-13)
    assert np.allclose(rule.weights, w, rtol=1e-11)


@pytest.mark.parametrize("policy", ["gauss_jacobi", "adaptive"])
@given(a=st.sampled_from(PAIRS[:5]), coeffs=st.lists(st.floats(-2, 2), min_size=1, max_size=9))
def test_analysis_recovers_finite_series(policy, a, coeffs):
    p = JacobiParams(*map(float, a))
    g = lambda t: jacobi_series(np.array(coeffs), p, np.cos(t))
    seq = analyze_coefficients(g, p, len(coeffs) + 2, policy=policy, tol=1e-12)
    assert np.allclose(seq.values[: len(coeffs)], coeffs, atol=1e-9)
    assert np.allclose(seq.values[len(coeffs):], 0.0, atol=1e-9)


def test_adaptive_honours_breakpoints():
    # an indicator of [0, 1] has b_0 = weight mass of [0, 1] / total mass
    p = JacobiParams(0.0, 0.0)
    seq = analyze_coefficients(lambda t: (t < 1.0).astype(float), p, 0, policy="adaptive", splits=(1.0,), tol=1e-13)
    assert math.isclose(seq.values[0], (1 - math.cos(1.0)) / 2, rel_tol=1e-12)


def test_adaptive_reports_failure():
    with pytest.raises(QuadratureError):
        analyze_coefficients(lambda t: np.sign(np.sin(40 * t)) * np.abs(t - 1.234567) ** 0.01, (7, 3), 64,
                             policy="adaptive", tol=1e-16, max_rounds=3)


@pytest.mark.parametrize("a, b", [(0, 0), (1, 0), (0.5, 0.5), (0, -0.5)])
def test_alpha_raising_relation(a, b):
    g = lambda t: np.exp(np.cos(t)) * (1 + np.sin(t / 2) ** 2)
    lo = analyze_coefficients(g, (a, b), 30)
    hi = analyze_coefficients(g, (a + 1, b), 30)
    for n in range(29):
        assert alpha_raising_check(lo, hi, n) < 5e-11


def test_invalid_parameters():
    with pytest.raises(ValueError):
        JacobiParams(-1.0, 0.0)
    with pytest.raises(ValueError):
        jacobi_eval((0, 0), -1, 0.0)


def test_coefficient_csv_round_trip(tmp_path):
    vals = np.array([1.0, 1 / 3, 1e-300, 2.5e17])
    CoefficientSequence(JacobiParams(0.0, 0.0), vals, "quadrature").to_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "n,b_n"
    assert np.array_equal(read_coefficients_csv(tmp_path / "c.csv"), vals)
