import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twopoint.covariance import _eval_on_distances, gram_matrix, make_covariance
from twopoint.rng import substream
from twopoint.slnd import (BUMP_K_MAX, ConditioningProblem, FactorizationError, SlndViolation, bump_construct,
                           bump_n_max, bump_verify, conditional_variance, robust_cholesky, slnd_experiment,
                           variance_decomposition)
from twopoint.spaces import PointConfiguration, parse_space, random_configuration, random_point
from twopoint.spectra import AngularPowerSpectrum, powerlaw_spectrum, sine_power_spectrum

S2 = parse_space("sphere:2")
TABLE = [(0, 0), (0, -0.5), (1, 0), (3, 1), (7, 3)]


@pytest.fixture(scope="module")
def model():
    return make_covariance(S2, sine_power_spectrum(S2, 1.0, 64), tail_tol=1e-3)


def test_robust_cholesky_ladder():
    S = np.ones((3, 3))
    F = robust_cholesky(S, 1.0)
    assert F.method == "cholesky+jitter" and F.jitter > 0
    with pytest.raises(FactorizationError):
        robust_cholesky(-np.eye(2), 1.0)


def _problem(model, seed, n):
    rng = substream(seed)
    cond = random_configuration(S2, n, rng).coords
    return ConditioningProblem(model, random_point(S2, rng).coords, cond)


@given(seed=st.integers(0, 2 ** 32), n=st.integers(1, 12))
def test_conditional_variance_matches_direct_solve(model, seed, n):
    prob = _problem(model, seed, n)
    cv = conditional_variance(prob)
    S = gram_matrix(model, PointConfiguration(S2, prob.conditioners))
    c = _eval_on_distances(model, prob.distances)
    direct = model.partial_mass - c @ np.linalg.solve(S, c)
    assert math.isclose(cv.value, max(direct, 0.0), rel_tol=1e-6, abs_tol=1e-9)
    # conditioning on more points never increases the variance
    assert np.all(np.diff(cv.prefix) <= 1e-12)
    assert 0 <= cv.value <= model.partial_mass


@given(seed=st.integers(0, 2 ** 32), n=st.integers(1, 8))
def test_variance_decomposition(model, seed, n):
    prob = _problem(model, seed, n)
    cv = conditional_variance(prob)
    first, cross = variance_decomposition(prob, cv.weights)
    assert cross >= -1e-10
    assert math.isclose(first + cross, cv.value, rel_tol=1e-6, abs_tol=1e-9)
    # the first piece alone is a lower bound on the conditional variance
    assert first <= cv.value + 1e-9


def test_decomposition_with_arbitrary_weights(model):
    prob = _problem(model, 7, 5)
    a = np.array([0.3, -0.2, 0.1, 0.0, 0.5])
    first, cross = variance_decomposition(prob, a)
    S = gram_matrix(model, PointConfiguration(S2, prob.conditioners))
    c = _eval_on_distances(model, prob.distances)
    pred_var = model.partial_mass - 2 * a @ c + a @ S @ a
    assert math.isclose(first + cross, pred_var, rel_tol=1e-9)


def test_experiment_deterministic_across_threads(model):
    a = slnd_experiment(model, 1.0, 40, 8, seed=11, threads=1)
    b = slnd_experiment(model, 1.0, 40, 8, seed=11, threads=4, chunk=7)
    assert np.array_equal(a.ratios, b.ratios)
    assert a.to_json() == b.to_json()
    assert a.gamma_hat > 0 and a.monotone_all and a.support_all


def test_experiment_flags_degenerate_field():
    spec = AngularPowerSpectrum(np.array([1.0]), 1.0, True, {"nu": 1.0})
    m = make_covariance(S2, spec, L=0)
    with pytest.raises(SlndViolation) as info:
        slnd_experiment(m, 1.0, 5, 4, seed=1)
    assert info.value.worst.gamma_hat == 0.0


@pytest.mark.parametrize("pair", TABLE)
def test_bump_vanishing_low_coefficients(pair):
    for eps in (0.5, 0.25):
        bump = bump_construct(pair, 2.0, 4, eps)
        rec = bump_verify(bump, bump_n_max(eps, 32))
        assert rec.max_low_coeff <= 1e-8
        assert rec.Mr_hat > 0
        assert np.all(np.abs(rec.coeffs[4:]) <= rec.bound[4:] * (1 + 1e-12))


@given(pair=st.sampled_from(TABLE), eps=st.floats(0.05, math.pi), r=st.floats(1.1, 4.0), n0=st.integers(1, 6))
def test_bump_support_and_parameters(pair, eps, r, n0):
    bump = bump_construct(pair, r, n0, eps)
    t = np.linspace(0, math.pi, 101)
    vals = bump(t)
    assert np.all(vals[t >= eps] == 0.0)
    assert bump.R >= r + pair[0] - 0.5 - 1e-9
    assert bump.K >= n0 + bump.R


def test_bump_at_origin_is_one():
    assert bump_construct((0, 0), 2.0, 4, 0.5)(0.0) == 1.0


def test_bump_rejects_bad_input():
    with pytest.raises(ValueError):
        bump_construct((0, 0), 1.0, 4, 0.5)
    with pytest.raises(ValueError):
        bump_construct((0.3, 0), 2.0, 4, 0.5)
    with pytest.raises(ValueError):
        bump_construct((0, 0), 2.0, 4, 4.0)


def test_bump_degree_window():
    assert bump_n_max(0.5) == 2 * BUMP_K_MAX
    assert bump_n_max(0.125, 64) == 512
