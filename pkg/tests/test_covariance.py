import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twopoint.covariance import (NuMismatchError, UncertifiedTruncationError, gram_matrix, log_grid,
                                 make_covariance, min_eigenvalue, pointwise_tail_bound, psd_check, schur_gram,
                                 schur_kernel, telescoping_constant, variogram, variogram_bound_fit, zonal_eval)
from twopoint.rng import substream
from twopoint.spaces import parse_space, random_configuration, random_point
from twopoint.spectra import AngularPowerSpectrum, SpectrumError, powerlaw_spectrum, sine_power_spectrum

S2 = parse_space("sphere:2")
SPACES = ["sphere:2", "sphere:3", "rp:2", "cp:4", "hp:8"]


def test_variogram_at_zero_and_sign():
    m = make_covariance(S2, sine_power_spectrum(S2, 1.0, 64), tail_tol=1e-3)
    assert variogram(m, 0.0) == 0.0
    assert zonal_eval(m, 0.0) == m.partial_mass
    t = np.linspace(0, math.pi, 200)
    assert np.all(variogram(m, t) >= 0)
    assert m.c0 == 1.0 and m.certified


@pytest.mark.parametrize("space", ["sphere:2", "cp:4", "sphere:3", "rp:3"])
@pytest.mark.parametrize("nu", [1.0, 1.5])
def test_sine_power_variogram_identity(space, nu):
    sp = parse_space(space)
    t = np.linspace(0.05, math.pi - 0.05, 30)
    m = make_covariance(sp, sine_power_spectrum(sp, nu, 64), tail_tol=1e-5, thetas=t)
    assert m.certificate == "pointwise"
    assert np.max(np.abs(variogram(m, t) - np.sin(t / 2) ** nu)) <= 1e-5


@pytest.mark.parametrize("space", ["sphere:2", "cp:4"])
def test_pointwise_bound_dominates_actual_error(space):
    sp = parse_space(space)
    spec = sine_power_spectrum(sp, 1.0, 64)
    t = np.array([0.1, 0.7, 1.6, 2.9])
    for L in (64, 256, 1024):
        m = make_covariance(sp, spec, L=L)
        actual = np.abs(variogram(m, t) - np.sin(t / 2))
        assert np.all(actual <= pointwise_tail_bound(sp.jacobi, spec, L, t))
        assert np.all(pointwise_tail_bound(sp.jacobi, spec, L, t) <= m.tail * (1 + 1e-9) + 1e-15)


def test_uniform_certificate_from_decay():
    m = make_covariance(S2, powerlaw_spectrum(1.0, 16), tail_tol=1e-3)
    assert m.L == 999 and m.tail <= 1e-3 and m.certificate == "uniform"


def test_uncertified_refused():
    spec = AngularPowerSpectrum(np.array([1.0, 0.5, 0.25]), 1.75)
    with pytest.raises(UncertifiedTruncationError):
        make_covariance(S2, spec, L=2)
    m = make_covariance(S2, spec, L=2, allow_uncertified=True)
    assert not m.certified and m.tail == math.inf


def test_parameter_mismatch():
    with pytest.raises(SpectrumError):
        make_covariance(parse_space("cp:4"), sine_power_spectrum(S2, 1.0, 16), tail_tol=1e-2)


def test_theta_out_of_range():
    m = make_covariance(S2, powerlaw_spectrum(1.0, 16), tail_tol=1e-2)
    with pytest.raises(ValueError):
        zonal_eval(m, 4.0)


@pytest.mark.parametrize("space", SPACES)
@given(seed=st.integers(0, 2 ** 32))
def test_gram_is_psd(space, seed):
    sp = parse_space(space)
    m = make_covariance(sp, powerlaw_spectrum(1.0, 16), tail_tol=1e-3)
    G = gram_matrix(m, random_configuration(sp, 12, substream(seed)))
    assert np.allclose(G, G.T) and np.allclose(np.diag(G), m.partial_mass)
    assert psd_check(G, m.partial_mass).ok


@given(seed=st.integers(0, 2 ** 32))
def test_schur_kernel_psd_and_consistent(seed):
    rng = substream(seed)
    m = make_covariance(S2, sine_power_spectrum(S2, 1.0, 16), tail_tol=1e-3)
    conf = random_configuration(S2, 8, rng)
    x0 = random_point(S2, rng)
    K = schur_gram(m, conf, x0)
    assert min_eigenvalue(K) >= -1e-8 * m.partial_mass ** 2
    k = schur_kernel(m, x0)
    pts = conf.points
    assert math.isclose(K[1, 4], k(pts[1], pts[4]), rel_tol=1e-9, abs_tol=1e-12)


def test_psd_check_flags_negative():
    rep = psd_check(np.diag([1.0, -0.1]), 1.0)
    assert not rep.ok and rep.relative == -0.1


def test_variogram_bounds_band():
    rho = log_grid(0.5, 41)
    m = make_covariance(S2, sine_power_spectrum(S2, 1.0, 64), tail_tol=1e-4 * rho, thetas=rho)
    rep = variogram_bound_fit(m, 1.0, rho=rho)
    assert 0.494 - 1e-3 <= rep.K1 <= rep.K2 <= 0.5 + 1e-3
    assert abs(rep.slope - 1.0) < 0.01
    assert set(rep.to_json()) == {"nu", "delta0", "K1", "K2", "slope"}


def test_variogram_bounds_detect_wrong_nu():
    rho = log_grid(0.5, 41)
    m = make_covariance(S2, sine_power_spectrum(S2, 1.0, 64), tail_tol=1e-4 * rho, thetas=rho)
    with pytest.raises(NuMismatchError, match="slope"):
        variogram_bound_fit(m, 0.5, rho=rho)


@pytest.mark.parametrize("space", ["sphere:2", "cp:4", "rp:2"])
def test_telescoping_constant_finite(space):
    c = telescoping_constant(parse_space(space).jacobi, lmax=64)
    assert 0 < c < 1
