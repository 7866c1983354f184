import math

import numpy as np
import pytest
from scipy.special import eval_legendre

from twopoint.covariance import NuMismatchError, make_covariance
from twopoint.fieldsim import (FieldSample, ModulusReport, cholesky_draws, increment_check, kl_draws, kl_sample_s2,
                               modulus_experiment, real_sph_harm)
from twopoint.rng import substream
from twopoint.spaces import geodesic_points, parse_space, random_configuration
from twopoint.spectra import AngularPowerSpectrum, powerlaw_spectrum, sine_power_spectrum

S2 = parse_space("sphere:2")


def test_real_harmonics_orthonormal():
    # Gauss-Legendre in cos(theta) times a uniform grid in phi integrates degree <= 2*l_max exactly
    l_max = 6
    x, w = np.polynomial.legendre.leggauss(l_max + 2)
    phi = np.arange(2 * l_max + 2) * 2 * math.pi / (2 * l_max + 2)
    st = np.sqrt(1 - x ** 2)
    pts = np.array([[s * math.cos(p), s * math.sin(p), c] for c, s in zip(x, st) for p in phi])
    wt = np.repeat(w, len(phi)) * 2 * math.pi / len(phi)
    Y = real_sph_harm(l_max, pts)
    assert np.allclose(Y.T @ (Y * wt[:, None]), np.eye((l_max + 1) ** 2), atol=1e-12)


def test_addition_theorem(rng):
    pts = random_configuration(S2, 5, rng).coords
    Y = real_sph_harm(8, pts)
    cos = np.clip(pts @ pts.T, -1, 1)
    start = 0
    for l in range(9):
        block = Y[:, start:start + 2 * l + 1]
        start += 2 * l + 1
        assert np.allclose(block @ block.T, (2 * l + 1) / (4 * math.pi) * eval_legendre(l, cos), atol=1e-12)


def test_kl_covariance_matches_truncated_model(rng):
    spec = powerlaw_spectrum(1.0, 20)
    model = make_covariance(S2, spec, L=20)
    conf = random_configuration(S2, 4, rng)
    Y = real_sph_harm(20, conf.coords)
    from twopoint.spaces import kl_dimension_h, kl_normalization
    b = spec.coefficients(20)
    h = np.array([kl_dimension_h(S2, l) for l in range(21)], dtype=float)
    amp = kl_normalization(S2) * np.repeat(np.sqrt(b / h), 2 * np.arange(21) + 1)
    A = Y * amp
    from twopoint.covariance import gram_matrix
    assert np.allclose(A @ A.T, gram_matrix(model, conf), atol=1e-12)


def test_sampled_variances():
    model = make_covariance(S2, sine_power_spectrum(S2, 1.0, 64), tail_tol=1e-3)
    conf = geodesic_points(S2, 3)
    Zc = cholesky_draws(model, conf, 5, 4000)
    Zk = kl_draws(model.spectrum, conf, 64, 6, 4000)
    for Z in (Zc, Zk):
        var = Z.var(axis=0)
        # chi-square spread of a 4000-sample variance is about 2.2% relative
        assert np.all(np.abs(var / model.partial_mass - 1) < 0.1)


def test_draws_deterministic_across_threads():
    model = make_covariance(S2, powerlaw_spectrum(1.0, 16), tail_tol=1e-3)
    conf = geodesic_points(S2, 4)
    a = cholesky_draws(model, conf, 3, 150, threads=1)
    b = cholesky_draws(model, conf, 3, 150, threads=4)
    assert np.array_equal(a, b)
    # a prefix of the replicates does not depend on how many are requested
    assert np.array_equal(a[:40], cholesky_draws(model, conf, 3, 40))
    assert np.array_equal(kl_draws(model.spectrum, conf, 16, 3, 70, 1), kl_draws(model.spectrum, conf, 16, 3, 70, 3))


def test_kl_sample_picks_replicate():
    spec = powerlaw_spectrum(1.0, 16)
    conf = geodesic_points(S2, 2)
    s = kl_sample_s2(spec, conf, 16, 9, replicate=2)
    assert isinstance(s, FieldSample) and s.method == "kl_s2"
    assert np.array_equal(s.values, kl_draws(spec, conf, 16, 9, 3)[2])


def test_kl_requires_two_sphere():
    sp = parse_space("sphere:3")
    with pytest.raises(ValueError, match="2-sphere"):
        kl_draws(sine_power_spectrum(sp, 1.0, 16), geodesic_points(sp, 2), 16, 0, 2)


def test_field_sample_validation():
    conf = geodesic_points(S2, 2)
    with pytest.raises(ValueError):
        FieldSample(conf, np.zeros(4), 0, "fft")
    with pytest.raises(ValueError):
        FieldSample(conf, np.zeros(3), 0, "cholesky")


def test_increment_check_agrees():
    model = make_covariance(S2, sine_power_spectrum(S2, 1.0, 64), tail_tol=1e-3)
    conf = geodesic_points(S2, 4)
    Z = cholesky_draws(model, conf, 12, 3000)
    rho = 2 * math.pi / 16
    mean, se, expect = increment_check(model, Z, 0, 1, rho)
    assert abs(mean - expect) < 4 * se


def test_modulus_report_shape():
    model = make_covariance(S2, sine_power_spectrum(S2, 1.0, 128), tail_tol=1e-3)
    rep = modulus_experiment(model, 1.0, 7, 50, seed=4)
    assert isinstance(rep, ModulusReport)
    assert len(rep.eps_grid) == 4 and np.all(np.diff(rep.pair_count) <= 0)
    # level 4 has rho = 2 pi / 16 > 1/e and contributes nothing itself
    assert rep.pair_count[0] == rep.pair_count[1] == 128 + 64 + 32
    j = rep.to_json()
    assert len(j["sup_ratio"]) == 4 and j["band"]["min"] <= j["band"]["max"]
    assert math.isfinite(rep.slope)


def test_modulus_deterministic_across_threads():
    model = make_covariance(S2, sine_power_spectrum(S2, 1.0, 128), tail_tol=1e-3)
    a = modulus_experiment(model, 1.0, 6, 130, seed=8, threads=1)
    b = modulus_experiment(model, 1.0, 6, 130, seed=8, threads=4)
    assert a.to_json() == b.to_json()


def test_modulus_degenerate_field():
    spec = AngularPowerSpectrum(np.array([1.0]), 1.0, True, {"nu": 1.0})
    model = make_covariance(S2, spec, L=0)
    rep = modulus_experiment(model, 1.0, 6, 10, seed=1)
    # a constant field: only the factorization jitter of the rank-one Gram matrix is left
    assert np.all(rep.sup_ratio[rep.nonempty] < 1e-3)


def test_modulus_rejects_wrong_nu():
    model = make_covariance(S2, sine_power_spectrum(S2, 1.0, 64), tail_tol=1e-3)
    with pytest.raises(NuMismatchError):
        modulus_experiment(model, 0.5, 6, 10, seed=1)
    with pytest.raises(ValueError):
        modulus_experiment(model, 1.0, 3, 10, seed=1)
