import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twopoint.rng import substream
from twopoint.spaces import (Family, Point, PointConfiguration, Space, SpaceError, distance_matrix,
                             eigenvalue_lambda, geodesic_distance, geodesic_points, kl_dimension_h,
                             kl_normalization, parse_space, random_configuration, random_point, space_params)

POINT_SPACES = ["sphere:1", "sphere:2", "sphere:3", "rp:2", "rp:3", "cp:4", "cp:6", "hp:8", "hp:12"]


@pytest.mark.parametrize("text, alpha, beta", [
    ("sphere:2", 0, 0), ("sphere:3", Fraction(1, 2), Fraction(1, 2)), ("rp:2", 0, Fraction(-1, 2)),
    ("rp:3", Fraction(1, 2), Fraction(-1, 2)), ("cp:4", 1, 0), ("hp:8", 3, 1), ("cayley", 7, 3),
])
def test_parameter_table(text, alpha, beta):
    sp = parse_space(text)
    assert (sp.alpha, sp.beta) == (alpha, beta)
    assert sp.jacobi.alpha == float(alpha)


@pytest.mark.parametrize("family, d", [("sphere", 0), ("rp", 1), ("cp", 3), ("cp", 2), ("hp", 4), ("hp", 10),
                                       ("cayley", 8), ("klein", 2)])
def test_inadmissible_dimensions(family, d):
    with pytest.raises(SpaceError):
        space_params(family, d)


def test_json_round_trip_and_label():
    for text in POINT_SPACES + ["cayley:16"]:
        sp = parse_space(text)
        assert Space.from_json(sp.to_json()) == sp
        assert parse_space(sp.label) == sp


def test_cayley_has_no_points():
    sp = parse_space("cayley")
    assert not sp.has_points
    with pytest.raises(SpaceError):
        random_point(sp, np.random.default_rng(0))


def test_point_must_be_unit():
    with pytest.raises(ValueError):
        Point(parse_space("sphere:2"), np.array([1.0, 1.0, 0.0]))


@pytest.mark.parametrize("text", POINT_SPACES)
@given(seed=st.integers(0, 2 ** 32))
def test_distance_axioms(text, seed):
    sp = parse_space(text)
    conf = random_configuration(sp, 6, substream(seed))
    D = conf.distances
    assert np.all(D >= 0) and np.all(D <= math.pi + 1e-12)
    assert np.allclose(D, D.T) and np.all(np.diag(D) == 0)
    # triangle inequality d(i, k) <= d(i, j) + d(j, k), indexed [i, j, k]
    assert np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :] + 1e-9)


@pytest.mark.parametrize("text", ["rp:3", "cp:4", "hp:8"])
@given(seed=st.integers(0, 2 ** 32))
def test_distance_ignores_representative(text, seed):
    sp = parse_space(text)
    rng = substream(seed)
    x, y = random_point(sp, rng), random_point(sp, rng)
    v = y.coords
    if sp.family is Family.REAL_PROJECTIVE:
        w = -v
    elif sp.family is Family.COMPLEX_PROJECTIVE:
        w = v * np.exp(1j * rng.uniform(0, 2 * np.pi))
    else:  # right multiplication by a unit quaternion
        u = rng.standard_normal(4)
        u /= np.linalg.norm(u)
        q = v.reshape(-1, 4)
        w = np.stack([
            q[:, 0] * u[0] - q[:, 1] * u[1] - q[:, 2] * u[2] - q[:, 3] * u[3],
            q[:, 0] * u[1] + q[:, 1] * u[0] + q[:, 2] * u[3] - q[:, 3] * u[2],
            q[:, 0] * u[2] - q[:, 1] * u[3] + q[:, 2] * u[0] + q[:, 3] * u[1],
            q[:, 0] * u[3] + q[:, 1] * u[2] - q[:, 2] * u[1] + q[:, 3] * u[0],
        ], axis=1).reshape(-1)
    assert math.isclose(geodesic_distance(x, y), geodesic_distance(x, Point(sp, w)), abs_tol=1e-7)


def test_sphere_distance_is_arc_length():
    sp = parse_space("sphere:2")
    x = Point(sp, np.array([1.0, 0.0, 0.0]))
    y = Point(sp, np.array([0.0, 1.0, 0.0]))
    assert math.isclose(geodesic_distance(x, y), math.pi / 2)
    assert math.isclose(geodesic_distance(x, Point(sp, -x.coords)), math.pi)


def test_projective_antipode_is_same_point():
    sp = parse_space("rp:2")
    x = Point(sp, np.array([0.0, 0.6, 0.8]))
    assert geodesic_distance(x, Point(sp, -x.coords)) == 0.0


@pytest.mark.parametrize("text", POINT_SPACES)
def test_geodesic_points_exact_matrix_matches_coordinates(text):
    sp = parse_space(text)
    conf = geodesic_points(sp, 5)
    assert len(conf) == 32
    assert conf.spacing_bounds == (2 * math.pi, 2 * math.pi)
    D = distance_matrix(sp, conf.coords)
    assert np.allclose(conf.distances, D, atol=1e-6)
    assert math.isclose(conf.distances[0, 1], 2 * math.pi / 32)


def test_geodesic_points_budget():
    with pytest.raises(SpaceError):
        geodesic_points(parse_space("sphere:2"), 13)


def _h_oracle(alpha: Fraction, beta: Fraction, l: int) -> Fraction:
    """``(2l+s) (s+1)_{l-1} (alpha+1)_l / (l! (beta+1)_l)`` in exact rational arithmetic."""
    s = alpha + beta + 1

    def rising(x, k):
        out = Fraction(1)
        for j in range(k):
            out *= x + j
        return out

    return (2 * l + s) * rising(s + 1, l - 1) * rising(alpha + 1, l) / (math.factorial(l) * rising(beta + 1, l))


@pytest.mark.parametrize("text", POINT_SPACES + ["cayley"])
def test_dimension_matches_rational_oracle(text):
    sp = parse_space(text)
    for l in range(1, 60):
        h = _h_oracle(sp.alpha, sp.beta, l)
        assert h.denominator == 1
        assert kl_dimension_h(sp, l) == h.numerator


@pytest.mark.parametrize("text, first", [
    ("sphere:2", [1, 3, 5, 7]), ("sphere:3", [1, 4, 9, 16]), ("sphere:1", [1, 2, 2, 2]),
    ("rp:2", [1, 5, 9, 13]), ("cp:4", [1, 8, 27, 64]), ("hp:8", [1, 14, 90, 385]),
])
def test_dimension_small_cases(text, first):
    sp = parse_space(text)
    assert [kl_dimension_h(sp, l) for l in range(4)] == first


def test_dimension_large_l_sphere():
    s2, s3 = parse_space("sphere:2"), parse_space("sphere:3")
    for l in (500, 4321, 10 ** 5):
        assert kl_dimension_h(s2, l) == 2 * l + 1
        assert kl_dimension_h(s3, l) == (l + 1) ** 2


def test_normalization_constants():
    assert math.isclose(kl_normalization(parse_space("sphere:2")) ** 2, 4 * math.pi)
    assert math.isclose(kl_normalization(parse_space("sphere:3")) ** 2, 2 * math.pi ** 2)
    assert kl_normalization(parse_space("cp:4")) == 1.0


def test_eigenvalues():
    assert eigenvalue_lambda(parse_space("sphere:2"), 3) == 12
    assert eigenvalue_lambda(parse_space("rp:2"), 2) == 2 * 2.5


def test_configuration_subset_keeps_distances():
    sp = parse_space("cp:4")
    conf = random_configuration(sp, 7, substream(3))
    sub = conf.subset([0, 3, 5])
    assert np.allclose(sub.distances, conf.distances[np.ix_([0, 3, 5], [0, 3, 5])])
    assert isinstance(sub, PointConfiguration) and len(sub) == 3
