"""Compact two-point homogeneous spaces: parameters, distances, sampling.

Every family is normalized to diameter pi. Points on the projective families are
stored as unit representatives in R^{d+1} (real), C^{m+1} (complex, d = 2m) or
H^{k+1} (quaternionic, d = 4k, stored as interleaved reals of length 4(k+1)).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .jacobi import JacobiParams


class Family(str, enum.Enum):
    SPHERE = "sphere"
    REAL_PROJECTIVE = "rp"
    COMPLEX_PROJECTIVE = "cp"
    QUATERNION_PROJECTIVE = "hp"
    CAYLEY_PLANE = "cayley"


_ALIASES = {
    "s": Family.SPHERE, "sphere": Family.SPHERE,
    "rp": Family.REAL_PROJECTIVE, "real_projective": Family.REAL_PROJECTIVE,
    "cp": Family.COMPLEX_PROJECTIVE, "complex_projective": Family.COMPLEX_PROJECTIVE,
    "hp": Family.QUATERNION_PROJECTIVE, "quaternion_projective": Family.QUATERNION_PROJECTIVE,
    "cayley": Family.CAYLEY_PLANE, "op": Family.CAYLEY_PLANE,
}

_BETA = {
    Family.REAL_PROJECTIVE: Fraction(-1, 2),
    Family.COMPLEX_PROJECTIVE: Fraction(0),
    Family.QUATERNION_PROJECTIVE: Fraction(1),
    Family.CAYLEY_PLANE: Fraction(3),
}


class SpaceError(ValueError):
    """Inadmissible family/dimension or an operation the family does not support."""


def _family(family) -> Family:
    if isinstance(family, Family):
        return family
    key = str(family).strip().lower()
    if key not in _ALIASES:
        raise SpaceError(f"unknown space family {family!r}")
    return _ALIASES[key]


@dataclass(frozen=True)
class Space:
    family: Family
    d: int

    def __post_init__(self):
        object.__setattr__(self, "family", _family(self.family))
        _check_dimension(self.family, self.d)

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.d - 2, 2)

    @property
    def beta(self) -> Fraction:
        if self.family is Family.SPHERE:
            return Fraction(self.d - 2, 2)
        return _BETA[self.family]

    @property
    def jacobi(self) -> JacobiParams:
        return JacobiParams(float(self.alpha), float(self.beta))

    @property
    def has_points(self) -> bool:
        return self.family is not Family.CAYLEY_PLANE

    @property
    def coord_dim(self) -> int:
        """Length of the stored coordinate vector of a point."""
        f = self.family
        if f in (Family.SPHERE, Family.REAL_PROJECTIVE):
            return self.d + 1
        if f is Family.COMPLEX_PROJECTIVE:
            return self.d // 2 + 1
        if f is Family.QUATERNION_PROJECTIVE:
            return 4 * (self.d // 4 + 1)
        raise SpaceError("the Cayley plane has no point representation")

    @property
    def label(self) -> str:
        return f"{self.family.value}:{self.d}"

    def to_json(self) -> dict:
        return {"family": self.family.value, "d": self.d}

    @classmethod
    def from_json(cls, obj: dict) -> "Space":
        return space_params(obj["family"], int(obj["d"]))

    def __str__(self):
        return self.label


def _check_dimension(f: Family, d):
    if not isinstance(d, (int, np.integer)) or isinstance(d, bool):
        raise SpaceError(f"dimension must be an integer, got {d!r}")
    if f is Family.SPHERE and d < 1:
        raise SpaceError("sphere needs d >= 1")
    if f is Family.REAL_PROJECTIVE and d < 2:
        raise SpaceError("real projective space needs d >= 2")
    if f is Family.COMPLEX_PROJECTIVE and (d % 2 or d < 4):
        raise SpaceError("complex projective space needs d even and d >= 4")
    if f is Family.QUATERNION_PROJECTIVE and (d % 4 or d < 8):
        raise SpaceError("quaternionic projective space needs d divisible by 4 and d >= 8")
    if f is Family.CAYLEY_PLANE and d != 16:
        raise SpaceError("the Cayley plane needs d = 16")


def space_params(family, d: int) -> Space:
    return Space(_family(family), d)


def parse_space(text: str) -> Space:
    """Parse ``"sphere:2"``, ``"cp:4"``, ``"cayley"`` etc."""
    name, _, dim = text.partition(":")
    fam = _family(name)
    if not dim:
        if fam is not Family.CAYLEY_PLANE:
            raise SpaceError(f"space {text!r} needs a dimension, e.g. {name}:2")
        dim = "16"
    try:
        d = int(dim)
    except ValueError:
        raise SpaceError(f"bad dimension in {text!r}") from None
    return space_params(fam, d)


def _require_points(space: Space):
    if not space.has_points:
        raise SpaceError("the Cayley plane has no point representation; use spectral operations only")


# -- points --------------------------------------------------------------------

@dataclass(frozen=True)
class Point:
    space: Space
    coords: np.ndarray

    def __post_init__(self):
        _require_points(self.space)
        c = np.asarray(self.coords)
        if c.shape != (self.space.coord_dim,):
            raise SpaceError(f"{self.space} points need {self.space.coord_dim} coordinates, got shape {c.shape}")
        if abs(np.linalg.norm(c) - 1.0) > 1e-12:
            raise SpaceError("point coordinates must have unit norm")
        object.__setattr__(self, "coords", c)


@dataclass
class PointConfiguration:
    space: Space
    coords: np.ndarray  # (n, coord_dim)
    spacing_bounds: tuple[float, float] | None = None
    _dist: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.coords)

    @property
    def points(self) -> list[Point]:
        return [Point(self.space, c) for c in self.coords]

    @property
    def distances(self) -> np.ndarray:
        if self._dist is None:
            self._dist = distance_matrix(self.space, self.coords)
        return self._dist

    def subset(self, idx) -> "PointConfiguration":
        idx = np.asarray(idx)
        return PointConfiguration(self.space, self.coords[idx], self.spacing_bounds,
                                  self.distances[np.ix_(idx, idx)])


def _quat_abs_inner(x, y):
    """|sum_i conj(x_i) y_i| for quaternion vectors stored as (..., k, 4)."""
    a0, av = x[..., 0], x[..., 1:]
    b0, bv = y[..., 0], y[..., 1:]
    re = (a0 * b0 + np.sum(av * bv, axis=-1)).sum(axis=-1)
    vec = (a0[..., None] * bv - b0[..., None] * av - np.cross(av, bv)).sum(axis=-2)
    return np.sqrt(re ** 2 + np.sum(vec ** 2, axis=-1))


def _abs_inner(space: Space, x, y):
    f = space.family
    if f is Family.SPHERE:
        return np.sum(x * y, axis=-1)
    if f is Family.REAL_PROJECTIVE:
        return np.abs(np.sum(x * y, axis=-1))
    if f is Family.COMPLEX_PROJECTIVE:
        return np.abs(np.sum(np.conj(x) * y, axis=-1))
    k = space.coord_dim // 4
    return _quat_abs_inner(x.reshape(x.shape[:-1] + (k, 4)), y.reshape(y.shape[:-1] + (k, 4)))


def _angle(space: Space, ip):
    ip = np.clip(ip, -1.0, 1.0)
    if space.family is Family.SPHERE:
        return np.arccos(ip)
    return np.clip(2.0 * np.arccos(ip), 0.0, math.pi)


def geodesic_distance(x: Point, y: Point) -> float:
    if x.space != y.space:
        raise SpaceError(f"points live on different spaces ({x.space} vs {y.space})")
    _require_points(x.space)
    return float(_angle(x.space, _abs_inner(x.space, x.coords, y.coords)))


def distance_matrix(space: Space, coords, other=None) -> np.ndarray:
    """Pairwise geodesic distances between rows of ``coords`` (and ``other``)."""
    _require_points(space)
    a = np.asarray(coords)
    b = a if other is None else np.asarray(other)
    if space.family in (Family.SPHERE, Family.REAL_PROJECTIVE):
        ip = a @ b.T
        if space.family is Family.REAL_PROJECTIVE:
            ip = np.abs(ip)
    elif space.family is Family.COMPLEX_PROJECTIVE:
        ip = np.abs(np.conj(a) @ b.T)
    else:
        ip = _abs_inner(space, a[:, None, :], b[None, :, :])
    rho = _angle(space, ip)
    if other is None:
        rho = (rho + rho.T) / 2
        np.fill_diagonal(rho, 0.0)
    return rho


def _canonical(space: Space, v):
    f = space.family
    if f is Family.REAL_PROJECTIVE:
        return v * (1.0 if v[0] >= 0 else -1.0)
    if f is Family.COMPLEX_PROJECTIVE:
        z = v[0]
        return v * (np.conj(z) / abs(z)) if abs(z) > 0 else v
    if f is Family.QUATERNION_PROJECTIVE:
        q = v.reshape(-1, 4)
        u = q[0] / np.linalg.norm(q[0])
        # right-multiply every entry by conj(u): first entry becomes real positive
        c = np.array([u[0], -u[1], -u[2], -u[3]])
        out = _quat_mul(q, np.broadcast_to(c, q.shape))
        return out.reshape(-1)
    return v


def _quat_mul(p, q):
    p0, pv = p[..., 0], p[..., 1:]
    q0, qv = q[..., 0], q[..., 1:]
    re = p0 * q0 - np.sum(pv * qv, axis=-1)
    vec = p0[..., None] * qv + q0[..., None] * pv + np.cross(pv, qv)
    return np.concatenate([re[..., None], vec], axis=-1)


def random_point(space: Space, rng: np.random.Generator) -> Point:
    """Uniform point: normalized Gaussian vector, reduced to a canonical representative."""
    _require_points(space)
    if space.family is Family.COMPLEX_PROJECTIVE:
        m = space.coord_dim
        v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    else:
        v = rng.standard_normal(space.coord_dim)
    v = v / np.linalg.norm(v)
    return Point(space, _canonical(space, v))


def random_configuration(space: Space, n: int, rng: np.random.Generator) -> PointConfiguration:
    coords = np.array([random_point(space, rng).coords for _ in range(n)])
    return PointConfiguration(space, coords)


def geodesic_points(space: Space, n: int, max_points: int = 4096) -> PointConfiguration:
    """``2**n`` equally spaced points on one closed geodesic.

    Consecutive points are ``2 pi 2^-n`` apart for every family (the projective
    geodesic is the image of a great half-circle), so ``K' = K = 2 pi``.
    """
    _require_points(space)
    if n < 1:
        raise SpaceError("need n >= 1")
    N = 2 ** n
    if N > max_points:
        raise SpaceError(f"2**{n} = {N} points exceed the budget of {max_points}")
    k = np.arange(N)
    half = math.pi if space.family is not Family.SPHERE else 2 * math.pi
    ang = half * k / N
    coords = np.zeros((N, space.coord_dim), dtype=complex if space.family is Family.COMPLEX_PROJECTIVE else float)
    coords[:, 0] = np.cos(ang)
    # second axis: e1 (real), e1 in the complex vector, or the real part of the second quaternion
    coords[:, 4 if space.family is Family.QUATERNION_PROJECTIVE else 1] = np.sin(ang)
    r = np.abs(k[:, None] - k[None, :])
    dist = 2 * math.pi * np.minimum(r, N - r) / N
    return PointConfiguration(space, coords, (2 * math.pi, 2 * math.pi), dist)


# -- eigenstructure ----------------------------------------------------------------

def eigenvalue_lambda(space: Space, l) -> float:
    a, b = float(space.alpha), float(space.beta)
    return l * (l + a + b + 1)


def _gamma_exact(x: Fraction) -> tuple[Fraction, int]:
    """``Gamma(x) = q sqrt(pi)^k`` for a positive integer or half-integer ``x``; returns ``(q, k)``."""
    if x.denominator == 1:
        return Fraction(math.factorial(x.numerator - 1)), 0
    if x.denominator != 2 or x <= 0:
        raise ValueError(f"need a positive integer or half-integer, got {x}")
    n = (x.numerator - 1) // 2  # x = n + 1/2
    return Fraction(math.factorial(2 * n), 4 ** n * math.factorial(n)), 1


def _pochhammer(x: Fraction, k: int) -> Fraction:
    """``Gamma(x + k) / Gamma(x)`` for an integer ``k`` of either sign."""
    out = Fraction(1)
    for j in range(abs(k)):
        out *= x + j if k > 0 else x - 1 - j
    return out if k >= 0 else 1 / out


def _gamma_ratio_exact(num, den) -> Fraction:
    """``prod Gamma(num) / prod Gamma(den)``; arguments at integer distance are paired, nearest first."""
    num, den = list(num), list(den)
    q = Fraction(1)
    for x in list(num):
        near = [y for y in den if (x - y).denominator == 1]
        match = min(near, key=lambda y: abs(x - y)) if near else None
        if match is not None:
            q *= _pochhammer(match, int(x - match))
            num.remove(x)
            den.remove(match)
    k = 0
    for x in num:
        a, j = _gamma_exact(x)
        q, k = q * a, k + j
    for x in den:
        a, j = _gamma_exact(x)
        q, k = q / a, k - j
    if k != 0:
        raise ArithmeticError("sqrt(pi) factors do not cancel")
    return q


@lru_cache(maxsize=4096)
def _h_exact(alpha: Fraction, beta: Fraction, l: int) -> int:
    s = alpha + beta + 1
    # (2l+s) G(l+s) G(l+a+1) G(b+1) / (G(s+1) G(l+1) G(a+1) G(l+b+1))
    q = (2 * l + s) * _gamma_ratio_exact([l + s, l + alpha + 1, beta + 1], [s + 1, Fraction(l + 1), alpha + 1,
                                                                            l + beta + 1])
    if q.denominator != 1:
        raise ArithmeticError(f"dimension {q} is not an integer")
    return q.numerator


def kl_dimension_h(space: Space, l: int) -> int:
    """Dimension of the degree-``l`` eigenspace of the Laplace-Beltrami operator (exact integer)."""
    if l < 0:
        raise ValueError("l must be nonnegative")
    if l == 0:
        return 1
    return _h_exact(space.alpha, space.beta, int(l))


def kl_normalization(space: Space) -> float:
    """Constant in front of the harmonic expansion: sqrt of the sphere's area, 1 otherwise."""
    if space.family is Family.SPHERE:
        d = space.d
        return math.sqrt(2 * math.pi ** ((d + 1) / 2) / math.gamma((d + 1) / 2))
    return 1.0
