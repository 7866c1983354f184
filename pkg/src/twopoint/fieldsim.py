"""Gaussian field sampling and the modulus-of-continuity experiment.

Two samplers share the replicate streams of :mod:`twopoint.rng`:

* ``cholesky``: ``Z = L xi`` with ``L L^T`` the Gram matrix of the truncated model;
* ``kl_s2``: the truncated Karhunen-Loeve sum ``C_2 sum_l sqrt(b_l / h_l) sum_m X_lm Y_lm``
  on the 2-sphere with real orthonormal spherical harmonics.

Replicates are drawn in fixed chunks, so the output does not depend on the
number of worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import sph_harm_y

from .covariance import NuMismatchError, ZonalCovariance, gram_matrix, zonal_eval
from .rng import chunk_ranges, ordered_map, task_stream
from .slnd import robust_cholesky
from .spaces import Family, PointConfiguration, Space, geodesic_points, kl_dimension_h, kl_normalization
from .spectra import AngularPowerSpectrum

REPLICATE_CHUNK = 64
METHODS = ("cholesky", "kl_s2")


@dataclass(frozen=True)
class FieldSample:
    config: PointConfiguration
    values: np.ndarray
    seed: int
    method: str
    model: dict = field(default_factory=dict)  # spectrum descriptor plus truncation
    replicate: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown sampling method {self.method!r}")
        if len(self.values) != len(self.config):
            raise ValueError("one value per point required")


def _draw_chunks(n_rep: int, draw, threads: int) -> np.ndarray:
    parts = ordered_map(draw, chunk_ranges(n_rep, REPLICATE_CHUNK), threads)
    return np.concatenate(parts, axis=0) if parts else np.empty((0, 0))


def _normals(seed: int, lo: int, hi: int, k: int) -> np.ndarray:
    return np.stack([task_stream(seed, "replicates", i).standard_normal(k) for i in range(lo, hi)])


# -- Cholesky ------------------------------------------------------------------------

def cholesky_draws(model: ZonalCovariance, config: PointConfiguration, seed: int, replicates: int,
                   threads: int = 1) -> np.ndarray:
    """``(replicates, n)`` array of zero-mean Gaussian vectors with the model's Gram covariance."""
    if len(config) == 0:
        raise ValueError("empty configuration")
    S = gram_matrix(model, config)
    F = robust_cholesky(S, model.partial_mass)  # FactorizationError on a non-PSD Gram matrix
    n = len(config)

    def draw(rng_range):
        lo, hi = rng_range
        return _normals(seed, lo, hi, n) @ F.L.T

    return _draw_chunks(replicates, draw, threads)


def _model_info(model: ZonalCovariance) -> dict:
    return {**model.spectrum.descriptor, "L": model.L, "certificate": model.certificate}


def cholesky_sample(model: ZonalCovariance, config: PointConfiguration, seed: int, replicates: int,
                    threads: int = 1) -> list[FieldSample]:
    Z = cholesky_draws(model, config, seed, replicates, threads)
    info = _model_info(model)
    return [FieldSample(config, Z[i], seed, "cholesky", info, i) for i in range(replicates)]


# -- Karhunen-Loeve on the 2-sphere ---------------------------------------------------------

def _polar(coords: np.ndarray):
    x, y, z = coords[:, 0], coords[:, 1], coords[:, 2]
    return np.arccos(np.clip(z, -1.0, 1.0)), np.arctan2(y, x)


def real_sph_harm(l_max: int, coords) -> np.ndarray:
    """Real orthonormal spherical harmonics, shape ``(n, (l_max+1)^2)``, ordered by ``l`` then ``m``."""
    theta, phi = _polar(np.atleast_2d(np.asarray(coords, dtype=float)))
    ls = np.concatenate([np.full(2 * l + 1, l) for l in range(l_max + 1)])
    ms = np.concatenate([np.arange(-l, l + 1) for l in range(l_max + 1)])
    Y = sph_harm_y(ls[None, :], np.abs(ms)[None, :], theta[:, None], phi[:, None])
    return np.where(ms == 0, Y.real, math.sqrt(2) * np.where(ms > 0, Y.real, Y.imag))


def _require_s2(space: Space):
    if space.family is not Family.SPHERE or space.d != 2:
        raise ValueError(f"the Karhunen-Loeve sampler needs the 2-sphere, got {space}")


def kl_draws(spectrum: AngularPowerSpectrum, config: PointConfiguration, l_max: int, seed: int,
             replicates: int, threads: int = 1) -> np.ndarray:
    _require_s2(config.space)
    if l_max > spectrum.L and spectrum.generator is None:
        raise ValueError(f"l_max = {l_max} beyond the stored spectrum (L = {spectrum.L})")
    b = spectrum.coefficients(l_max)
    h = np.array([kl_dimension_h(config.space, l) for l in range(l_max + 1)], dtype=float)
    amp = kl_normalization(config.space) * np.repeat(np.sqrt(b / h), 2 * np.arange(l_max + 1) + 1)
    Y = real_sph_harm(l_max, config.coords) * amp[None, :]
    k = Y.shape[1]

    def draw(rng_range):
        lo, hi = rng_range
        return _normals(seed, lo, hi, k) @ Y.T

    return _draw_chunks(replicates, draw, threads)


def kl_sample_s2(spectrum: AngularPowerSpectrum, config: PointConfiguration, l_max: int, seed: int,
                 replicate: int = 0) -> FieldSample:
    Z = kl_draws(spectrum, config, l_max, seed, replicate + 1)[replicate]
    return FieldSample(config, Z, seed, "kl_s2", {**spectrum.descriptor, "L": l_max}, replicate)


def kl_sample_s2_many(spectrum, config, l_max: int, seed: int, replicates: int, threads: int = 1):
    Z = kl_draws(spectrum, config, l_max, seed, replicates, threads)
    info = {**spectrum.descriptor, "L": l_max}
    return [FieldSample(config, Z[i], seed, "kl_s2", info, i) for i in range(replicates)]


# -- modulus of continuity -----------------------------------------------------------------

@dataclass(frozen=True)
class ModulusReport:
    nu: float
    eps_grid: np.ndarray
    sup_ratio: np.ndarray  # nan where no pair qualifies
    pair_count: np.ndarray
    replicates: int
    slope: float
    seed: int

    @property
    def nonempty(self) -> np.ndarray:
        return self.pair_count > 0

    @property
    def band(self) -> tuple[float, float]:
        s = self.sup_ratio[self.nonempty]
        return float(s.min()), float(s.max())

    def to_json(self) -> dict:
        lo, hi = self.band
        return {"nu": self.nu, "replicates": self.replicates, "seed": self.seed,
                "eps": [float(e) for e in self.eps_grid],
                "sup_ratio": [None if not c else float(s) for s, c in zip(self.sup_ratio, self.pair_count)],
                "pair_count": [int(c) for c in self.pair_count],
                "slope": self.slope, "band": {"min": lo, "max": hi}}


def modulus_experiment(model: ZonalCovariance, nu: float, n_levels: int, replicates: int, seed: int,
                       threads: int = 1, min_level: int = 4) -> ModulusReport:
    """Sup of ``|Z(x) - Z(y)| / (rho^(nu/2) sqrt(ln(1/rho)))`` over pairs with ``rho <= eps``.

    The field lives on ``2^n_levels`` equally spaced points of a closed geodesic; the
    grid is ``eps_j = 2 pi 2^-j`` for ``j = min_level..n_levels``. Pairs with
    ``rho >= 1/e`` are left out (the log factor is at most 1 there).
    """
    if n_levels < min_level:
        raise ValueError(f"need n_levels >= {min_level}")
    declared = model.spectrum.nu
    if declared is None or abs(float(declared) - nu) > 1e-12:
        raise NuMismatchError(f"model spectrum has nu = {declared}, experiment asked for {nu}")
    if not 0 < nu < 2:
        raise ValueError("nu must lie in (0, 2)")
    config = geodesic_points(model.space, n_levels)
    levels = np.arange(min_level, n_levels + 1)
    eps = 2 * math.pi * 2.0 ** -levels.astype(float)
    Z = cholesky_draws(model, config, seed, replicates, threads)
    # level k: consecutive points of the 2^k subgrid, i.e. lag 2^(n_levels - k) on the full grid
    level_sup = np.full(len(levels), np.nan)
    level_pairs = np.zeros(len(levels), dtype=int)
    for i, (k, rho) in enumerate(zip(levels, eps)):
        if rho >= math.exp(-1):
            continue
        step = 2 ** (n_levels - k)
        sub = Z[:, ::step]
        inc = np.abs(sub - np.roll(sub, -1, axis=1))
        level_sup[i] = inc.max() / (rho ** (nu / 2) * math.sqrt(math.log(1 / rho)))
        level_pairs[i] = sub.shape[1] if sub.shape[1] > 2 else 1
    # pairs with rho <= eps_j are those of levels >= j; sup and count accumulate from the finest level
    sup = np.full(len(levels), np.nan)
    count = np.zeros(len(levels), dtype=int)
    best, total = -math.inf, 0
    for i in range(len(levels) - 1, -1, -1):
        if level_pairs[i]:
            best, total = max(best, level_sup[i]), total + level_pairs[i]
        count[i] = total
        if total:
            sup[i] = best
    ok = count > 0
    slope = float("nan")
    if ok.sum() >= 2 and np.all(sup[ok] > 0):
        slope = float(np.polyfit(np.log(eps[ok]), np.log(sup[ok]), 1)[0])
    elif ok.sum() >= 2:
        slope = 0.0  # identically zero increments
    return ModulusReport(nu, eps, sup, count, replicates, slope, seed)


def increment_check(model: ZonalCovariance, Z: np.ndarray, i: int, j: int, rho: float) -> tuple[float, float, float]:
    """Empirical ``E|Z_i - Z_j|^2``, its standard error and the sampled law's ``2 (C_L(0) - C_L(rho))``."""
    d2 = (Z[:, i] - Z[:, j]) ** 2
    return (float(d2.mean()), float(d2.std(ddof=1) / math.sqrt(len(d2))),
            2 * (model.partial_mass - float(zonal_eval(model, rho))))
