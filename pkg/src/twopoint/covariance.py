"""Zonal covariances, variograms, Gram matrices and their certificates.

A model truncates ``C(t) = sum_l b_l p_l(cos t)`` at degree ``L``. The discarded
part is controlled either uniformly (``|p_l| <= 1``, so the error is at most
``sum_{l>L} b_l``) or pointwise through the Jacobi envelope
``|p_l(cos t)| <= e_l / sqrt(w(t))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh

from .jacobi import JacobiParams, envelope_scale, envelope_weight, jacobi_series, jacobi_table
from .spaces import Point, PointConfiguration, Space, distance_matrix, geodesic_distance
from .spectra import AngularPowerSpectrum, SpectrumError, truncation_index


class UncertifiedTruncationError(ValueError):
    """A model was requested without any bound on the discarded tail."""


class NuMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ZonalCovariance:
    space: Space
    spectrum: AngularPowerSpectrum
    L: int
    coeffs: np.ndarray
    tail: float  # bound on the truncation error of C (uniform or on the certified grid)
    certificate: str  # "uniform" | "pointwise" | "none"

    @property
    def params(self) -> JacobiParams:
        return self.space.jacobi

    @property
    def partial_mass(self) -> float:
        return math.fsum(self.coeffs)

    @property
    def c0(self) -> float:
        """``C(0)``: exact when the spectrum knows its total mass, else the truncated sum."""
        if self.spectrum.mass_exact:
            return self.spectrum.total_mass
        return self.partial_mass

    @property
    def certified(self) -> bool:
        return self.certificate != "none"


def _check_params(space: Space, spectrum: AngularPowerSpectrum):
    desc = spectrum.descriptor
    if "alpha" in desc:
        p = space.jacobi
        if (desc["alpha"], desc["beta"]) != (p.alpha, p.beta):
            raise SpectrumError(f"spectrum built for (alpha, beta) = ({desc['alpha']}, {desc['beta']}), "
                                f"space {space} has ({p.alpha}, {p.beta})")


def make_covariance(space: Space, spectrum: AngularPowerSpectrum, *, L: int | None = None,
                    tail_tol: float | None = None, thetas=None, allow_uncertified: bool = False,
                    max_L: int = 50_000_000) -> ZonalCovariance:
    """Truncate a spectrum with a certificate.

    * ``tail_tol`` alone: smallest ``L`` with a uniform tail bound below ``tail_tol``.
    * ``tail_tol`` and ``thetas``: smallest ``L`` (doubling search) whose pointwise
      bound is below ``tail_tol`` at every ``theta`` (``tail_tol`` may be an array).
    * ``L`` alone: the uniform bound at that ``L``; refuses when none is known unless
      ``allow_uncertified``.
    """
    _check_params(space, spectrum)
    if tail_tol is not None and thetas is not None:
        L, bound = pointwise_truncation(space.jacobi, spectrum, thetas, tail_tol, max_L=max_L)
        return ZonalCovariance(space, spectrum, L, spectrum.coefficients(L), bound, "pointwise")
    if tail_tol is not None:
        cert = truncation_index(spectrum, tail_tol, max_L=max_L)
        return ZonalCovariance(space, spectrum, cert.L, spectrum.coefficients(cert.L), cert.tail, "uniform")
    if L is None:
        L = spectrum.L
    tail = spectrum.tail_bound(L)
    if tail is None:
        if not allow_uncertified:
            raise UncertifiedTruncationError(
                "no tail bound for this spectrum; pass tail information or allow_uncertified=True")
        return ZonalCovariance(space, spectrum, L, spectrum.coefficients(L), math.inf, "none")
    return ZonalCovariance(space, spectrum, L, spectrum.coefficients(L), tail, "uniform")


# -- pointwise certificate --------------------------------------------------------------

_CHUNK = 1 << 18


def _chunks(lo, hi):
    """Consecutive ranges covering ``lo..hi`` inclusive."""
    start = lo
    while start <= hi:
        stop = min(hi, start + _CHUNK - 1)
        yield np.arange(start, stop + 1, dtype=float)
        start = stop + 1


def pointwise_tail_bound(params, spectrum: AngularPowerSpectrum, L: int, thetas, M: int | None = None):
    """Bound on ``|sum_{l>L} b_l p_l(cos t)|`` at each ``t``.

    ``sum_{L<l<=M} b_l min(1, e_l/sqrt(w)) + min(1, e_{M+1}/sqrt(w)) * sum_{l>M} b_l``,
    using that ``e_l`` does not increase with ``l``. Needs an exact total mass or a
    certified decay bound for the far tail.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    M = 4 * max(L, 1) if M is None else M
    root_w = np.sqrt(envelope_weight(params, thetas))
    acc = np.zeros_like(thetas)
    partial = math.fsum(spectrum.coefficients(L)) if spectrum.mass_exact else 0.0
    parts = [partial]
    e_prev = np.inf
    for n in _chunks(L + 1, M):
        b = spectrum.coefficients(int(n[-1]))[int(n[0]):] if spectrum.generator is None else spectrum.generator(n)
        e = envelope_scale(params, n)
        if e[0] > e_prev * (1 + 1e-12) or np.any(np.diff(e) > 1e-12 * e[:-1]):
            raise ArithmeticError("envelope factors are not monotone")
        e_prev = e[-1]
        cb = np.concatenate([[0.0], np.cumsum(b)])
        cbe = np.concatenate([[0.0], np.cumsum(b * e)])
        # number of leading terms where the envelope exceeds 1 (there min(...) = 1)
        k = len(e) - np.searchsorted(e[::-1], root_w, side="left")
        with np.errstate(divide="ignore", invalid="ignore"):
            env_part = np.where(root_w > 0, (cbe[-1] - cbe[k]) / np.where(root_w > 0, root_w, 1.0), 0.0)
        acc += cb[k] + np.where(root_w > 0, env_part, cb[-1] - cb[k])
        parts.append(math.fsum(b))
    far = spectrum.tail_bound(M, math.fsum(parts)) if spectrum.mass_exact else spectrum.tail_bound(M)
    if far is None:
        raise UncertifiedTruncationError("no bound on the far tail of the spectrum")
    e_far = envelope_scale(params, [M + 1])[0]
    with np.errstate(divide="ignore"):
        factor = np.where(root_w > 0, np.minimum(1.0, e_far / np.where(root_w > 0, root_w, 1.0)), 1.0)
    # rounding slack on the generated coefficients
    return acc * (1 + 1e-12) + factor * far


def pointwise_truncation(params, spectrum, thetas, tol, L0: int = 64, max_L: int = 50_000_000):
    """Smallest power-of-two-times-``L0`` degree whose pointwise bound is below ``tol``."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    tol = np.broadcast_to(np.asarray(tol, dtype=float), thetas.shape)
    L = L0
    while True:
        bound = pointwise_tail_bound(params, spectrum, L, thetas)
        if np.all(bound <= tol):
            return L, float(np.max(bound))
        if 2 * L > max_L:
            raise UncertifiedTruncationError(
                f"pointwise tail still {np.max(bound / tol):.3g} x tolerance at L = {L}")
        L *= 2


# -- evaluation -------------------------------------------------------------------------

def zonal_eval(model: ZonalCovariance, theta):
    """Truncated series ``sum_{l<=L} b_l p_l(cos theta)``."""
    theta = np.asarray(theta, dtype=float)
    if np.any((theta < 0) | (theta > math.pi + 1e-12)):
        raise ValueError("theta must lie in [0, pi]")
    out = jacobi_series(model.coeffs, model.params, np.cos(theta))
    out = np.where(theta == 0, model.partial_mass, out)
    return out if out.ndim else float(out)


def variogram(model: ZonalCovariance, theta):
    """``C(0) - C(theta)``; exactly 0 at ``theta = 0``.

    ``C(0)`` is the exact total mass when known, so the only error left is the
    truncation error of ``C(theta)``.
    """
    theta = np.asarray(theta, dtype=float)
    g = model.c0 - zonal_eval(model, theta)
    g = np.where(theta == 0, 0.0, np.maximum(g, 0.0))
    return g if g.ndim else float(g)


def _eval_on_distances(model: ZonalCovariance, rho: np.ndarray) -> np.ndarray:
    flat = rho.reshape(-1)
    uniq, inv = np.unique(flat, return_inverse=True)
    vals = np.asarray(zonal_eval(model, np.clip(uniq, 0.0, math.pi)), dtype=float).reshape(-1)
    return vals[inv].reshape(rho.shape)


def gram_matrix(model: ZonalCovariance, config: PointConfiguration) -> np.ndarray:
    if config.space != model.space:
        raise ValueError(f"configuration on {config.space}, model on {model.space}")
    M = _eval_on_distances(model, config.distances)
    return (M + M.T) / 2


def min_eigenvalue(M: np.ndarray) -> float:
    M = np.asarray(M, dtype=float)
    if M.shape[0] == 0:
        return 0.0
    return float(eigvalsh(M, subset_by_index=[0, 0])[0])


@dataclass(frozen=True)
class PsdReport:
    min_eig: float
    scale: float
    tol: float

    @property
    def relative(self) -> float:
        return self.min_eig / self.scale

    @property
    def ok(self) -> bool:
        return self.min_eig >= -self.tol * self.scale


def psd_check(M: np.ndarray, scale: float, tol: float = 1e-8) -> PsdReport:
    return PsdReport(min_eigenvalue(M), scale, tol)


# -- Schur-complement kernel ------------------------------------------------------------------

def schur_kernel(model: ZonalCovariance, x0: Point):
    """``K(x1, x2) = C(0) C(x1, x2) - C(x1, x0) C(x2, x0)``, a covariance whenever ``C`` is."""
    c0 = model.partial_mass

    def K(x1: Point, x2: Point) -> float:
        c12 = zonal_eval(model, geodesic_distance(x1, x2))
        return c0 * c12 - zonal_eval(model, geodesic_distance(x1, x0)) * zonal_eval(model, geodesic_distance(x2, x0))

    return K


def schur_gram(model: ZonalCovariance, config: PointConfiguration, x0: Point) -> np.ndarray:
    G = gram_matrix(model, config)
    r0 = distance_matrix(model.space, config.coords, x0.coords[None, :])[:, 0]
    c = _eval_on_distances(model, r0)
    K = model.partial_mass * G - np.outer(c, c)
    return (K + K.T) / 2


# -- variogram bounds ------------------------------------------------------------------------

@dataclass(frozen=True)
class VariogramBoundReport:
    nu: float
    delta0: float
    K1: float
    K2: float
    rho: np.ndarray
    ratio: np.ndarray
    slope: float  # fitted slope of log gamma against log rho

    def to_json(self) -> dict:
        return {"nu": self.nu, "delta0": self.delta0, "K1": self.K1, "K2": self.K2, "slope": self.slope}


def log_grid(delta0: float, size: int, decades: float = 3.0) -> np.ndarray:
    return delta0 * np.logspace(-decades, 0.0, size)


def variogram_bound_fit(model: ZonalCovariance, nu: float, delta0: float = 0.5, grid_size: int = 61,
                        spread_ceiling: float = 10.0, rho=None) -> VariogramBoundReport:
    """``K1 = min``, ``K2 = max`` of ``gamma(rho) / rho^nu`` on a log grid over ``[delta0/1e3, delta0]``."""
    if not 0 < delta0 < math.pi:
        raise ValueError("delta0 must lie in (0, pi)")
    rho = log_grid(delta0, grid_size) if rho is None else np.asarray(rho, dtype=float)
    g = np.asarray(variogram(model, rho), dtype=float)
    ratio = g / rho ** nu
    with np.errstate(divide="ignore"):
        slope = float(np.polyfit(np.log(rho), np.log(np.maximum(g, 1e-300)), 1)[0])
    K1, K2 = float(ratio.min()), float(ratio.max())
    if not K1 > 0:
        raise NuMismatchError(f"variogram ratio not bounded below (K1 = {K1:.3g}); fitted slope {slope:.3f}")
    if K2 / K1 > spread_ceiling:
        raise NuMismatchError(f"nu mismatch: ratio spread {K2 / K1:.3g} over the grid exceeds "
                              f"{spread_ceiling:g}; log-log slope of the variogram is {slope:.3f}, declared nu = {nu}")
    return VariogramBoundReport(nu, delta0, K1, K2, rho, ratio, slope)


def telescoping_constant(params, lmax: int = 128, thetas=None) -> float:
    """``max (1 - p_l(cos t)) / (l^2 t^2)`` over ``1 <= l <= lmax`` and a grid in ``(0, pi]``."""
    thetas = np.linspace(math.pi / 2000, math.pi, 2000) if thetas is None else np.asarray(thetas)
    T = jacobi_table(params, lmax, np.cos(thetas))
    l = np.arange(1, lmax + 1)[:, None]
    return float(np.max((1 - T[1:]) / (l ** 2 * thetas[None, :] ** 2)))
