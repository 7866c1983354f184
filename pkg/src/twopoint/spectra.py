"""Angular power spectra: power laws, the sine-power and polynomial families, decay bounds.

A spectrum ``b_0, b_1, ...`` defines the zonal covariance ``C(t) = sum_l b_l p_l(cos t)``
with normalized Jacobi polynomials ``p_l``. Closed-form families keep a generator
so they can be extended to any length, and carry their exact total mass ``C(0)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.special import bernoulli, gamma, gammaln, polygamma, zeta

from ._special import lgamma_ratio
from .jacobi import _params, analyze_coefficients, read_coefficients_csv

MODELS = ("powerlaw", "sine_power", "poly_p0", "poly_p1", "file")


class SpectrumError(ValueError):
    pass


class UnsupportedTailError(SpectrumError):
    """No certified information about the tail of the spectrum."""


@dataclass(frozen=True)
class DecayBounds:
    """``gamma1 <= b_l (1+l)^(1+nu) <= gamma2`` for ``l >= l0``."""

    nu: float
    gamma1: float
    gamma2: float
    l0: int
    certified: bool = False  # True when gamma2 holds for every l, not just the stored range

    def __post_init__(self):
        if not 0 < self.nu < 2:
            raise SpectrumError(f"nu must lie in (0, 2), got {self.nu}")
        if not (0 < self.gamma1 <= self.gamma2 < math.inf):
            raise SpectrumError(f"need 0 < gamma1 <= gamma2, got {self.gamma1}, {self.gamma2}")
        if self.l0 < 1:
            raise SpectrumError("l0 must be >= 1")

    def tail_majorant(self, L) -> float:
        """``sum_{l>L} gamma2 (1+l)^-(1+nu) <= gamma2 / nu * (1+L)^-nu``."""
        return self.gamma2 / self.nu * (1.0 + L) ** (-self.nu)


@dataclass(frozen=True)
class AngularPowerSpectrum:
    values: np.ndarray
    total_mass: float
    mass_exact: bool = False
    descriptor: dict = field(default_factory=dict)
    decay: DecayBounds | None = None
    generator: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or len(v) == 0:
            raise SpectrumError("spectrum needs at least b_0")
        if not np.all(np.isfinite(v)):
            raise SpectrumError("spectrum has non-finite entries")
        if np.any(v < 0):
            bad = int(np.argmax(v < 0))
            raise SpectrumError(f"b_{bad} = {v[bad]:.3g} < 0; not a covariance spectrum")
        object.__setattr__(self, "values", v)
        if not self.total_mass >= v.max() * (1 - 1e-12):
            raise SpectrumError("total mass below the largest coefficient")

    @property
    def L(self) -> int:
        return len(self.values) - 1

    @property
    def nu(self):
        return self.decay.nu if self.decay else self.descriptor.get("nu")

    def coefficients(self, L: int) -> np.ndarray:
        """``b_0..b_L``, generating beyond the stored range when possible."""
        if L <= self.L:
            return self.values[: L + 1]
        if self.generator is None:
            raise SpectrumError(f"spectrum stored up to l = {self.L}, requested {L}")
        extra = self.generator(np.arange(self.L + 1, L + 1, dtype=float))
        return np.concatenate([self.values, extra])

    def extend(self, L: int) -> "AngularPowerSpectrum":
        return replace(self, values=self.coefficients(L))

    def partial_mass(self, L: int) -> float:
        return math.fsum(self.coefficients(L))

    def tail_bound(self, L: int, partial: float | None = None) -> float | None:
        """Certified bound on ``sum_{l>L} b_l`` or ``None`` when nothing is known."""
        best = None
        if self.decay is not None and self.decay.certified and L + 1 >= self.decay.l0:
            best = self.decay.tail_majorant(L)
        if self.mass_exact:
            part = self.partial_mass(L) if partial is None else partial
            # slack covers relative rounding of each generated coefficient
            t = max(self.total_mass - part, 0.0) + 1e-13 * part
            best = t if best is None else min(best, t)
        return best

    def normalized(self) -> "AngularPowerSpectrum":
        c = self.total_mass
        gen = None if self.generator is None else (lambda n, g=self.generator: g(n) / c)
        dec = None
        if self.decay is not None:
            dec = replace(self.decay, gamma1=self.decay.gamma1 / c, gamma2=self.decay.gamma2 / c)
        return replace(self, values=self.values / c, total_mass=1.0, decay=dec, generator=gen,
                       descriptor={**self.descriptor, "normalized": True})

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["l", "b_l"])
            for l, b in enumerate(self.values):
                w.writerow([l, f"{b:.17g}"])


# -- power law -------------------------------------------------------------------

def powerlaw_spectrum(nu: float, L: int) -> AngularPowerSpectrum:
    """``b_l = (1+l)^-(1+nu)``; total mass ``zeta(1+nu)``."""
    if not nu > 0:
        raise SpectrumError("nu must be positive")
    gen = lambda n: (1.0 + n) ** (-(1.0 + nu))  # noqa: E731
    decay = DecayBounds(nu, 1.0, 1.0, 1, certified=True) if nu < 2 else None
    return AngularPowerSpectrum(gen(np.arange(L + 1, dtype=float)), float(zeta(1.0 + nu)), True,
                                {"model": "powerlaw", "nu": nu, "L": L}, decay, gen)


# -- sine power: C(t) = 1 - sin^nu(t/2) ---------------------------------------------

def sine_power_coefficients(params, nu: float, n) -> np.ndarray:
    """Jacobi coefficients of ``sin^nu(t/2)`` (signed; negative for n >= 1).

    With ``H = nu/2`` and ``s = alpha+beta+1``,
    ``b_n = (2n+s) G(a+H+1) G(n+s) G(n-H) / (n! G(a+1) G(n+s+H+1) G(-H))``;
    ``G(n-H)/G(-H) = prod_{j<n} (j-H)`` supplies the sign and the exact zeros at ``H = 1``.
    """
    p = _params(params)
    a, s = p.alpha, p.s
    H = nu / 2.0
    if not 0 < nu <= 2:
        raise SpectrumError(f"nu must lie in (0, 2], got {nu}")
    n = np.atleast_1d(np.asarray(n, dtype=float))
    out = np.empty_like(n)
    zero = n == 0
    # n = 0: G(s+1) G(a+H+1) / (G(a+1) G(s+H+1)), fine also on the circle (s = 0)
    out[zero] = math.exp(gammaln(s + 1) + gammaln(a + H + 1) - gammaln(a + 1) - gammaln(s + H + 1))
    m = n[~zero]
    if len(m):
        if H == 1.0:
            # prod_{j<n}(j-1) is -1 at n = 1 and 0 beyond
            v1 = math.exp(math.log(2 + s) + gammaln(a + 2) - gammaln(a + 1) + gammaln(s + 1) - gammaln(s + 3))
            out[~zero] = np.where(m == 1, -v1, 0.0)
        else:
            # G(-H) < 0 for 0 < H < 1, all other factors positive
            logv = (np.log(2 * m + s) + gammaln(a + H + 1) - gammaln(a + 1) - gammaln(-H)
                    + lgamma_ratio(m, s, 1.0) + lgamma_ratio(m, -H, s + H + 1))
            out[~zero] = -np.exp(logv)
    return out


def sine_power_asymptotic_constant(params, nu: float) -> float:
    """``lim n^(1+nu) b_n = -2 G(a+H+1) / (G(a+1) G(-H))`` for the covariance ``1 - sin^nu``."""
    p = _params(params)
    H = nu / 2.0
    if H >= 1:
        return 0.0
    return float(-2.0 * math.exp(gammaln(p.alpha + H + 1) - gammaln(p.alpha + 1)) / gamma(-H))


def sine_power_spectrum(space, nu: float, L: int, l0: int = 1) -> AngularPowerSpectrum:
    """Spectrum of ``C(t) = 1 - sin^nu(t/2)`` on ``space`` (``C(0) = 1``)."""
    p = _params(space)

    def gen(n):
        return -sine_power_coefficients(p, nu, n)

    vals = sine_power_coefficients(p, nu, np.arange(L + 1, dtype=float))
    vals = -vals
    vals[0] = 1.0 + vals[0]
    vals = np.maximum(vals, 0.0)  # exact zeros at nu = 2 may come back as -0.0
    decay = None
    if nu < 2 and L >= l0:
        scaled = vals[l0:] * (1.0 + np.arange(l0, L + 1)) ** (1 + nu)
        lim = sine_power_asymptotic_constant(p, nu)
        decay = DecayBounds(nu, float(min(scaled.min(), lim)), float(max(scaled.max(), lim)), l0,
                            certified=False)
    return AngularPowerSpectrum(vals, 1.0, True, {"model": "sine_power", "nu": nu, "L": L, "alpha": p.alpha, "beta": p.beta},
                                decay, gen)


# -- polynomial family on beta = -1/2 spaces ----------------------------------------------

def _trigamma_difference(x, c):
    """``psi'(x) - psi'(x + c)`` without cancellation for large ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 200.0
    out[small] = polygamma(1, x[small]) - polygamma(1, x[small] + c)
    z = x[~small]
    if len(z):
        # psi'(x) ~ 1/x + 1/(2x^2) + sum_k B_2k / x^(2k+1)
        lr = np.log1p(c / z)

        def diff(m):  # x^-m - (x+c)^-m
            return -np.expm1(-m * lr) * z ** (-m)

        acc = diff(1) + 0.5 * diff(2)
        B = bernoulli(16)
        for k in range(1, 8):
            acc = acc + B[2 * k] * diff(2 * k + 1)
        out[~small] = acc
    return out


def polynomial_coefficients(alpha: float, which: str, n, printed_factor: bool = False) -> np.ndarray:
    """Closed-form coefficients (n >= 1) of ``p0 = (pi-t)^2`` or ``p1 = 2pi^2 (pi-t)^2 - (pi-t)^4``.

    Valid for ``beta = -1/2``. The factor ``(2n + alpha + 1/2)`` equals ``2n + alpha + beta + 1``;
    ``printed_factor=True`` uses ``2n + alpha + 1`` instead (see notes in the README).
    """
    n = np.atleast_1d(np.asarray(n, dtype=float))
    if np.any(n < 1):
        raise SpectrumError("closed form needs n >= 1")
    a = alpha
    top = 2 * n + a + (1.0 if printed_factor else 0.5)
    logv = (math.log(2 * math.sqrt(math.pi)) + lgamma_ratio(n, 0.0, 0.5) - np.log(n)
            + np.log(top) - np.log(n + a + 0.5)
            + gammaln(a + 1.5) - gammaln(a + 1) + lgamma_ratio(n, a + 1, a + 1.5))
    b0 = np.exp(logv)
    if which == "p0":
        return b0
    if which == "p1":
        return b0 * 12.0 * _trigamma_difference(n, a + 1.5)
    raise SpectrumError(f"unknown polynomial {which!r}")


def polynomial_asymptotic_constant(alpha: float, which: str) -> float:
    """``n^2 b_n(p0) -> 4 sqrt(pi) G(a+3/2)/G(a+1)``, ``n^4 b_n(p1) -> 48 sqrt(pi) G(a+5/2)/G(a+1)``."""
    if which == "p0":
        return 4 * math.sqrt(math.pi) * math.exp(gammaln(alpha + 1.5) - gammaln(alpha + 1))
    if which == "p1":
        return 48 * math.sqrt(math.pi) * math.exp(gammaln(alpha + 2.5) - gammaln(alpha + 1))
    raise SpectrumError(f"unknown polynomial {which!r}")


def polynomial_function(which: str):
    if which == "p0":
        return lambda t: (math.pi - t) ** 2
    if which == "p1":
        return lambda t: 2 * math.pi ** 2 * (math.pi - t) ** 2 - (math.pi - t) ** 4
    raise SpectrumError(f"unknown polynomial {which!r}")


def polynomial_covariance_spectrum(space, which: str, L: int, printed_factor: bool = False) -> AngularPowerSpectrum:
    """Spectrum of ``p0`` or ``p1`` on a ``beta = -1/2`` space; ``b_0`` by quadrature."""
    p = _params(space)
    if p.beta != -0.5:
        raise SpectrumError(f"polynomial covariances need beta = -1/2, got beta = {p.beta}")
    if L < 1:
        raise SpectrumError("need L >= 1")
    g = polynomial_function(which)
    b0 = analyze_coefficients(g, p, 0, policy="adaptive", tol=1e-13).values[0]

    def gen(n):
        return polynomial_coefficients(p.alpha, which, n, printed_factor)

    vals = np.concatenate([[b0], gen(np.arange(1, L + 1, dtype=float))])
    mass = math.pi ** 2 if which == "p0" else math.pi ** 4
    return AngularPowerSpectrum(vals, mass, not printed_factor,
                                {"model": f"poly_{which}", "L": L, "alpha": p.alpha, "beta": p.beta}, None, gen)


# -- generic tools -------------------------------------------------------------------

def decay_bounds_fit(spectrum: AngularPowerSpectrum, nu: float, l0: int) -> DecayBounds:
    """Empirical ``gamma1 = min``, ``gamma2 = max`` of ``b_l (1+l)^(1+nu)`` over ``l0 <= l <= L``."""
    if spectrum.L <= l0:
        raise SpectrumError(f"spectrum length {spectrum.L + 1} does not exceed l0 = {l0}")
    l = np.arange(l0, spectrum.L + 1)
    scaled = spectrum.values[l0:] * (1.0 + l) ** (1 + nu)
    if np.any(scaled <= 0):
        bad = int(l[np.argmax(scaled <= 0)])
        raise SpectrumError(f"spectrum not bounded below: b_{bad} = 0")
    certified = bool(spectrum.decay and spectrum.decay.certified and spectrum.decay.nu == nu)
    return DecayBounds(nu, float(scaled.min()), float(scaled.max()), l0, certified)


@dataclass(frozen=True)
class TruncationCertificate:
    L: int
    tail: float
    method: str  # "majorant" | "exact_mass"


def truncation_index(spectrum: AngularPowerSpectrum, tol: float, max_L: int = 50_000_000) -> TruncationCertificate:
    """Smallest ``L`` with a provable ``sum_{l>L} b_l <= tol``."""
    if not tol > 0:
        raise SpectrumError("tol must be positive")
    if tol >= spectrum.total_mass and (spectrum.mass_exact or spectrum.decay):
        return TruncationCertificate(0, spectrum.total_mass, "exact_mass" if spectrum.mass_exact else "majorant")
    dec = spectrum.decay
    if dec is not None and dec.certified:
        L = max(int(math.ceil((dec.gamma2 / (dec.nu * tol)) ** (1.0 / dec.nu))) - 1, dec.l0 - 1, 0)
        while L > 0 and dec.tail_majorant(L - 1) <= tol:
            L -= 1
        while dec.tail_majorant(L) > tol:
            L += 1
        return TruncationCertificate(L, dec.tail_majorant(L), "majorant")
    if spectrum.mass_exact and (spectrum.generator is not None or spectrum.L >= 0):
        top = spectrum.L if spectrum.generator is None else max_L
        # doubling then bisection on the monotone tail
        hi = min(64, top)
        vals = spectrum.coefficients(hi)
        while spectrum.tail_bound(hi, math.fsum(vals)) > tol:
            if hi >= top:
                raise UnsupportedTailError(f"tail above {tol:g} even at L = {top}")
            hi = min(2 * hi, top)
            vals = spectrum.coefficients(hi)
        lo = 0
        while lo < hi:
            mid = (lo + hi) // 2
            if spectrum.tail_bound(mid, math.fsum(vals[: mid + 1])) <= tol:
                hi = mid
            else:
                lo = mid + 1
        return TruncationCertificate(hi, spectrum.tail_bound(hi, math.fsum(vals[: hi + 1])), "exact_mass")
    raise UnsupportedTailError("spectrum carries neither a certified decay bound nor an exact total mass")


# -- descriptors ------------------------------------------------------------------------

def read_spectrum_csv(path) -> AngularPowerSpectrum:
    vals = read_coefficients_csv(path)
    return AngularPowerSpectrum(vals, math.fsum(vals), False, {"model": "file", "path": str(path)})


def spectrum_from_descriptor(desc, space=None) -> AngularPowerSpectrum:
    """Build a spectrum from ``{"model": ..., "nu": ..., "L": ...}`` (dict or JSON string)."""
    if isinstance(desc, str):
        desc = json.loads(desc) if desc.strip().startswith("{") else {"model": desc}
    model = desc.get("model")
    if model not in MODELS:
        raise SpectrumError(f"unknown spectrum model {model!r}; expected one of {MODELS}")
    L = int(desc.get("L", 1024))
    if model == "powerlaw":
        spec = powerlaw_spectrum(float(desc.get("nu", 1.0)), L)
    elif model == "sine_power":
        if space is None:
            raise SpectrumError("sine_power needs a space")
        spec = sine_power_spectrum(space, float(desc.get("nu", 1.0)), L)
    elif model in ("poly_p0", "poly_p1"):
        if space is None:
            raise SpectrumError(f"{model} needs a space")
        spec = polynomial_covariance_spectrum(space, model[-2:], L)
    else:
        if "path" not in desc:
            raise SpectrumError("file spectrum needs a path")
        spec = read_spectrum_csv(desc["path"])
    if desc.get("normalize"):
        spec = spec.normalized()
    return spec
