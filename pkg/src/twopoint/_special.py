"""Log-Gamma ratios that stay accurate for large arguments.

``gammaln(x + a) - gammaln(x + b)`` loses roughly ``log10(x log x)`` digits
once ``x`` is large, which matters for coefficient sequences evaluated out to
``l ~ 1e7``.  Above a cutoff we switch to the Bernoulli-polynomial expansion

    log G(z + a) - log G(z + b) ~ (a - b) log z
        + sum_{k>=2} (-1)^k (B_k(a) - B_k(b)) / (k (k - 1) z^(k - 1))
"""

from math import comb

import numpy as np
from scipy.special import bernoulli, gammaln

_NTERMS = 14
_BERN = bernoulli(_NTERMS + 1)


def _bernoulli_poly(k, a):
    return sum(comb(k, j) * _BERN[j] * a ** (k - j) for j in range(k + 1))


def lgamma_ratio(x, a, b):
    """Return ``log(Gamma(x + a) / Gamma(x + b))`` elementwise.

    Requires ``x + a > 0`` and ``x + b > 0``.
    """
    x = np.asarray(x, dtype=float)
    a = float(a)
    b = float(b)
    if a == b:
        return np.zeros_like(x)
    cut = max(400.0, 25.0 * max(abs(a), abs(b)))
    out = np.empty_like(x)
    small = x < cut
    if np.any(small):
        xs = x[small]
        out[small] = gammaln(xs + a) - gammaln(xs + b)
    if np.any(~small):
        z = x[~small]
        acc = (a - b) * np.log(z)
        inv = 1.0 / z
        zp = np.ones_like(z)
        for k in range(2, _NTERMS + 1):
            zp = zp * inv
            coef = (-1) ** k * (_bernoulli_poly(k, a) - _bernoulli_poly(k, b)) / (k * (k - 1))
            acc = acc + coef * zp
        out[~small] = acc
    return out if out.ndim else float(out)


def log_jacobi_at_one(n, alpha):
    """``log P_n^{(alpha, beta)}(1) = log Gamma(n+alpha+1) - log n! - log Gamma(alpha+1)``."""
    return lgamma_ratio(n, alpha + 1.0, 1.0) - gammaln(alpha + 1.0)


def log_analysis_prefactor(n, alpha, beta):
    """Log of ``(2n+s) Gamma(n+s) / (Gamma(n+beta+1) Gamma(alpha+1))`` with ``s = alpha+beta+1``.

    The ``n + s = 0`` case (circle, ``n = 0``) is the limit value ``1 / (Gamma(beta+1) Gamma(alpha+1))``.
    Written as ``(2n+s)/(n+s) * Gamma(n+s+1)`` so the pole of ``Gamma(n+s)`` never appears.
    """
    n = np.asarray(n, dtype=float)
    s = alpha + beta + 1.0
    ns = n + s
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(ns == 0, 1.0, (2 * n + s) / np.where(ns == 0, 1.0, ns))
    out = np.log(frac) + lgamma_ratio(n, s + 1.0, beta + 1.0) - gammaln(alpha + 1.0)
    return out if np.ndim(out) else float(out)
