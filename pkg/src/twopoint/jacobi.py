"""Jacobi polynomials, Gauss-Jacobi rules and Jacobi coefficient analysis.

Expansions here are always in the normalized polynomials
``p_n(x) = P_n^{(alpha, beta)}(x) / P_n^{(alpha, beta)}(1)``, so a zonal function is
``g(theta) = sum_n b_n p_n(cos theta)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal
from scipy.special import betaln, gammaln

from . import _kernels
from ._special import lgamma_ratio, log_analysis_prefactor, log_jacobi_at_one


class QuadratureError(RuntimeError):
    """Quadrature did not converge or the eigen-solver failed."""


@dataclass(frozen=True)
class JacobiParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > -1 and self.beta > -1):
            raise ValueError(f"Jacobi parameters need alpha, beta > -1, got ({self.alpha}, {self.beta})")

    @property
    def s(self) -> float:
        return self.alpha + self.beta + 1.0

    def raised(self) -> "JacobiParams":
        return JacobiParams(self.alpha + 1.0, self.beta)


def _params(p) -> JacobiParams:
    if isinstance(p, JacobiParams):
        return p
    if hasattr(p, "jacobi"):
        return p.jacobi
    alpha, beta = p
    return JacobiParams(float(alpha), float(beta))


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss rule for the weight ``(1-t)^alpha (1+t)^beta`` on (-1, 1)."""

    nodes: np.ndarray
    weights: np.ndarray
    params: JacobiParams
    order: int

    @property
    def total_mass(self) -> float:
        a, b = self.params.alpha, self.params.beta
        return math.exp((a + b + 1) * math.log(2.0) + betaln(a + 1, b + 1))

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


@dataclass(frozen=True)
class CoefficientSequence:
    params: JacobiParams
    values: np.ndarray
    source: str  # "quadrature" | "closed_form" | "recurrence"
    error_estimate: float | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("coefficient sequence has non-finite entries")

    def __len__(self):
        return len(self.values)

    def __getitem__(self, n):
        return self.values[n]

    def to_csv(self, path) -> None:
        write_coefficients_csv(path, self.values, header=("n", "b_n"))


def write_coefficients_csv(path, values, header=("n", "b_n")) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for n, v in enumerate(values):
            w.writerow([n, f"{float(v):.17g}"])


def read_coefficients_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:] if rows and not _is_number(rows[0][0]) else rows
    idx = [int(r[0]) for r in body]
    if idx != list(range(len(idx))):
        raise ValueError(f"{path}: indices must be 0..N in order")
    return np.array([float(r[1]) for r in body])


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


# -- evaluation -------------------------------------------------------------

def jacobi_at_one(params, n: int) -> float:
    """P_n^{(alpha,beta)}(1) = binom(n + alpha, n)."""
    p = _params(params)
    if n == 0:
        return 1.0
    return float(np.exp(log_jacobi_at_one(np.array([float(n)]), p.alpha)[0]))


def jacobi_table(params, nmax: int, x) -> np.ndarray:
    """Normalized values ``p_n(x)`` for n = 0..nmax, shape ``(nmax + 1, len(x))``."""
    p = _params(params)
    x = np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=float)))
    return _kernels.table(int(nmax), p.alpha, p.beta, x)


def jacobi_series(coeffs, params, x) -> np.ndarray:
    """Evaluate ``sum_n coeffs[n] p_n(x)`` with the normalized recurrence."""
    p = _params(params)
    x = np.asarray(x, dtype=float)
    flat = np.ascontiguousarray(x.reshape(-1))
    c = np.ascontiguousarray(np.asarray(coeffs, dtype=float))
    return _kernels.series_sum(c, p.alpha, p.beta, flat).reshape(x.shape)


def jacobi_eval(params, n: int, x, normalized: bool = False):
    """P_n^{(alpha,beta)}(x) by three-term recurrence; divided by P_n(1) if ``normalized``."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    vals = jacobi_series(coeffs, params, x)
    if not normalized:
        vals = vals * jacobi_at_one(params, n)
    return vals if np.ndim(vals) else float(vals)


def legendre_eval(K: int, x):
    """Legendre polynomial P_K(x) via (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}."""
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if K == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = x.copy()
    for k in range(1, K):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    return p if p.ndim else float(p)


# Erdelyi-Magnus-Nevai: for alpha, beta >= -1/2 and orthonormal P_n,
#   max_x (1-x)^(alpha+1/2) (1+x)^(beta+1/2) P_n(x)^2 <= 2e (2 + sqrt(alpha^2 + beta^2)) / pi.
def envelope_scale(params, n) -> np.ndarray:
    """Per-degree factor ``e_n`` with ``|p_n(cos t)| <= e_n / sqrt(w(t))``.

    Here ``w(t) = (1 - cos t)^(alpha+1/2) (1 + cos t)^(beta+1/2)``. Valid for
    ``alpha, beta >= -1/2``; ``e_0`` is set to 0 since ``p_0 = 1`` is handled exactly.
    """
    p = _params(params)
    a, b, s = p.alpha, p.beta, p.s
    if a < -0.5 or b < -0.5:
        raise ValueError("envelope needs alpha, beta >= -1/2")
    n = np.atleast_1d(np.asarray(n, dtype=float))
    out = np.zeros_like(n)
    pos = n >= 1
    m = n[pos]
    const = 2 * math.e * (2 + math.hypot(a, b)) / math.pi
    # h_n / P_n(1)^2 for the orthonormalizing constant h_n
    log_ratio = (s * math.log(2.0) + 2 * gammaln(a + 1) - np.log(2 * m + s)
                 + lgamma_ratio(m, 1.0, a + 1.0) + lgamma_ratio(m, b + 1.0, s))
    out[pos] = np.sqrt(const * np.exp(log_ratio))
    return out


def envelope_weight(params, theta) -> np.ndarray:
    p = _params(params)
    x = np.cos(np.asarray(theta, dtype=float))
    return (1 - x) ** (p.alpha + 0.5) * (1 + x) ** (p.beta + 0.5)


def jacobi_envelope(params, n, theta) -> np.ndarray:
    """Rigorous bound on ``|p_n(cos theta)|``, clipped at 1."""
    e = envelope_scale(params, n)
    w = envelope_weight(params, theta)
    with np.errstate(divide="ignore"):
        bound = np.where(w > 0, e / np.sqrt(np.where(w > 0, w, 1.0)), np.inf)
    bound = np.where(np.asarray(n) == 0, 1.0, bound)
    return np.minimum(bound, 1.0)


# -- quadrature ---------------------------------------------------------------

def _recurrence_coeffs(p: JacobiParams, order: int):
    a, b = p.alpha, p.beta
    k = np.arange(order, dtype=float)
    diag = np.empty(order)
    diag[0] = (b - a) / (a + b + 2)
    if order > 1:
        kk = k[1:]
        t = 2 * kk + a + b
        diag[1:] = (b * b - a * a) / (t * (t + 2))
    off = np.empty(max(order - 1, 0))
    if order > 1:
        off[0] = 4 * (1 + a) * (1 + b) / ((2 + a + b) ** 2 * (3 + a + b))
        if order > 2:
            kk = k[2:]
            t = 2 * kk + a + b
            off[1:] = 4 * kk * (kk + a) * (kk + b) * (kk + a + b) / (t * t * (t + 1) * (t - 1))
    return diag, np.sqrt(off)


def gauss_jacobi_rule(params, order: int) -> QuadratureRule:
    """Golub-Welsch nodes and weights for ``(1-t)^alpha (1+t)^beta``."""
    p = _params(params)
    if order < 1:
        raise ValueError("order must be >= 1")
    diag, off = _recurrence_coeffs(p, order)
    try:
        nodes, vecs = eigh_tridiagonal(diag, off)
    except LinAlgError as exc:
        raise QuadratureError(f"tridiagonal eigen-solve failed for {p}, order {order}") from exc
    mu0 = math.exp((p.s) * math.log(2.0) + betaln(p.alpha + 1, p.beta + 1))
    weights = mu0 * vecs[0, :] ** 2
    return QuadratureRule(nodes=nodes, weights=weights, params=p, order=order)


def gauss_legendre(m: int):
    return np.polynomial.legendre.leggauss(m)


def analysis_scale(params, n_max: int) -> np.ndarray:
    """Prefactor turning ``int g p_n w dtheta`` into ``b_n``: analysis constant times P_n(1)."""
    p = _params(params)
    n = np.arange(n_max + 1, dtype=float)
    lg = log_analysis_prefactor(n, p.alpha, p.beta) + np.where(
        n > 0, log_jacobi_at_one(np.maximum(n, 1.0), p.alpha), 0.0)
    return np.exp(lg)


def _theta_weight(p: JacobiParams, theta):
    return np.sin(theta / 2) ** (2 * p.alpha + 1) * np.cos(theta / 2) ** (2 * p.beta + 1)


def analyze_coefficients(g: Callable, params, n_max: int, policy: str = "gauss_jacobi",
                         splits: Sequence[float] = (), tol: float = 1e-10,
                         order: int | None = None, panel_nodes: int = 24,
                         max_rounds: int = 60, max_panels: int = 4096, rtol: float = 0.0) -> CoefficientSequence:
    """Jacobi coefficients ``b_0..b_{n_max}`` of a zonal function ``g`` on [0, pi].

    ``policy="gauss_jacobi"`` maps to ``t = cos(theta)`` and uses one Gauss-Jacobi
    rule of order ``>= n_max + 32`` (smooth ``g``). ``policy="adaptive"`` uses
    composite Gauss-Legendre panels in ``theta`` with bisection, forced breakpoints
    at ``splits``, and a tolerance ``max(tol, rtol * |b_n|)`` on every coefficient.
    """
    p = _params(params)
    scale = analysis_scale(p, n_max)
    if policy == "gauss_jacobi":
        order = max(order or 0, n_max + 32)
        rule = gauss_jacobi_rule(p, order)
        theta = np.arccos(np.clip(rule.nodes, -1.0, 1.0))
        gv = np.asarray(g(theta), dtype=float) * rule.weights
        tab = jacobi_table(p, n_max, rule.nodes)
        vals = scale * (tab @ gv) * 2.0 ** (-p.s)
        return CoefficientSequence(p, vals, "quadrature")
    if policy != "adaptive":
        raise ValueError(f"unknown quadrature policy {policy!r}")
    vals, err = _adaptive(g, p, n_max, scale, splits, tol, rtol, panel_nodes, max_rounds, max_panels)
    return CoefficientSequence(p, vals, "quadrature", error_estimate=err)


def _adaptive(g, p, n_max, scale, splits, tol, rtol, m, max_rounds, max_panels):
    x, w = gauss_legendre(m)
    edges = sorted({0.0, math.pi, *[float(s) for s in splits if 0 < s < math.pi]})
    total = math.pi

    def panels(lo, hi):
        # batched so the (n_max + 1) x panels x m table stays small
        per = max(1, 4_000_000 // ((n_max + 1) * m))
        qs, mags = [], []
        for i in range(0, len(lo), per):
            l, h = lo[i:i + per], hi[i:i + per]
            half = (h - l) / 2
            mid = (h + l) / 2
            flat = (mid[:, None] + half[:, None] * x[None, :]).reshape(-1)
            f = np.asarray(g(flat), dtype=float) * _theta_weight(p, flat)
            tab = (jacobi_table(p, n_max, np.cos(flat)) * f[None, :]).reshape(n_max + 1, len(l), m)
            qs.append((tab @ w) * half[None, :] * scale[:, None])
            mags.append((np.abs(tab) @ w) * half[None, :] * scale[:, None])
        return np.concatenate(qs, axis=1), np.concatenate(mags, axis=1)

    lo = np.array(edges[:-1])
    hi = np.array(edges[1:])
    whole, _ = panels(lo, hi)
    acc = np.zeros(n_max + 1)
    acc_err = np.zeros(n_max + 1)
    open_err = np.full(n_max + 1, np.inf)
    for _ in range(max_rounds):
        mid = (lo + hi) / 2
        left, lmag = panels(lo, mid)
        right, rmag = panels(mid, hi)
        refined = left + right
        err = np.abs(whole - refined)  # (n_max + 1, panels)
        # per-coefficient target: absolute tol, or rtol times the current estimate
        target = np.maximum(tol, rtol * np.abs(acc + refined.sum(axis=1)))
        budget = target[:, None] * ((hi - lo) / total)[None, :]
        # roundoff floor: cancellation in an oscillatory panel cannot beat ~eps * sum|f|
        floor = 64 * np.finfo(float).eps * np.max(lmag + rmag, axis=0)
        ok = np.all(err <= budget, axis=0) | (np.max(err, axis=0) <= floor) | (hi - lo < 1e-14)
        acc += refined[:, ok].sum(axis=1)
        acc_err += err[:, ok].sum(axis=1)
        if ok.all():
            return acc, float(np.max(acc_err))
        keep = ~ok
        open_err = err[:, keep].sum(axis=1)
        if np.all(acc_err + open_err <= target):
            # the remaining panels are individually over budget but jointly fine
            return acc + refined[:, keep].sum(axis=1), float(np.max(acc_err + open_err))
        if 2 * keep.sum() > max_panels:
            break
        lo, mid, hi = lo[keep], mid[keep], hi[keep]
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        whole = np.concatenate([left[:, keep], right[:, keep]], axis=1)
    raise QuadratureError(
        f"adaptive quadrature for {p} did not reach tol={tol:g}, rtol={rtol:g}; "
        f"{len(lo)} panels open, achieved estimate {float(np.max(acc_err + open_err)):.3g}")


def alpha_raising_check(bs_ab: CoefficientSequence, bs_a1b: CoefficientSequence, n: int) -> float:
    """Residual of the alpha-raising relation linking b^{(a,b)}_{n+1}, b^{(a,b)}_n and b^{(a+1,b)}_n."""
    a, b = bs_ab.params.alpha, bs_ab.params.beta
    if not (math.isclose(bs_a1b.params.alpha, a + 1) and math.isclose(bs_a1b.params.beta, b)):
        raise ValueError("second sequence must be at (alpha + 1, beta)")
    lhs = (n + 1) * (n + b + 1) / (2 * n + a + b + 3) * bs_ab.values[n + 1]
    s = a + b + 1
    ratio = 1.0 if n + s == 0 else (n + s) / (2 * n + s)
    rhs = ratio * (n + a + 1) * bs_ab.values[n] - (a + 1) * bs_a1b.values[n]
    return abs(lhs - rhs)
