"""Conditional variances, the local nondeterminism experiment, and compactly supported bumps.

The conditional variance of ``Z(x)`` given ``Z(x_1), ..., Z(x_n)`` is the Schur
complement ``C(0) - c^T S^+ c``. With ``S = L L^T`` it equals ``C(0) - |L^-1 c|^2``,
and the partial sums of ``|L^-1 c|^2`` give the variances for every prefix of the
conditioning set at no extra cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky, eigh, solve_triangular

from .covariance import ZonalCovariance, _eval_on_distances, gram_matrix
from .jacobi import JacobiParams, _params, analyze_coefficients, jacobi_table, legendre_eval
from .rng import chunk_ranges, ordered_map, task_stream
from .spaces import PointConfiguration, distance_matrix, random_configuration, random_point

JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
PINV_CUTOFF = 1e-12


class FactorizationError(ArithmeticError):
    pass


class SlndViolation(ArithmeticError):
    def __init__(self, msg, worst):
        super().__init__(msg)
        self.worst = worst


@dataclass(frozen=True)
class Factor:
    """Lower Cholesky factor of ``S + jitter * scale * I``."""

    L: np.ndarray
    jitter: float
    method: str  # "cholesky" | "cholesky+jitter"


def robust_cholesky(S: np.ndarray, scale: float) -> Factor:
    """Cholesky with the jitter ladder ``1e-10 .. 1e-6`` (relative to ``scale``)."""
    n = S.shape[0]
    try:
        return Factor(cholesky(S, lower=True, check_finite=False), 0.0, "cholesky")
    except LinAlgError:
        pass
    for j in JITTERS:
        try:
            L = cholesky(S + j * scale * np.eye(n), lower=True, check_finite=False)
            return Factor(L, j, "cholesky+jitter")
        except LinAlgError:
            continue
    raise FactorizationError(f"matrix not positive definite even with jitter {JITTERS[-1]:g} x {scale:g}")


@dataclass(frozen=True)
class ConditioningProblem:
    model: ZonalCovariance
    target: np.ndarray  # coordinates of x
    conditioners: np.ndarray  # (n, coord_dim)

    @property
    def distances(self) -> np.ndarray:
        return distance_matrix(self.model.space, self.conditioners, self.target[None, :])[:, 0]

    @property
    def epsilon(self) -> float:
        return float(self.distances.min())


@dataclass(frozen=True)
class ConditionalVariance:
    value: float
    method: str  # "cholesky" | "cholesky+jitter" | "pinv"
    jitter: float
    prefix: np.ndarray  # variance given the first k conditioners, k = 1..n
    weights: np.ndarray | None = field(default=None, repr=False)


def conditional_variance(problem: ConditioningProblem) -> ConditionalVariance:
    """``C(0) - c^T S^+ c`` clamped to ``[0, C(0)]``, with the factorization path recorded."""
    model = problem.model
    c0 = model.partial_mass
    S = gram_matrix(model, PointConfiguration(model.space, problem.conditioners))
    c = _eval_on_distances(model, problem.distances)
    try:
        F = robust_cholesky(S, c0)
        z = solve_triangular(F.L, c, lower=True, check_finite=False)
        prefix = np.clip(c0 - np.cumsum(z * z), 0.0, c0)
        a = solve_triangular(F.L.T, z, lower=False, check_finite=False)
        return ConditionalVariance(float(prefix[-1]), F.method, F.jitter, prefix, a)
    except FactorizationError:
        pass
    # spectral pseudo-inverse; prefixes by repeated solves
    prefix = np.empty(len(c))
    a = None
    for k in range(1, len(c) + 1):
        w, V = eigh(S[:k, :k])
        keep = w > PINV_CUTOFF * c0
        proj = V[:, keep].T @ c[:k]
        prefix[k - 1] = c0 - float(np.sum(proj ** 2 / w[keep]))
        if k == len(c):
            a = V[:, keep] @ (proj / w[keep])
    prefix = np.minimum.accumulate(np.clip(prefix, 0.0, c0))
    return ConditionalVariance(float(prefix[-1]), "pinv", 0.0, prefix, a)


def variance_decomposition(problem: ConditioningProblem, a: np.ndarray):
    """Split ``Var(Z(x) - sum a_k Z(x_k))`` into spectral pieces.

    Returns ``(first, cross)`` where ``first = sum_l b_l (1 - sum_k a_k p_l(cos rho_k))^2`` and
    ``cross = sum_l b_l (a^T P_l a - (sum_k a_k p_l(cos rho_k))^2) >= 0``; their sum is the
    prediction error variance, which equals the conditional variance at the optimal ``a``.
    """
    model = problem.model
    b = model.coeffs
    rho0 = problem.distances
    T0 = jacobi_table(model.params, model.L, np.cos(rho0))  # (L+1, n)
    s = T0 @ a  # sum_k a_k p_l(cos rho_k), per l
    first = float(np.sum(b * (1 - s) ** 2))
    D = distance_matrix(model.space, problem.conditioners)
    n = len(a)
    iu = np.triu_indices(n, 1)
    Tp = jacobi_table(model.params, model.L, np.cos(D[iu]))  # (L+1, pairs)
    quad = np.sum(a * a) + 2 * Tp @ (a[iu[0]] * a[iu[1]])
    cross = float(np.sum(b * (quad - s * s)))
    return first, cross


# -- experiment --------------------------------------------------------------------

@dataclass(frozen=True)
class SlndTrial:
    index: int
    n: int
    epsilon: float
    variance: float
    ratio: float
    method: str
    monotone: bool
    support_ok: bool


@dataclass(frozen=True)
class SlndReport:
    gamma_hat: float
    nu: float
    trials: int
    seed: int
    worst_case: SlndTrial
    monotone_all: bool
    support_all: bool
    ratios: np.ndarray = field(repr=False)

    def to_json(self) -> dict:
        w = self.worst_case
        return {"gamma_hat": self.gamma_hat, "nu": self.nu, "trials": self.trials,
                "monotone_all": self.monotone_all, "support_all": self.support_all,
                "worst_case": {"seed": self.seed, "trial": w.index, "n": w.n, "epsilon": w.epsilon,
                               "ratio": w.ratio, "method": w.method}}


def _slnd_trial(model: ZonalCovariance, nu: float, n_max: int, seed: int, i: int) -> SlndTrial:
    rng = task_stream(seed, "trials", i)
    n = int(rng.integers(1, n_max + 1))
    cond = random_configuration(model.space, n, rng).coords
    target = random_point(model.space, rng).coords
    prob = ConditioningProblem(model, target, cond)
    eps = prob.epsilon
    while eps <= 0:  # coincident draw; redraw the target from the same stream
        target = random_point(model.space, rng).coords
        prob = ConditioningProblem(model, target, cond)
        eps = prob.epsilon
    cv = conditional_variance(prob)
    monotone = bool(np.all(np.diff(cv.prefix) <= 1e-9 * model.partial_mass))
    # the bump of radius eps vanishes at every conditioner, since all of them are at least eps away
    bump = bump_construct(model.params, r=2 + nu / 2, n0=1, eps=min(eps, math.pi))
    support_ok = bool(np.all(bump(prob.distances) == 0.0))
    return SlndTrial(i, n, eps, cv.value, cv.value / eps ** nu, cv.method, monotone, support_ok)


def slnd_experiment(model: ZonalCovariance, nu: float, trials: int, n_max: int, seed: int,
                    threads: int = 1, chunk: int = 16) -> SlndReport:
    """Minimum of ``Var(Z(x) | Z(x_1..x_n)) / eps^nu`` over random configurations."""
    if trials < 1:
        raise ValueError("need at least one trial")

    def run(rng_range):
        lo, hi = rng_range
        return [_slnd_trial(model, nu, n_max, seed, i) for i in range(lo, hi)]

    results = [t for part in ordered_map(run, chunk_ranges(trials, chunk), threads) for t in part]
    ratios = np.array([t.ratio for t in results])
    worst = results[int(np.argmin(ratios))]
    report = SlndReport(float(ratios.min()), nu, trials, seed, worst,
                        all(t.monotone for t in results), all(t.support_ok for t in results), ratios)
    if not worst.ratio > 0:
        raise SlndViolation(f"conditional variance ratio {worst.ratio:.3g} <= 0 at trial {worst.index} "
                            f"(seed {seed}, n = {worst.n}, eps = {worst.epsilon:.3g})", report)
    return report


# -- bump function -----------------------------------------------------------------------

def _half_integer(x: float) -> bool:
    return abs(2 * x - round(2 * x)) < 1e-12 and round(2 * x) % 2 == 1


def _integer(x: float) -> bool:
    return abs(x - round(x)) < 1e-12


@dataclass(frozen=True)
class BumpFunction:
    """``g(t) = [cos(t/2)] phi(sin(t/2) / sin(eps/2))``, supported on ``[0, eps]``.

    ``phi(x) = (1-x^2)_+^R P_2K(x) / P_2K(0)`` in odd dimension and
    ``(1-x^2)_+^R P_K(1 - 2x^2)`` in even dimension, with Legendre ``P``. The Jacobi
    coefficients vanish below ``n0``; the ``cos(t/2)`` factor is used when ``beta`` is a
    half-integer.
    """

    params: JacobiParams
    r: float
    n0: int
    eps: float
    R: int
    K: int
    odd_d: bool
    cos_factor: bool

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        base = np.clip(1 - x * x, 0.0, None) ** self.R
        if self.odd_d:
            return base * legendre_eval(2 * self.K, x) / legendre_eval(2 * self.K, 0.0)
        return base * legendre_eval(self.K, 1 - 2 * x * x)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        x = np.sin(theta / 2) / math.sin(self.eps / 2)
        out = np.where(theta < self.eps, self.phi(np.minimum(x, 1.0)), 0.0)
        if self.cos_factor:
            out = out * np.cos(theta / 2)
        return out if out.ndim else float(out)


def bump_construct(params, r: float, n0: int, eps: float) -> BumpFunction:
    p = _params(params)
    if not r > 1:
        raise ValueError("need r > 1")
    if n0 < 1:
        raise ValueError("need n0 >= 1")
    if not 0 < eps <= math.pi:
        raise ValueError("need eps in (0, pi]")
    a, b = p.alpha, p.beta
    if _half_integer(a):
        odd_d = True
    elif _integer(a):
        odd_d = False
    else:
        raise ValueError(f"alpha = {a} is not a (half-)integer; no bump construction")
    if _integer(b):
        cos_factor = False
    elif _half_integer(b):
        cos_factor = True
    else:
        raise ValueError(f"beta = {b} is not a (half-)integer; no bump construction")
    R = math.ceil(r + a - 0.5 - 1e-12)
    K = n0 + R + math.ceil(a - 1e-12) + math.ceil(b - 1e-12)
    return BumpFunction(p, float(r), int(n0), float(eps), int(R), int(K), odd_d, cos_factor)


@dataclass(frozen=True)
class BumpRecord:
    coeffs: np.ndarray
    max_low_coeff: float
    Mr_hat: float
    bound: np.ndarray  # Mr_hat * eps * (1 + n eps)^-r
    error_estimate: float


def bump_verify(bump: BumpFunction, n_max: int, tol: float = 1e-10, rtol: float = 1e-10) -> BumpRecord:
    """Coefficients of the bump by adaptive quadrature (split at ``eps``) and the decay constant."""
    if n_max < bump.n0:
        raise ValueError("n_max must be at least n0")
    seq = analyze_coefficients(bump, bump.params, n_max, policy="adaptive", splits=(bump.eps,),
                               tol=tol, rtol=rtol)
    b = seq.values
    n = np.arange(n_max + 1)
    low = float(np.max(np.abs(b[: bump.n0])))
    scaled = np.abs(b[bump.n0:]) * (1 + n[bump.n0:] * bump.eps) ** bump.r / bump.eps
    Mr = float(scaled.max())
    return BumpRecord(b, low, Mr, Mr * bump.eps * (1 + n * bump.eps) ** (-bump.r), seq.error_estimate)


BUMP_K_MAX = 96


def bump_n_max(eps: float, k_max: float = BUMP_K_MAX) -> int:
    """Degree range covering ``n eps <= k_max``; keeps the decay window fixed as ``eps`` shrinks."""
    return int(math.ceil(k_max / eps))
