"""Compiled inner loops for normalized Jacobi recurrences.

All kernels use the recurrence for ``p_n = P_n / P_n(1)`` directly, which never
overflows even for ``alpha = 7`` and ``n ~ 1e7``.
"""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def _step_coeffs(n, alpha, beta):
    # p_n = (u x + v) p_{n-1} - w p_{n-2}, n >= 2
    s = 2.0 * n + alpha + beta
    a_n = 2.0 * n * (n + alpha + beta) * (s - 2.0)
    r1 = n / (n + alpha)
    r2 = n * (n - 1.0) / ((n + alpha) * (n + alpha - 1.0))
    u = (s - 1.0) * s * (s - 2.0) * r1 / a_n
    v = (s - 1.0) * (alpha * alpha - beta * beta) * r1 / a_n
    w = 2.0 * (n + alpha - 1.0) * (n + beta - 1.0) * s * r2 / a_n
    return u, v, w


@numba.njit(cache=True, nogil=True)
def _p1(x, alpha, beta):
    # P_1(x) / P_1(1) with P_1(1) = alpha + 1
    return ((alpha + 1.0) + (alpha + beta + 2.0) * (x - 1.0) / 2.0) / (alpha + 1.0)


@numba.njit(cache=True, nogil=True)
def series_sum(coeffs, alpha, beta, x):
    """sum_l coeffs[l] * p_l(x) for every entry of the 1-D array ``x``."""
    nterms = coeffs.shape[0]
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        xi = x[i]
        acc = coeffs[0]
        if nterms > 1:
            pm2 = 1.0
            pm1 = _p1(xi, alpha, beta)
            acc += coeffs[1] * pm1
            for n in range(2, nterms):
                u, v, w = _step_coeffs(float(n), alpha, beta)
                p = (u * xi + v) * pm1 - w * pm2
                acc += coeffs[n] * p
                pm2 = pm1
                pm1 = p
        out[i] = acc
    return out


@numba.njit(cache=True, nogil=True)
def table(nmax, alpha, beta, x):
    """Matrix ``T[n, i] = p_n(x[i])`` for n = 0..nmax."""
    out = np.empty((nmax + 1, x.shape[0]))
    for i in range(x.shape[0]):
        out[0, i] = 1.0
    if nmax >= 1:
        for i in range(x.shape[0]):
            out[1, i] = _p1(x[i], alpha, beta)
    for n in range(2, nmax + 1):
        u, v, w = _step_coeffs(float(n), alpha, beta)
        for i in range(x.shape[0]):
            out[n, i] = (u * x[i] + v) * out[n - 1, i] - w * out[n - 2, i]
    return out
