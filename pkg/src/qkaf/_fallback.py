"""Numpy implementations of the compiled kernels in ``_kernels.pyx``.

Same signatures.  The compiled kernels only maintain the upper triangle of
``Q``; this module keeps the full symmetric block, so a state must stay on
the backend that built it.
"""

import math

import numpy as np


def kernel_row(X, n, u, inv_two_sigma2, norm, out):
    diff = X[:n] - u
    out[:n] = norm * np.exp(-np.einsum("ij,ij->i", diff, diff) * inv_two_sigma2)


def symv_upper(Q, n, h, z):
    if n == 0:
        return
    # full block is maintained here, so a plain product is exact
    z[:n] = Q[:n, :n] @ h[:n]


def dot(a, b, n):
    return float(np.dot(a[:n], b[:n]))


def grow_inverse(Q, n, z, r):
    c = 1.0 / r
    zn = z[:n]
    if n > 0:
        Q[:n, :n] += c * np.outer(zn, zn)
        Q[:n, n] = -zn * c
        Q[n, :n] = -zn * c
    Q[n, n] = c


def update_coefficients(A, n, z, r, innovation):
    g = innovation / r
    A[:n] -= z[:n] * g
    A[n] = g


def theta_sum(e, codewords, counts, H, gmee, alpha, scale_pow, norm,
              mee_sigma, lam, time_index, literal, eps_sing):
    c = np.asarray(codewords[:H], dtype=float)
    cnt = np.asarray(counts[:H], dtype=float)
    diff = e - c
    singular = False
    if gmee:
        dist = np.abs(diff)
        kap = cnt * norm * np.exp(-np.power(dist, alpha) / scale_pow)
        if alpha != 2.0:
            if alpha < 2.0:
                close = dist < eps_sing
                singular = bool(np.any(close))
                dist = np.where(close, eps_sing, dist)
            with np.errstate(divide="ignore"):
                kap = kap * np.power(dist, alpha - 2.0)
    else:
        kap = cnt * norm * np.exp(-(diff * diff) / (2.0 * mee_sigma * mee_sigma))
    if lam != 1.0:
        if literal:
            kap = kap * lam ** (time_index + np.arange(1, H + 1, dtype=float))
        else:
            kap = kap * math.pow(lam, time_index)
    return float(np.sum(kap)), float(np.dot(kap, c)), singular
