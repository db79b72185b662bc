# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops of the recursive kernel filters.

``Q`` is a C-contiguous square buffer whose active block is ``Q[:n, :n]``.
Only the upper triangle (i <= j) is read or written; a C-order upper
triangle is a Fortran-order lower triangle, hence ``uplo='L'`` for BLAS.
"""

from libc.math cimport exp, log, pow, fabs
cimport scipy.linalg.cython_blas as blas


def kernel_row(double[:, ::1] X, Py_ssize_t n, double[::1] u,
               double inv_two_sigma2, double norm, double[::1] out):
    """out[i] = norm * exp(-||X[i] - u||^2 * inv_two_sigma2) for i < n."""
    cdef Py_ssize_t i, k, dim = X.shape[1]
    cdef double acc, diff
    for i in range(n):
        acc = 0.0
        for k in range(dim):
            diff = X[i, k] - u[k]
            acc += diff * diff
        out[i] = norm * exp(-acc * inv_two_sigma2)


def symv_upper(double[:, ::1] Q, Py_ssize_t n, double[::1] h, double[::1] z):
    """z[:n] = Q[:n, :n] @ h[:n] from the upper triangle."""
    cdef int N = <int>n, lda = <int>Q.shape[1], inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef char uplo = b'L'
    if n == 0:
        return
    blas.dsymv(&uplo, &N, &one, &Q[0, 0], &lda, &h[0], &inc, &zero, &z[0], &inc)


def dot(double[::1] a, double[::1] b, Py_ssize_t n):
    cdef int N = <int>n, inc = 1
    if n == 0:
        return 0.0
    return blas.ddot(&N, &a[0], &inc, &b[0], &inc)


def grow_inverse(double[:, ::1] Q, Py_ssize_t n, double[::1] z, double r):
    """Block-inverse growth of Q from n to n + 1.

    Q[:n, :n] += z z^T / r ; Q[:n, n] = -z / r ; Q[n, n] = 1 / r
    """
    cdef int N = <int>n, lda = <int>Q.shape[1], inc = 1
    cdef double c = 1.0 / r
    cdef char uplo = b'L'
    cdef Py_ssize_t i
    if n > 0:
        blas.dsyr(&uplo, &N, &c, &z[0], &inc, &Q[0, 0], &lda)
    for i in range(n):
        Q[i, n] = -z[i] * c
    Q[n, n] = c


def update_coefficients(double[::1] A, Py_ssize_t n, double[::1] z, double r, double innovation):
    """A[:n] -= z * innovation / r ; A[n] = innovation / r."""
    cdef Py_ssize_t i
    cdef double g = innovation / r
    for i in range(n):
        A[i] -= z[i] * g
    A[n] = g


def theta_sum(double e, double[::1] codewords, double[::1] counts, Py_ssize_t H,
              bint gmee, double alpha, double scale_pow, double norm,
              double mee_sigma, double lam, long time_index, bint literal,
              double eps_sing):
    """Return (theta, sum_h kappa_h c_h, singular) for one error sample."""
    cdef Py_ssize_t h
    cdef double theta = 0.0, wc = 0.0, diff, dist, kap, lp, a2 = alpha - 2.0
    cdef double inv2s2 = 1.0 / (2.0 * mee_sigma * mee_sigma)
    cdef bint singular = False
    cdef bint use_lam = lam != 1.0
    for h in range(H):
        diff = e - codewords[h]
        if gmee:
            dist = fabs(diff)
            if alpha == 2.0:
                kap = counts[h] * norm * exp(-(dist * dist) / scale_pow)
            else:
                if dist == 0.0:
                    kap = counts[h] * norm
                else:
                    kap = counts[h] * norm * exp(-exp(alpha * log(dist)) / scale_pow)
                if alpha < 2.0 and dist < eps_sing:
                    singular = True
                    dist = eps_sing
                if dist == 0.0:
                    kap = 0.0 if alpha > 2.0 else kap
                else:
                    kap = kap * exp(a2 * log(dist))
        else:
            kap = counts[h] * norm * exp(-(diff * diff) * inv2s2)
        if use_lam:
            if literal:
                lp = pow(lam, <double>(time_index + h + 1))
            else:
                lp = pow(lam, <double>time_index)
            kap = kap * lp
        theta += kap
        wc += kap * codewords[h]
    return theta, wc, singular
