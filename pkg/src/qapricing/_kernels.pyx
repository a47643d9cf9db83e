# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: scalar Kalman recursion and dense power iteration."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, fabs, NAN

cnp.import_array()

cdef double LOG_2PI = 1.8378770664093453


def kalman_filter(const double[::1] y, double a, double b, double c, double rho,
                  double p0, double[::1] filtered):
    cdef Py_ssize_t t, n = y.shape[0]
    cdef double r = b * b, q = c * c, x = 0.0, p = p0, ll = 0.0
    cdef double xp, pp, f, v, k
    for t in range(n):
        xp = rho * x
        pp = rho * rho * p + q
        f = pp + r
        if not f > 0.0:
            return NAN
        v = y[t] - a - xp
        ll -= 0.5 * (LOG_2PI + log(f) + v * v / f)
        k = pp / f
        x = xp + k * v
        p = (1.0 - k) * pp
        filtered[t] = x
    return ll


def kalman_loglik(const double[::1] y, double a, double b, double c, double rho,
                  double p0):
    cdef Py_ssize_t t, n = y.shape[0]
    cdef double r = b * b, q = c * c, x = 0.0, p = p0, ll = 0.0
    cdef double xp, pp, f, v, k
    for t in range(n):
        xp = rho * x
        pp = rho * rho * p + q
        f = pp + r
        if not f > 0.0:
            return NAN
        v = y[t] - a - xp
        ll -= 0.5 * (LOG_2PI + log(f) + v * v / f)
        k = pp / f
        x = xp + k * v
        p = (1.0 - k) * pp
    return ll


def power_iterate(mat, v0, double tol, long max_iter, int norm_kind):
    cdef double[:, ::1] m = np.ascontiguousarray(mat, dtype=np.float64)
    cdef Py_ssize_t n = m.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] va = np.array(v0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wa = np.empty(n, dtype=np.float64)
    cdef double[::1] v = va
    cdef double[::1] w = wa
    cdef double s, diff, d, growth = 0.0
    cdef Py_ssize_t i, j
    cdef long it
    for it in range(1, max_iter + 1):
        s = 0.0
        for i in range(n):
            d = 0.0
            for j in range(n):
                d += m[i, j] * v[j]
            w[i] = d
            if norm_kind == 1:
                s += d
            else:
                s += d * d
        if norm_kind != 1:
            s = sqrt(s)
        if not s > 0.0:
            return va, 0.0, it, False
        diff = 0.0
        for i in range(n):
            w[i] /= s
            d = fabs(w[i] - v[i])
            if d > diff:
                diff = d
        growth = s
        for i in range(n):
            v[i] = w[i]
        if diff < tol:
            return va, growth, it, True
    return va, growth, max_iter, False
