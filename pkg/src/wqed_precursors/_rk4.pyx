# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop of the fixed-step propagator.

Iterates ``y <- P y + d_k q`` and records ``r . y`` after every step. The
propagator ``P`` and forcing vector ``q`` encode one RK4 step of a linear
time-invariant system with piecewise-constant drive.
"""
import numpy as np

ctypedef double complex cplx


def lti_steps(cplx[:, ::1] P, cplx[::1] q, cplx[::1] drive, cplx[::1] y0, cplx[::1] r):
    cdef Py_ssize_t n = P.shape[0]
    cdef Py_ssize_t steps = drive.shape[0]
    cdef Py_ssize_t k, i, j
    cdef cplx acc, d
    out_arr = np.empty(steps + 1, dtype=np.complex128)
    y_arr = np.array(y0, dtype=np.complex128)
    tmp_arr = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] out = out_arr
    cdef cplx[::1] y = y_arr
    cdef cplx[::1] tmp = tmp_arr
    acc = 0
    for i in range(n):
        acc = acc + r[i] * y[i]
    out[0] = acc
    for k in range(steps):
        d = drive[k]
        for i in range(n):
            acc = d * q[i]
            for j in range(n):
                acc = acc + P[i, j] * y[j]
            tmp[i] = acc
        acc = 0
        for i in range(n):
            y[i] = tmp[i]
            acc = acc + r[i] * y[i]
        out[k + 1] = acc
    return out_arr, y_arr


def pole_sum(cplx[::1] x, cplx[::1] poles, cplx[::1] weights):
    """``sum_p weights[p] / (x - poles[p])`` at every ``x``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = poles.shape[0]
    cdef Py_ssize_t i, p
    cdef cplx acc, xi
    out_arr = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] out = out_arr
    for i in range(n):
        xi = x[i]
        acc = 0
        for p in range(m):
            acc = acc + weights[p] / (xi - poles[p])
        out[i] = acc
    return out_arr


cdef extern from "<complex.h>" nogil:
    double complex cexp(double complex z)


def exp_pole_sum(double tau0, double dtau, Py_ssize_t n, cplx[::1] poles, cplx[::1] coef,
                 Py_ssize_t anchor=128):
    """``sum_p coef[p] exp(-i poles[p] tau_k)`` on ``tau_k = tau0 + k dtau``.

    Powers of ``exp(-i p dtau)`` by recurrence, re-anchored with an exact
    exponential every ``anchor`` steps to bound the rounding drift.
    """
    cdef Py_ssize_t m = poles.shape[0]
    cdef Py_ssize_t k, p
    cdef cplx z, w, mi = -1j
    out_arr = np.zeros(n, dtype=np.complex128)
    cdef cplx[::1] out = out_arr
    for p in range(m):
        z = cexp(mi * poles[p] * dtau)
        for k in range(n):
            if k % anchor == 0:
                w = coef[p] * cexp(mi * poles[p] * (tau0 + k * dtau))
            out[k] = out[k] + w
            w = w * z
    return out_arr
