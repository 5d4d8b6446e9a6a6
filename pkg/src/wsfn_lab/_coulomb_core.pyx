# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython pair kernels for the clamped Coulomb interaction.

Same contracts as _kernels_numpy (see its module docstring); fused loops
avoid the O(N*M*d^2) temporaries of the broadcasting fallback. Summation is
sequential in index order, so results are deterministic per build but may
differ from the numpy backend in the last bits (different reduction order).

The d = 3 and d = 4 exponents are half-integers, so those paths use sqrt and
reciprocals instead of pow; that is where essentially all the time goes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport pow, sqrt

cnp.import_array()


cdef inline double _kern(double r2, Py_ssize_t d) noexcept nogil:
    # r2^(-(d-2)/2)
    if d == 3:
        return 1.0 / sqrt(r2)
    if d == 4:
        return 1.0 / r2
    return pow(r2, -0.5 * (d - 2.0))


cdef inline double _grad_scale(double r2, Py_ssize_t d) noexcept nogil:
    # -(d-2) r2^(-d/2)
    cdef double ir
    if d == 3:
        ir = 1.0 / sqrt(r2)
        return -(ir * ir) * ir
    if d == 4:
        ir = 1.0 / r2
        return -2.0 * ir * ir
    return -(d - 2.0) * pow(r2, -0.5 * d)


cdef inline double _hess_scale(double r2, Py_ssize_t d) noexcept nogil:
    # (d-2) d r2^(-(d+2)/2)
    cdef double ir
    if d == 3:
        ir = 1.0 / sqrt(r2)
        return 3.0 * (ir * ir) * (ir * ir) * ir
    if d == 4:
        ir = 1.0 / r2
        return 8.0 * ir * ir * ir
    return (d - 2.0) * d * pow(r2, -0.5 * (d + 2.0))


def energy_self(double[:, ::1] x, double eps2):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double r2, diff, total = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            r2 = 0.0
            for k in range(d):
                diff = x[i, k] - x[j, k]
                r2 += diff * diff
            if r2 < eps2:
                r2 = eps2
            total += _kern(r2, d)
    return total


def energy_cross(double[:, ::1] x, double[:, ::1] y, double eps2):
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double r2, diff, total = 0.0
    for i in range(n):
        for j in range(m):
            r2 = 0.0
            for k in range(d):
                diff = x[i, k] - y[j, k]
                r2 += diff * diff
            if r2 < eps2:
                r2 = eps2
            total += _kern(r2, d)
    return total


def grad_self(double[:, ::1] x, double eps2):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double r2, s
    cdef double[64] z
    out_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            r2 = 0.0
            for k in range(d):
                z[k] = x[i, k] - x[j, k]
                r2 += z[k] * z[k]
            if r2 <= eps2:
                continue
            s = _grad_scale(r2, d)
            for k in range(d):
                out[i, k] += s * z[k]
    return out_arr


def grad_cross(double[:, ::1] x, double[:, ::1] y, double eps2):
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double r2, s
    cdef double[64] z
    out_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        for j in range(m):
            r2 = 0.0
            for k in range(d):
                z[k] = x[i, k] - y[j, k]
                r2 += z[k] * z[k]
            if r2 <= eps2:
                continue
            s = _grad_scale(r2, d)
            for k in range(d):
                out[i, k] += s * z[k]
    return out_arr


def wsum_self(double[:, ::1] x, double[:, ::1] v, double eps2):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double r2, a, b, zv
    cdef double[64] z
    out_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            r2 = 0.0
            for k in range(d):
                z[k] = x[i, k] - x[j, k]
                r2 += z[k] * z[k]
            if r2 <= eps2:
                continue
            a = _grad_scale(r2, d)
            b = _hess_scale(r2, d)
            zv = 0.0
            for k in range(d):
                zv += z[k] * v[j, k]
            for k in range(d):
                out[i, k] += a * v[j, k] + b * zv * z[k]
    return out_arr


def wdiag_self(double[:, ::1] x, double eps2):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, j, k, l
    cdef double r2, a, b
    cdef double[64] z
    out_arr = np.zeros((n, d, d), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            r2 = 0.0
            for k in range(d):
                z[k] = x[i, k] - x[j, k]
                r2 += z[k] * z[k]
            if r2 <= eps2:
                continue
            a = _grad_scale(r2, d)
            b = _hess_scale(r2, d)
            for k in range(d):
                out[i, k, k] += a
                for l in range(d):
                    out[i, k, l] += b * z[k] * z[l]
    return out_arr


def wdiag_cross(double[:, ::1] x, double[:, ::1] y, double eps2):
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, j, k, l
    cdef double r2, a, b
    cdef double[64] z
    out_arr = np.zeros((n, d, d), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    for i in range(n):
        for j in range(m):
            r2 = 0.0
            for k in range(d):
                z[k] = x[i, k] - y[j, k]
                r2 += z[k] * z[k]
            if r2 <= eps2:
                continue
            a = _grad_scale(r2, d)
            b = _hess_scale(r2, d)
            for k in range(d):
                out[i, k, k] += a
                for l in range(d):
                    out[i, k, l] += b * z[k] * z[l]
    return out_arr
