# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Semantics match ``_kernels_py`` one for one."""

from libc.math cimport fabs, sqrt
from libc.string cimport memset

import numpy as np

ctypedef double complex cplx


def gather_windows(const cplx[:, ::1] z, const Py_ssize_t[::1] rows,
                   const Py_ssize_t[::1] cols, Py_ssize_t w,
                   cplx[:, :, ::1] out):
    cdef Py_ssize_t k, i, j, r, c
    cdef Py_ssize_t nk = out.shape[0], n = out.shape[1]
    with nogil:
        memset(&out[0, 0, 0], 0, nk * n * n * sizeof(cplx))
        for k in range(rows.shape[0]):
            r = rows[k]
            c = cols[k]
            for i in range(w):
                for j in range(w):
                    out[k, r + i, c + j] = z[r + i, c + j]
    return out.base


def scatter_add_windows(const cplx[:, :, ::1] stack, const Py_ssize_t[::1] rows,
                        const Py_ssize_t[::1] cols, Py_ssize_t w,
                        cplx[:, ::1] out):
    cdef Py_ssize_t k, i, j, r, c
    cdef Py_ssize_t n = out.shape[0]
    with nogil:
        memset(&out[0, 0], 0, n * n * sizeof(cplx))
        for k in range(rows.shape[0]):
            r = rows[k]
            c = cols[k]
            for i in range(w):
                for j in range(w):
                    out[r + i, c + j] = out[r + i, c + j] + stack[k, r + i, c + j]
    return out.base


cdef inline void _acc(double x, double* total, double* comp) noexcept nogil:
    # Neumaier compensated summation; long sums of large terms otherwise
    # lose the digits a finite-difference check needs
    cdef double t = total[0] + x
    if fabs(total[0]) >= fabs(x):
        comp[0] += (total[0] - t) + x
    else:
        comp[0] += (x - t) + total[0]
    total[0] = t


def _flat(cplx[:, :, ::1] spec):
    # interleaved (re, im) float64 view of the same buffer
    return np.asarray(spec).view(np.float64)


def modulus_project(cplx[:, :, ::1] spec, const double[:, :, ::1] sqrt_d):
    cdef double[:, :, ::1] v = _flat(spec)
    cdef Py_ssize_t k, i, j
    cdef double re, im, mag, s, t
    with nogil:
        for k in range(v.shape[0]):
            for i in range(v.shape[1]):
                for j in range(sqrt_d.shape[2]):
                    re = v[k, i, 2 * j]
                    im = v[k, i, 2 * j + 1]
                    mag = sqrt(re * re + im * im)
                    s = sqrt_d[k, i, j]
                    if mag > 0:
                        t = s / mag
                        v[k, i, 2 * j] = re * t
                        v[k, i, 2 * j + 1] = im * t
                    else:
                        v[k, i, 2 * j] = s
                        v[k, i, 2 * j + 1] = 0.0
    return spec.base


def distance_residual(cplx[:, :, ::1] spec, const double[:, :, ::1] sqrt_d):
    cdef double[:, :, ::1] v = _flat(spec)
    cdef Py_ssize_t k, i, j
    cdef double re, im, mag, s, t, diff
    cdef double total = 0.0, comp = 0.0
    with nogil:
        for k in range(v.shape[0]):
            for i in range(v.shape[1]):
                for j in range(sqrt_d.shape[2]):
                    re = v[k, i, 2 * j]
                    im = v[k, i, 2 * j + 1]
                    mag = sqrt(re * re + im * im)
                    s = sqrt_d[k, i, j]
                    if mag > 0:
                        t = 1.0 - s / mag
                        v[k, i, 2 * j] = re * t
                        v[k, i, 2 * j + 1] = im * t
                    else:
                        v[k, i, 2 * j] = -s
                        v[k, i, 2 * j + 1] = 0.0
                    diff = mag - s
                    _acc(diff * diff, &total, &comp)
    return total + comp


def intensity_residual(cplx[:, :, ::1] spec, const double[:, :, ::1] d):
    cdef double[:, :, ::1] v = _flat(spec)
    cdef Py_ssize_t k, i, j
    cdef double re, im, r
    cdef double total = 0.0, comp = 0.0
    with nogil:
        for k in range(v.shape[0]):
            for i in range(v.shape[1]):
                for j in range(d.shape[2]):
                    re = v[k, i, 2 * j]
                    im = v[k, i, 2 * j + 1]
                    r = re * re + im * im - d[k, i, j]
                    v[k, i, 2 * j] = r * re
                    v[k, i, 2 * j + 1] = r * im
                    _acc(r * r, &total, &comp)
    return total + comp


def restrict4(const cplx[:, ::1] fine, cplx[:, ::1] out):
    cdef Py_ssize_t i, j, m = out.shape[0]
    with nogil:
        for i in range(m):
            for j in range(m):
                out[i, j] = 0.25 * (fine[2 * i, 2 * j] + fine[2 * i, 2 * j + 1]
                                    + fine[2 * i + 1, 2 * j] + fine[2 * i + 1, 2 * j + 1])
    return out.base


def prolong2(const cplx[:, ::1] coarse, cplx[:, ::1] out):
    cdef Py_ssize_t i, j, m = coarse.shape[0]
    cdef cplx v
    with nogil:
        for i in range(m):
            for j in range(m):
                v = coarse[i, j]
                out[2 * i, 2 * j] = v
                out[2 * i, 2 * j + 1] = v
                out[2 * i + 1, 2 * j] = v
                out[2 * i + 1, 2 * j + 1] = v
    return out.base
