# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pure``; same arithmetic, no GIL."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, isfinite

cnp.import_array()

cdef double MIN_DAMPING = 9.313225746154785e-10   # 2**-30
cdef double STAGE_TOL = 1e-8

CONVERGED = 0
MAX_ITER = 1


def harris_path(double x0, double[::1] jump_u, double[::1] fresh):
    cdef Py_ssize_t n = jump_u.shape[0]
    cdef Py_ssize_t k
    cdef double x = x0
    out = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] o = out
    o[0] = x
    with nogil:
        for k in range(n):
            if jump_u[k] < fabs(x):
                x = fresh[k]
            o[k + 1] = x
    return out


def doubling_windows(digits, Py_ssize_t length):
    cdef cnp.uint64_t[::1] d = np.ascontiguousarray(digits, dtype=np.uint64)
    if d.shape[0] < length + 63:
        raise ValueError("digit stream too short")
    out = np.empty(length, dtype=np.uint64)
    cdef cnp.uint64_t[::1] u = out
    cdef cnp.uint64_t acc = 0
    cdef Py_ssize_t j, t
    if length == 0:
        return out
    with nogil:
        for j in range(64):
            acc = (acc << 1) | d[j]
        u[0] = acc
        for t in range(1, length):
            acc = (acc << 1) | d[t + 63]
            u[t] = acc
    return out


cdef inline double cabs(double complex x) nogil:
    return (x.real * x.real + x.imag * x.imag) ** 0.5


cdef inline bint cfinite(double complex x) nogil:
    return isfinite(x.real) and isfinite(x.imag)


cdef inline void terms(double[::1] w, double[::1] p, double complex s, double c,
                       double complex* a_int, double complex* d_int) nogil:
    cdef Py_ssize_t q, nq = w.shape[0]
    cdef double complex acc_a = 0, acc_d = 0, t
    for q in range(nq):
        t = w[q] / (1.0 + w[q] * s)
        acc_a += p[q] * t
        acc_d += p[q] * (t * t)
    a_int[0] = c * acc_a
    d_int[0] = c * acc_d


cdef inline double residual(double complex z, double complex s,
                            double complex a_int) nogil:
    return cabs(z + 1.0 / s - a_int)


cdef Py_ssize_t iterate(double complex z, double[::1] w, double[::1] p, double c,
                        double target, Py_ssize_t budget,
                        double complex* s_io, double* res_out) nogil:
    cdef double complex s = s_io[0]
    cdef double complex a_int, d_int, a_c, d_c, deriv, delta, cand, step
    cdef double res, res_c, t, size
    cdef double damping = 1.0
    cdef double prev_step = 1e308
    cdef int grow = 0, h
    cdef bint accepted
    cdef Py_ssize_t it = 0
    terms(w, p, s, c, &a_int, &d_int)
    res = residual(z, s, a_int)
    while True:
        if res <= target or it >= budget:
            break
        it += 1

        deriv = -1.0 / (s * s) + d_int
        accepted = False
        if deriv != 0:
            delta = -(z + 1.0 / s - a_int) / deriv
            t = 1.0
            for h in range(4):
                cand = s + t * delta
                if cand.imag > 0.0 and cfinite(cand):
                    terms(w, p, cand, c, &a_c, &d_c)
                    res_c = residual(z, cand, a_c)
                    if res_c < res:
                        s = cand
                        a_int = a_c
                        d_int = d_c
                        res = res_c
                        accepted = True
                        break
                t *= 0.5
        if accepted:
            continue

        step = damping * (-1.0 / (z - a_int) - s)
        cand = s + step
        if not (cand.imag > 0.0) or not cfinite(cand):
            damping = max(damping * 0.5, MIN_DAMPING)
            continue
        size = cabs(step)
        if size > prev_step:
            grow += 1
        else:
            grow = 0
        if grow >= 2:
            damping = max(damping * 0.5, MIN_DAMPING)
            grow = 0
        prev_step = size
        s = cand
        terms(w, p, s, c, &a_int, &d_int)
        res = residual(z, s, a_int)
    s_io[0] = s
    res_out[0] = res
    return it


def solve_points(zs, w, p, double c, double tol, Py_ssize_t max_iter, s0=None):
    cdef double complex[::1] z_v = np.ascontiguousarray(zs, dtype=np.complex128)
    cdef double[::1] w_v = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[::1] p_v = np.ascontiguousarray(p, dtype=np.float64)
    if p_v.shape[0] != w_v.shape[0]:
        raise ValueError("w and p must have equal length")
    cdef Py_ssize_t n = z_v.shape[0]
    cdef Py_ssize_t i, used, it
    cdef bint warm = s0 is not None
    cdef double complex[::1] s0_v
    if warm:
        s0_v = np.ascontiguousarray(s0, dtype=np.complex128)
    s_arr = np.empty(n, dtype=np.complex128)
    it_arr = np.empty(n, dtype=np.int64)
    res_arr = np.empty(n, dtype=np.float64)
    st_arr = np.empty(n, dtype=np.int64)
    cdef double complex[::1] s_out = s_arr
    cdef cnp.int64_t[::1] it_out = it_arr
    cdef double[::1] res_out = res_arr
    cdef cnp.int64_t[::1] st_out = st_arr
    cdef double complex z, zk, s
    cdef double v, h, res, target
    with nogil:
        for i in range(n):
            z = z_v[i]
            v = z.imag
            used = 0
            res = 1e308
            if warm:
                s = s0_v[i]
                target = tol * (1.0 + cabs(z))
                used = iterate(z, w_v, p_v, c, target, max_iter, &s, &res)
            else:
                h = 1.0
                if h <= v:
                    h = v
                zk = z.real + 1j * h
                s = -1.0 / zk
                while True:
                    zk = z.real + 1j * h
                    if h == v:
                        target = tol * (1.0 + cabs(zk))
                    else:
                        target = STAGE_TOL
                    it = iterate(zk, w_v, p_v, c, target, max_iter - used, &s, &res)
                    used += it
                    if h == v:
                        break
                    h *= 0.25
                    if h <= v:
                        h = v
            s_out[i] = s
            it_out[i] = used
            res_out[i] = res
            st_out[i] = 0 if res <= tol * (1.0 + cabs(z)) else 1
    return s_arr, it_arr, res_arr, st_arr
