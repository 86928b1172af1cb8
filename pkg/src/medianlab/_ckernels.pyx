# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: L_q distances, social cost, weighted medians, grid search.

Mirrors ``medianlab._pykernels`` function for function.
"""

import numpy as np

from libc.math cimport fabs, pow, sqrt, isinf, INFINITY
from libc.stdlib cimport malloc, free, qsort

cdef double HALF_TOL = 1e-12
cdef Py_ssize_t KAHAN_MIN_D = 10000


cdef struct VW:
    double v
    double w


cdef int _cmp_vw(const void* a, const void* b) noexcept nogil:
    cdef double x = (<VW*>a).v
    cdef double y = (<VW*>b).v
    if x < y:
        return -1
    if x > y:
        return 1
    return 0


cdef inline double _norm_diff(const double* p, const double* f, Py_ssize_t d,
                              double q) noexcept nogil:
    """||f - p||_q, max-scaled; Kahan-compensated accumulation for long vectors."""
    cdef Py_ssize_t j
    cdef double a, m = 0.0, s = 0.0, c = 0.0, y, t
    if q == 1.0:
        if d < KAHAN_MIN_D:
            for j in range(d):
                s += fabs(f[j] - p[j])
            return s
        for j in range(d):
            y = fabs(f[j] - p[j]) - c
            t = s + y
            c = (t - s) - y
            s = t
        return s
    for j in range(d):
        a = fabs(f[j] - p[j])
        if a > m:
            m = a
    if isinf(q) or m == 0.0:
        return m
    if q == 2.0:
        for j in range(d):
            a = (f[j] - p[j]) / m
            y = a * a - c
            t = s + y
            if d >= KAHAN_MIN_D:
                c = (t - s) - y
            s = t
        return m * sqrt(s)
    for j in range(d):
        y = pow(fabs(f[j] - p[j]) / m, q) - c
        t = s + y
        if d >= KAHAN_MIN_D:
            c = (t - s) - y
        s = t
    return m * pow(s, 1.0 / q)


def lq_norm(const double[::1] x, double q):
    cdef Py_ssize_t d = x.shape[0]
    if d == 0:
        return 0.0
    cdef double[::1] zero = np.zeros(d)
    return _norm_diff(&zero[0], &x[0], d, q)


def distances(const double[:, ::1] points, const double[::1] f, double q):
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = _norm_diff(&points[i, 0], &f[0], d, q)
    return out


def social_cost(const double[:, ::1] points, const double[::1] weights,
                const double[::1] f, double q):
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1], i
    cdef double s = 0.0
    with nogil:
        for i in range(n):
            s += weights[i] * _norm_diff(&points[i, 0], &f[0], d, q)
    return s


def smoothed_cost_grad(const double[:, ::1] points, const double[::1] weights,
                       const double[::1] f, double q, double eps):
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1], i, j
    grad_arr = np.zeros(d)
    cdef double[::1] grad = grad_arr
    cdef double D, phi, dphi, r, total = 0.0, coef
    with nogil:
        for i in range(n):
            D = _norm_diff(&points[i, 0], &f[0], d, q)
            if D < eps:
                phi = D * D / (2.0 * eps) + 0.5 * eps
                dphi = D / eps
            else:
                phi = D
                dphi = 1.0
            total += weights[i] * phi
            if D == 0.0:
                continue
            coef = weights[i] * dphi
            for j in range(d):
                r = f[j] - points[i, j]
                if r == 0.0:
                    continue
                if q == 2.0:
                    grad[j] += coef * r / D
                elif r > 0:
                    grad[j] += coef * pow(r / D, q - 1.0)
                else:
                    grad[j] -= coef * pow(-r / D, q - 1.0)
    return total, grad_arr


def weighted_median(const double[:, ::1] points, const double[::1] weights, bint upper):
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1], i, j
    out = np.empty(d)
    cdef double[::1] o = out
    cdef double total = 0.0, thr, acc
    for i in range(n):
        total += weights[i]
    thr = 0.5 * total - HALF_TOL * total
    cdef VW* buf = <VW*>malloc(n * sizeof(VW))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for j in range(d):
                for i in range(n):
                    buf[i].v = points[i, j]
                    buf[i].w = weights[i]
                qsort(buf, n, sizeof(VW), _cmp_vw)
                acc = 0.0
                if upper:
                    i = n - 1
                    while i > 0:
                        acc += buf[i].w
                        if acc >= thr:
                            break
                        i -= 1
                else:
                    i = 0
                    while i < n - 1:
                        acc += buf[i].w
                        if acc >= thr:
                            break
                        i += 1
                o[j] = buf[i].v
    finally:
        free(buf)
    return out


def grid_min(const double[:, ::1] points, const double[::1] weights,
             const double[::1] lo, double res, counts, double q):
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1], i, j, g, total = 1
    cdef long[::1] cnt = np.asarray(counts, dtype=np.int64).astype(np.int_)
    for j in range(d):
        total *= cnt[j]
    cdef double[::1] cand = np.empty(d)
    cdef long[::1] idx = np.zeros(d, dtype=np.int_)
    cdef Py_ssize_t best_g = 0
    cdef double best = INFINITY, s
    with nogil:
        for g in range(total):
            for j in range(d):
                cand[j] = lo[j] + idx[j] * res
            s = 0.0
            for i in range(n):
                s += weights[i] * _norm_diff(&points[i, 0], &cand[0], d, q)
                if s >= best:
                    break
            if s < best:
                best = s
                best_g = g
            # odometer increment, last axis fastest (C order, matches unravel_index)
            j = d - 1
            while j >= 0:
                idx[j] += 1
                if idx[j] < cnt[j]:
                    break
                idx[j] = 0
                j -= 1
    flat = np.unravel_index(best_g, tuple(int(c) for c in cnt))
    point = np.asarray(lo) + np.array(flat, dtype=np.float64) * res
    return point, best


def weiszfeld(const double[:, ::1] points, const double[::1] weights,
              x0, double eps, Py_ssize_t max_iter, double tol):
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1], i, j, it = 0
    x_arr = np.array(x0, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] nxt = np.empty(d)
    cdef double D, inv, den, step, r
    with nogil:
        for it in range(1, max_iter + 1):
            for j in range(d):
                nxt[j] = 0.0
            den = 0.0
            for i in range(n):
                D = 0.0
                for j in range(d):
                    r = points[i, j] - x[j]
                    D += r * r
                D = sqrt(D)
                if D < eps:
                    D = eps
                inv = weights[i] / D
                den += inv
                for j in range(d):
                    nxt[j] += inv * points[i, j]
            step = 0.0
            for j in range(d):
                nxt[j] /= den
                r = nxt[j] - x[j]
                step += r * r
                x[j] = nxt[j]
            if sqrt(step) <= tol:
                break
    return x_arr, it
