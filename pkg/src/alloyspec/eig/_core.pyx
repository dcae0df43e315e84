# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled dense symmetric eigensolver.

Transcription of the Householder + implicitly shifted QL algorithm from
``_pure`` into C loops.  The two backends must agree to rounding; the
test suite cross-checks them on random matrices.
"""

from libc.float cimport DBL_EPSILON
from libc.math cimport copysign, fabs, hypot, sqrt

import numpy as np

from ._pure import NonConvergenceError

DEF MAX_SWEEPS = 50


def eigh_native(object a, bint vectors=True):
    """Full symmetric eigendecomposition; returns ``(w, V_or_None)``."""
    arr = np.array(a, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = arr.shape[0]
    if n == 0:
        return np.zeros(0), (np.zeros((0, 0)) if vectors else None)
    if n == 1:
        w1 = np.array([float(arr[0, 0])])
        return w1, (np.ones((1, 1)) if vectors else None)

    cdef double[:, ::1] b = arr
    qarr = np.eye(n) if vectors else None
    cdef double[:, ::1] q = qarr if vectors else None

    varr = np.zeros(n)
    parr = np.zeros(n)
    cdef double[::1] v = varr
    cdef double[::1] p = parr

    cdef Py_ssize_t k, i, j, tail
    cdef double norm, alpha, vnorm, big, t

    # Householder reduction to tridiagonal form.
    for k in range(n - 2):
        tail = n - k - 1
        norm = 0.0
        for i in range(tail):
            v[i] = b[k + 1 + i, k]
            norm += v[i] * v[i]
        norm = sqrt(norm)
        if norm == 0.0:
            continue
        if v[0] != 0.0:
            alpha = -copysign(norm, v[0])
        else:
            alpha = -norm
        v[0] -= alpha
        vnorm = 0.0
        for i in range(tail):
            vnorm += v[i] * v[i]
        vnorm = sqrt(vnorm)
        if vnorm == 0.0:
            continue
        for i in range(tail):
            v[i] /= vnorm
        big = 0.0
        for i in range(tail):
            t = 0.0
            for j in range(tail):
                t += b[k + 1 + i, k + 1 + j] * v[j]
            p[i] = t
            big += v[i] * t
        for i in range(tail):
            p[i] -= big * v[i]
        for i in range(tail):
            for j in range(tail):
                b[k + 1 + i, k + 1 + j] -= 2.0 * (v[i] * p[j] + p[i] * v[j])
        for i in range(tail):
            b[k + 1 + i, k] = 0.0
            b[k, k + 1 + i] = 0.0
        b[k + 1, k] = alpha
        b[k, k + 1] = alpha
        if q is not None:
            for i in range(n):
                t = 0.0
                for j in range(tail):
                    t += q[i, k + 1 + j] * v[j]
                t *= 2.0
                for j in range(tail):
                    q[i, k + 1 + j] -= t * v[j]

    darr = np.empty(n)
    workarr = np.zeros(n)
    cdef double[::1] d = darr
    cdef double[::1] work = workarr
    for i in range(n):
        d[i] = b[i, i]
    for i in range(n - 1):
        work[i] = b[i + 1, i]

    # Implicitly shifted QL iteration with Wilkinson shifts.
    cdef Py_ssize_t l, m, row, sweeps
    cdef double g, r, s, c, shift, f, bb, dd, zi, zi1
    cdef bint underflow

    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = fabs(d[m]) + fabs(d[m + 1])
                if fabs(work[m]) <= DBL_EPSILON * dd:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > MAX_SWEEPS:
                big = 0.0
                for i in range(n - 1):
                    if fabs(work[i]) > big:
                        big = fabs(work[i])
                raise NonConvergenceError(
                    "QL iteration exceeded %d sweeps at row %d" % (MAX_SWEEPS, l),
                    residual=big,
                )
            g = (d[l + 1] - d[l]) / (2.0 * work[l])
            r = hypot(g, 1.0)
            g = d[m] - d[l] + work[l] / (g + copysign(r, g))
            s = 1.0
            c = 1.0
            shift = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * work[i]
                bb = c * work[i]
                r = hypot(f, g)
                work[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= shift
                    work[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - shift
                r = (d[i] - g) * s + 2.0 * c * bb
                shift = s * r
                d[i + 1] = g + shift
                g = c * r - bb
                if q is not None:
                    for row in range(n):
                        zi = q[row, i]
                        zi1 = q[row, i + 1]
                        q[row, i + 1] = s * zi + c * zi1
                        q[row, i] = c * zi - s * zi1
            if underflow:
                continue
            d[l] -= shift
            work[l] = g
            work[m] = 0.0

    order = np.argsort(darr, kind="stable")
    wout = darr[order]
    if vectors:
        return wout, qarr[:, order]
    return wout, None
