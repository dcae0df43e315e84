"""Reference dense symmetric eigensolver in plain NumPy.

Householder reduction to tridiagonal form followed by implicitly shifted
QL iteration with Wilkinson shifts, accumulating eigenvectors.  This is
the fallback used when the compiled extension is unavailable; the two
are transcriptions of the same algorithm and must agree to rounding.
"""

from __future__ import annotations

import math

import numpy as np


class NonConvergenceError(RuntimeError):
    """QL iteration failed to annihilate an off-diagonal entry.

    Carries the worst remaining off-diagonal magnitude in ``residual``.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = float(residual)


_MAX_SWEEPS = 50


def tridiagonalize(a: np.ndarray, vectors: bool = True):
    """Reduce a symmetric matrix to tridiagonal form by Householder reflections.

    Returns ``(d, e, q)``: diagonal, subdiagonal (length n-1), and the
    accumulated orthogonal transform (or None when ``vectors`` is False).
    """
    b = np.array(a, dtype=np.float64, copy=True)
    n = b.shape[0]
    q = np.eye(n) if vectors else None
    for k in range(n - 2):
        x = b[k + 1:, k]
        norm = math.sqrt(float(x @ x))
        if norm == 0.0:
            continue
        alpha = -math.copysign(norm, x[0]) if x[0] != 0.0 else -norm
        v = x.copy()
        v[0] -= alpha
        vnorm = math.sqrt(float(v @ v))
        if vnorm == 0.0:
            continue
        v /= vnorm
        sub = b[k + 1:, k + 1:]
        p = sub @ v
        w = p - (v @ p) * v
        sub -= 2.0 * np.outer(v, w)
        sub -= 2.0 * np.outer(w, v)
        b[k + 1:, k] = 0.0
        b[k, k + 1:] = 0.0
        b[k + 1, k] = alpha
        b[k, k + 1] = alpha
        if q is not None:
            tail = q[:, k + 1:]
            tail -= 2.0 * np.outer(tail @ v, v)
    d = np.diag(b).copy()
    e = np.diag(b, 1).copy() if n > 1 else np.zeros(0)
    return d, e, q


def ql_implicit(d: np.ndarray, e: np.ndarray, z: np.ndarray | None):
    """Diagonalize a symmetric tridiagonal matrix in place.

    ``d`` is the diagonal, ``e`` the subdiagonal (length n-1), ``z`` an
    orthogonal matrix whose columns are rotated alongside (or None to
    compute eigenvalues only).  Returns ``(d, z)`` sorted ascending.
    """
    n = d.size
    d = np.asarray(d, dtype=np.float64).copy()
    work = np.zeros(n)
    work[: n - 1] = e
    eps = np.finfo(np.float64).eps
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(work[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > _MAX_SWEEPS:
                raise NonConvergenceError(
                    "QL iteration exceeded %d sweeps at row %d" % (_MAX_SWEEPS, l),
                    residual=float(np.max(np.abs(work[: n - 1]))) if n > 1 else 0.0,
                )
            g = (d[l + 1] - d[l]) / (2.0 * work[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + work[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * work[i]
                bb = c * work[i]
                r = math.hypot(f, g)
                work[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    work[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * bb
                p = s * r
                d[i + 1] = g + p
                g = c * r - bb
                if z is not None:
                    zi = z[:, i].copy()
                    zi1 = z[:, i + 1].copy()
                    z[:, i + 1] = s * zi + c * zi1
                    z[:, i] = c * zi - s * zi1
            if underflow:
                continue
            d[l] -= p
            work[l] = g
            work[m] = 0.0
    order = np.argsort(d, kind="stable")
    d = d[order]
    if z is not None:
        z = z[:, order]
    return d, z


def eigh_python(a: np.ndarray, vectors: bool = True):
    """Full symmetric eigendecomposition; returns ``(w, V_or_None)``."""
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    if n == 0:
        return np.zeros(0), (np.zeros((0, 0)) if vectors else None)
    if n == 1:
        w = np.array([float(a[0, 0])])
        return w, (np.ones((1, 1)) if vectors else None)
    d, e, q = tridiagonalize(a, vectors=vectors)
    return ql_implicit(d, e, q)
