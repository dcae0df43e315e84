"""Dense real-symmetric eigendecomposition with certified residuals.

Three interchangeable backends:

``lapack``
    ``numpy.linalg.eigh`` — the production default.
``native``
    Compiled Householder-tridiagonalization + implicit-QL extension,
    present when the package was built with a C compiler.
``python``
    Pure-NumPy transcription of the same algorithm; always available.

Interval arguments throughout are half-open ``(a, b]``: a count over
``(a, b]`` plus a count over ``(b, c]`` equals the count over ``(a, c]``
exactly, with no double-counted endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._pure import NonConvergenceError, eigh_python

try:  # compiled extension is optional; the pure backend always works
    from ._core import eigh_native

    HAVE_NATIVE = True
except ImportError:  # pragma: no cover - depends on build environment
    eigh_native = None
    HAVE_NATIVE = False

__all__ = [
    "HAVE_NATIVE",
    "NonConvergenceError",
    "Spectrum",
    "available_backends",
    "count_in",
    "count_sorted",
    "eigh",
    "projector_diagonal",
]

_SYMMETRY_TOL = 1e-12
_DEFAULT_BACKEND = "lapack"


def available_backends() -> tuple[str, ...]:
    """Backends usable in this installation, production default first."""
    if HAVE_NATIVE:
        return ("lapack", "native", "python")
    return ("lapack", "python")


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Sorted eigendecomposition of one symmetric matrix.

    ``eigenvectors`` holds eigenvectors as columns, or None when only
    eigenvalues were requested.  ``residual`` is the largest 2-norm of
    H v − λ v over all pairs and ``gram_error`` the largest entry of
    |VᵀV − I|; both are None when vectors are absent or certification
    was skipped.  ``grid`` records where the operator lived (a periodic
    box or a cube), or None for a bare matrix.
    """

    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray]
    grid: object
    backend: str
    residual: Optional[float]
    gram_error: Optional[float]

    def __post_init__(self):
        w = np.asarray(self.eigenvalues, dtype=np.float64)
        if w.ndim != 1:
            raise ValueError("eigenvalues must be a 1-d array")
        if w.size > 1 and np.any(np.diff(w) < 0):
            raise ValueError("eigenvalues must be sorted ascending")
        object.__setattr__(self, "eigenvalues", w)
        if self.eigenvectors is not None:
            v = np.asarray(self.eigenvectors, dtype=np.float64)
            if v.shape != (w.size, w.size):
                raise ValueError(
                    "eigenvector array has shape %s, expected %s"
                    % (v.shape, (w.size, w.size))
                )
            object.__setattr__(self, "eigenvectors", v)

    @property
    def size(self) -> int:
        return int(self.eigenvalues.size)

    def site_index(self, site) -> int:
        """Map a site (or a plain integer index) to a vector component."""
        if isinstance(site, (int, np.integer)):
            return int(site)
        if self.grid is None:
            raise ValueError("spectrum has no grid; pass an integer index")
        return self.grid.site_to_index(site)


def _extract(h):
    """Pull (matrix, grid) out of a HamiltonianMatrix or a bare array."""
    matrix = getattr(h, "matrix", None)
    if matrix is not None:
        return np.asarray(matrix, dtype=np.float64), getattr(h, "grid", None)
    return np.asarray(h, dtype=np.float64), None


def eigh(
    h,
    backend: str = "auto",
    vectors: bool = True,
    certify: bool = True,
) -> Spectrum:
    """Decompose a symmetric operator into a :class:`Spectrum`.

    ``h`` may be a Hamiltonian wrapper (its grid is kept as provenance)
    or a plain 2-d array.  ``backend`` is one of ``auto``/``lapack``/
    ``native``/``python``; ``auto`` resolves to the production default.
    With ``vectors=False`` only eigenvalues are computed and the
    certificates are None.  ``certify=False`` skips the O(n³) residual
    and Gram checks.
    """
    matrix, grid = _extract(h)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("expected a square matrix, got shape %s" % (matrix.shape,))
    if matrix.size:
        scale = max(1.0, float(np.max(np.abs(matrix))))
        asym = float(np.max(np.abs(matrix - matrix.T)))
        if asym > _SYMMETRY_TOL * scale:
            raise ValueError(
                "matrix is not symmetric: max |A - A^T| = %.3e" % asym
            )
    name = _DEFAULT_BACKEND if backend == "auto" else backend
    if name == "lapack":
        if vectors:
            w, v = np.linalg.eigh(matrix)
        else:
            w, v = np.linalg.eigvalsh(matrix), None
    elif name == "native":
        if not HAVE_NATIVE:
            raise ValueError(
                "native backend requested but the compiled extension is "
                "not available; run a build with a C compiler or use "
                "backend='python'"
            )
        w, v = eigh_native(matrix, vectors=vectors)
    elif name == "python":
        w, v = eigh_python(matrix, vectors=vectors)
    else:
        raise ValueError(
            "unknown backend %r; expected one of auto, lapack, native, python"
            % (name,)
        )
    order = np.argsort(w, kind="stable")
    w = np.asarray(w, dtype=np.float64)[order]
    if v is not None:
        v = np.asarray(v, dtype=np.float64)[:, order]
    residual = gram_error = None
    if v is not None and certify and w.size:
        defect = matrix @ v - v * w[np.newaxis, :]
        residual = float(np.sqrt((defect * defect).sum(axis=0)).max())
        gram = v.T @ v
        gram[np.diag_indices_from(gram)] -= 1.0
        gram_error = float(np.max(np.abs(gram)))
    return Spectrum(
        eigenvalues=w,
        eigenvectors=v,
        grid=grid,
        backend=name,
        residual=residual,
        gram_error=gram_error,
    )


def count_sorted(eigenvalues: np.ndarray, lo, hi):
    """Count eigenvalues in the half-open interval(s) ``(lo, hi]``.

    ``eigenvalues`` must be sorted ascending.  ``lo`` and ``hi`` may be
    scalars or broadcasting arrays; the result follows their shape.
    """
    w = np.asarray(eigenvalues)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if np.any(lo > hi):
        raise ValueError("interval has lo > hi")
    counts = np.searchsorted(w, hi, side="right") - np.searchsorted(
        w, lo, side="right"
    )
    if counts.ndim == 0:
        return int(counts)
    return counts


def count_in(spec: Spectrum, interval) -> int:
    """Number of eigenvalues in the half-open interval ``(a, b]``."""
    a, b = interval
    return int(count_sorted(spec.eigenvalues, a, b))


def projector_diagonal(spec: Spectrum, site, interval) -> float:
    """Diagonal matrix element ⟨δ_site, 1_{(a,b]}(H) δ_site⟩."""
    if spec.eigenvectors is None:
        raise ValueError("projector_diagonal needs eigenvectors")
    a, b = interval
    if a > b:
        raise ValueError("interval has lo > hi")
    idx = spec.site_index(site)
    w = spec.eigenvalues
    mask = (w > a) & (w <= b)
    row = spec.eigenvectors[idx, mask]
    return float((row * row).sum())
