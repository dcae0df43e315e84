"""Independent reference implementations used to pin expected values.

Everything here is deliberately naive — direct sums, closed forms, and
Fourier diagonalization — so the package under test never generates its
own expected answers.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def convolve_periodic(values: np.ndarray, kernel: dict, side: int, d: int) -> np.ndarray:
    """Circular convolution by direct summation.

    ``values`` is a flat array over the centered box of the given side,
    linear-indexed with the last axis fastest (row-major over coordinates
    ordered first axis outermost).  ``kernel`` maps offset tuples to
    weights.  Returns the flat array of sums value[x - m] * kernel[m]
    with periodic wrapping.
    """
    half = (side - 1) // 2
    coords = list(itertools.product(range(-half, half + 1), repeat=d))
    index = {c: i for i, c in enumerate(coords)}
    out = np.zeros(len(coords))
    for i, x in enumerate(coords):
        total = 0.0
        for offset, weight in kernel.items():
            src = tuple((x[j] - offset[j] + half) % side - half for j in range(d))
            total += weight * values[index[src]]
        out[i] = total
    return out


def symmetric_2x2_eigenvalues(a: float, b: float, c: float) -> tuple[float, float]:
    """Eigenvalues of [[a, c], [c, b]], ascending."""
    mean = 0.5 * (a + b)
    rad = math.hypot(0.5 * (a - b), c)
    return (mean - rad, mean + rad)


def symmetric_3x3_eigenvalues(m: np.ndarray) -> np.ndarray:
    """Roots of the characteristic cubic via the trigonometric closed form."""
    m = np.asarray(m, dtype=np.float64)
    q = m.trace() / 3.0
    b = m - q * np.eye(3)
    p = math.sqrt((b * b).sum() / 6.0)
    if p == 0.0:
        return np.full(3, q)
    det_b = np.linalg.det(b / p)
    phi = math.acos(min(1.0, max(-1.0, det_b / 2.0))) / 3.0
    eigs = [
        q + 2.0 * p * math.cos(phi),
        q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0),
        q + 2.0 * p * math.cos(phi + 4.0 * math.pi / 3.0),
    ]
    return np.sort(eigs)


def free_spectrum_fourier(side: int, d: int) -> np.ndarray:
    """Eigenvalues of the hopping-only Laplacian on a periodic box.

    Plane waves diagonalize the operator; each mode m contributes
    -2 * sum_j cos(2 pi m_j / side).  Sorted ascending.
    """
    modes = np.arange(side)
    single = -2.0 * np.cos(2.0 * np.pi * modes / side)
    total = np.zeros(1)
    for _ in range(d):
        total = (total[:, None] + single[None, :]).ravel()
    return np.sort(total)


def free_ids_1d(energy: float) -> float:
    """Infinite-volume integrated density of states of free 1-d hopping."""
    if energy <= -2.0:
        return 0.0
    if energy >= 2.0:
        return 1.0
    return math.acos(-energy / 2.0) / math.pi


def free_dos_1d(energy: float) -> float:
    """Infinite-volume level density of free 1-d hopping, |E| < 2."""
    return 1.0 / (math.pi * math.sqrt(4.0 - energy * energy))


def poisson_pmf(mu: float, k: int) -> float:
    return math.exp(-mu) * mu**k / math.factorial(k)


def poisson_joint_pmf(widths, counts) -> float:
    """Product of Poisson masses for independent counts on disjoint sets."""
    p = 1.0
    for mu, k in zip(widths, counts):
        p *= poisson_pmf(mu, k)
    return p


def sample_poisson_counts(rng: np.random.Generator, mu: float, n: int) -> np.ndarray:
    """Counts of a rate-1 Poisson process on a window of length mu."""
    return rng.poisson(mu, size=n)


def factorial_moment_direct(samples, order: int) -> float:
    """Mean of n(n-1)...(n-order+1) by direct evaluation."""
    total = 0.0
    for n in samples:
        term = 1.0
        for j in range(order):
            term *= n - j
        total += term
    return total / len(samples)
