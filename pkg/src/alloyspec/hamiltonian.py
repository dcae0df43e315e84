"""Dense lattice Schrodinger operators: hopping plus diagonal disorder.

The kinetic part is hopping-only with zero diagonal: entry -1 between torus
nearest neighbors. Its spectrum on a box of side s in dimension d is
{-2 sum_j cos(2 pi k_j / s)}, inside [-2d, 2d]. Diagonal entries carry
coupling * potential. Sub-cube restrictions get periodic edges on the cube
itself. Neighbor links are accumulated, so degenerate sides (1 or 2 sites)
produce the correct doubled/self couplings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .disorder import CorrelatedPotential
from .lattice import Cube, PeriodicBox

_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    """Real symmetric matrix together with the grid it acts on."""

    grid: PeriodicBox | Cube
    matrix: np.ndarray
    coupling: float
    label: str = ""

    def __post_init__(self):
        n = self.grid.volume
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} != ({n}, {n})")

    @property
    def size(self) -> int:
        return self.grid.volume

    def site_index(self, site) -> int:
        if isinstance(site, (int, np.integer)):
            idx = int(site)
            if not 0 <= idx < self.size:
                raise ValueError(f"index {idx} out of range")
            return idx
        return self.grid.site_to_index(site)


def _hopping(side: int, d: int) -> np.ndarray:
    """Dense hopping matrix of the periodic grid with `side` sites per axis."""
    n = side**d
    a = np.zeros((n, n))
    idx = np.arange(n).reshape((side,) * d)
    flat = idx.ravel()
    for axis in range(d):
        for shift in (1, -1):
            nb = np.roll(idx, shift, axis=axis).ravel()
            np.add.at(a, (flat, nb), -1.0)
    return a


def assemble_on_grid(
    grid: PeriodicBox | Cube, site_values: np.ndarray, coupling: float, label: str = ""
) -> HamiltonianMatrix:
    """Hopping on the grid's own torus plus coupling * site_values diagonal."""
    side = grid.side
    values = np.asarray(site_values, dtype=np.float64)
    if values.shape != (grid.volume,):
        raise ValueError(f"site values shape {values.shape} != ({grid.volume},)")
    a = _hopping(side, grid.d)
    a[np.diag_indices_from(a)] += coupling * values
    return HamiltonianMatrix(grid=grid, matrix=a, coupling=coupling, label=label)


def assemble(potential: CorrelatedPotential, coupling: float, label: str = "") -> HamiltonianMatrix:
    """Operator on the potential's full box; the coupling must be positive."""
    if coupling <= 0.0:
        raise ValueError(f"coupling must be > 0, got {coupling}")
    return assemble_on_grid(potential.box, potential.values, coupling, label=label)


def free_hamiltonian(grid: PeriodicBox | Cube) -> HamiltonianMatrix:
    """Pure hopping operator (zero potential)."""
    return assemble_on_grid(grid, np.zeros(grid.volume), 0.0, label="free")


def cube_site_indices(box: PeriodicBox, cube: Cube) -> np.ndarray:
    """Parent linear indices of the cube's sites, in cube index order."""
    return np.array([box.site_to_index(s) for s in cube.sites()], dtype=np.int64)


def restrict(potential: CorrelatedPotential, cube: Cube, coupling: float) -> HamiltonianMatrix:
    """Operator on a sub-cube, periodic on the cube, same site potential.

    The cube must lie inside the potential's box (cubes never wrap the
    parent torus).
    """
    if coupling <= 0.0:
        raise ValueError(f"coupling must be > 0, got {coupling}")
    box = potential.box
    for c, lo in zip(cube.corner, (-box.half_side,) * box.d):
        if c < lo or c + cube.side - 1 > box.half_side:
            raise ValueError(f"cube {cube} not contained in box half-side {box.half_side}")
    values = potential.values[cube_site_indices(box, cube)]
    return assemble_on_grid(cube, values, coupling, label="restriction")


def rank_one_shift(h: HamiltonianMatrix, site, t: float) -> HamiltonianMatrix:
    """New operator with t added to one diagonal entry; input left untouched."""
    idx = h.site_index(site)
    m = h.matrix.copy()
    m[idx, idx] += t
    return HamiltonianMatrix(grid=h.grid, matrix=m, coupling=h.coupling, label=h.label)


def check_symmetric(matrix: np.ndarray) -> None:
    scale = np.abs(matrix).max() or 1.0
    gap = np.abs(matrix - matrix.T).max()
    if gap > _SYMMETRY_TOL * scale:
        raise ValueError(f"matrix is not symmetric: max asymmetry {gap:.3e}")


def write_triplets(h: HamiltonianMatrix, path) -> None:
    """Plain-text dump: header 'n <size>' then 'i j value' for the upper
    triangle nonzeros, for cross-checking with external tools."""
    m = h.matrix
    n = m.shape[0]
    lines = [f"n {n}"]
    iu, ju = np.nonzero(np.triu(m))
    for i, j in zip(iu, ju):
        lines.append(f"{i} {j} {float(m[i, j])!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_triplets(path) -> np.ndarray:
    """Rebuild the symmetric dense matrix written by write_triplets."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "n":
            raise ValueError(f"{path}: missing 'n <size>' header")
        n = int(header[1])
        m = np.zeros((n, n))
        for lineno, raw in enumerate(fh, start=2):
            line = raw.strip()
            if not line:
                continue
            i_s, j_s, v_s = line.split()
            i, j, v = int(i_s), int(j_s), float(v_s)
            m[i, j] = v
            m[j, i] = v
    return m
