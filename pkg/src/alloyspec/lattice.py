"""Periodic lattice boxes, torus geometry, and grid decompositions into cubes.

Geometry conventions used throughout the package:

* A box of half-side L in dimension d is the site set [-L, L]^d with
  periodic boundary conditions; it has (2L+1)^d sites.
* Distances are measured in the max-norm with per-axis wraparound.
* Sites are stored row-major: the linear index of a site x is obtained from
  the shifted coordinates x + L.
* A decomposition cube of side l anchored at corner g covers the sites
  g + {0, ..., l-1}^d in parent coordinates (no wraparound inside a cube).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

Site = tuple[int, ...]


class DegenerateDecompositionError(ValueError):
    """The box is too small to hold a single cube at the requested scales."""


def _as_site(x, d: int) -> Site:
    if isinstance(x, (int, np.integer)):
        x = (int(x),)
    site = tuple(int(c) for c in x)
    if len(site) != d:
        raise ValueError(f"site {site} has dimension {len(site)}, expected {d}")
    return site


@dataclass(frozen=True)
class PeriodicBox:
    """Centered cube [-L, L]^d on the integer lattice with periodic edges."""

    d: int
    half_side: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.half_side < 0:
            raise ValueError(f"half-side must be >= 0, got {self.half_side}")

    @property
    def side(self) -> int:
        return 2 * self.half_side + 1

    @property
    def volume(self) -> int:
        return self.side**self.d

    def contains(self, site) -> bool:
        site = _as_site(site, self.d)
        return all(-self.half_side <= c <= self.half_side for c in site)

    def site_to_index(self, site) -> int:
        site = _as_site(site, self.d)
        if not self.contains(site):
            raise ValueError(f"site {site} outside box of half-side {self.half_side}")
        idx = 0
        for c in site:
            idx = idx * self.side + (c + self.half_side)
        return idx

    def index_to_site(self, idx: int) -> Site:
        if not 0 <= idx < self.volume:
            raise ValueError(f"index {idx} out of range for volume {self.volume}")
        coords = []
        for _ in range(self.d):
            coords.append(idx % self.side - self.half_side)
            idx //= self.side
        return tuple(reversed(coords))

    def coordinate_array(self) -> np.ndarray:
        """All site coordinates, shape (volume, d), in linear-index order."""
        axes = [np.arange(-self.half_side, self.half_side + 1)] * self.d
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def torus_distance(self, x, y) -> int:
        x = _as_site(x, self.d)
        y = _as_site(y, self.d)
        dist = 0
        for a, b in zip(x, y):
            delta = abs(a - b) % self.side
            dist = max(dist, min(delta, self.side - delta))
        return dist

    def torus_distances_from(self, site) -> np.ndarray:
        """Wrap distance from one site to every site, shape (volume,)."""
        site = _as_site(site, self.d)
        coords = self.coordinate_array()
        delta = np.abs(coords - np.asarray(site)) % self.side
        return np.minimum(delta, self.side - delta).max(axis=1)


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube of `side` sites per axis anchored at `corner`.

    Coordinates are those of the parent box; a cube never wraps around the
    parent. Restricted operators built on a cube use periodic boundary
    conditions on the cube itself.
    """

    corner: Site
    side: int

    def __post_init__(self):
        if self.side < 1:
            raise ValueError(f"cube side must be >= 1, got {self.side}")

    @property
    def d(self) -> int:
        return len(self.corner)

    @property
    def volume(self) -> int:
        return self.side**self.d

    def contains(self, site) -> bool:
        site = _as_site(site, self.d)
        return all(0 <= s - c < self.side for s, c in zip(site, self.corner))

    def relative(self, site) -> Site:
        site = _as_site(site, self.d)
        if not self.contains(site):
            raise ValueError(f"site {site} not in cube {self}")
        return tuple(s - c for s, c in zip(site, self.corner))

    def absolute(self, rel) -> Site:
        rel = _as_site(rel, self.d)
        return tuple(c + r for c, r in zip(self.corner, rel))

    def site_to_index(self, site) -> int:
        rel = self.relative(site)
        idx = 0
        for r in rel:
            idx = idx * self.side + r
        return idx

    def index_to_site(self, idx: int) -> Site:
        if not 0 <= idx < self.volume:
            raise ValueError(f"index {idx} out of range for volume {self.volume}")
        rel = []
        for _ in range(self.d):
            rel.append(idx % self.side)
            idx //= self.side
        return self.absolute(tuple(reversed(rel)))

    def sites(self):
        ranges = [range(c, c + self.side) for c in self.corner]
        return itertools.product(*ranges)

    def clearance(self, site) -> int:
        """Distance from a cube site to the nearest site outside the cube."""
        rel = self.relative(site)
        return min(min(r, self.side - 1 - r) for r in rel) + 1

    def in_center_region(self, site, margin: float) -> bool:
        """True when the site keeps clearance >= margin/2 to every face.

        The qualifying sites form the concentric subcube with roughly
        side - margin sites per axis; margin may be fractional.
        """
        rel = self.relative(site)
        half = margin / 2.0
        return all(r >= half and (self.side - 1 - r) >= half for r in rel)


def alpha_threshold(d: int, rho_tilde: float) -> float:
    """Smallest admissible spectral-window exponent for given d and rho."""
    return (1.0 + rho_tilde) * (d + 1) / (d + 2)


def admissible_params(
    d: int, rho_tilde: float, alpha: float, beta: float, beta_prime: float
) -> tuple[bool, list[str]]:
    """Check the exponent constraints for the cube decomposition scheme.

    Returns (ok, violations); each violated constraint yields one
    human-readable entry.
    """
    violations: list[str] = []
    if not 0.0 <= rho_tilde < 1.0 / (1.0 + d):
        violations.append(
            f"rho_tilde={rho_tilde} outside [0, 1/(1+d)) = [0, {1.0 / (1.0 + d):.6g})"
        )
    lo = alpha_threshold(d, rho_tilde)
    if not lo < alpha < 1.0:
        violations.append(f"alpha={alpha} outside ({lo:.6g}, 1)")
    if not 0.0 < beta_prime < beta < 1.0:
        violations.append(
            f"need 0 < beta_prime < beta < 1, got beta_prime={beta_prime}, beta={beta}"
        )
    if not 1.0 + beta < 2.0 * alpha / (1.0 + rho_tilde):
        violations.append(
            f"1+beta={1.0 + beta} not below 2*alpha/(1+rho_tilde)"
            f"={2.0 * alpha / (1.0 + rho_tilde):.6g}"
        )
    return (not violations, violations)


@dataclass(frozen=True)
class DecompositionParams:
    """Exponents steering the cube decomposition scales."""

    rho_tilde: float
    alpha: float
    beta: float
    beta_prime: float

    def check(self, d: int) -> tuple[bool, list[str]]:
        return admissible_params(d, self.rho_tilde, self.alpha, self.beta, self.beta_prime)

    def scales(self, half_side: int) -> tuple[int, int]:
        """Cube side and gap derived from the box half-side: floor powers."""
        cube_side = max(1, math.floor(float(half_side) ** self.beta))
        gap = max(1, math.floor(float(half_side) ** self.beta_prime))
        return cube_side, gap


@dataclass(frozen=True)
class BoxDecomposition:
    """Regular grid of disjoint cubes inside a periodic box.

    Cubes are placed with pitch cube_side + gap per axis starting at corner
    -L + gap, the maximal regular layout. Consecutive cubes are separated by
    `gap` sites; the cyclic wraparound gap is side - per_axis*pitch + gap,
    which is always >= gap.
    """

    box: PeriodicBox
    cube_side: int
    gap: int
    corners: tuple[Site, ...]
    per_axis: int

    @property
    def count(self) -> int:
        return len(self.corners)

    def cubes(self) -> list[Cube]:
        return [Cube(c, self.cube_side) for c in self.corners]

    @property
    def covered_volume(self) -> int:
        return self.count * self.cube_side**self.box.d

    @property
    def uncovered_volume(self) -> int:
        return self.box.volume - self.covered_volume

    @property
    def leftover_constant(self) -> float:
        """Measured C in: uncovered volume <= C * volume * gap / cube_side."""
        budget = self.box.volume * self.gap / self.cube_side
        return self.uncovered_volume / budget

    @property
    def wrap_gap(self) -> int:
        """Cyclic separation (in sites) between the last and first cube per axis."""
        pitch = self.cube_side + self.gap
        return self.box.side - self.per_axis * pitch + self.gap


def decompose(box: PeriodicBox, cube_side: int, gap: int) -> BoxDecomposition:
    """Place the maximal regular grid of side-`cube_side` cubes in `box`.

    Raises DegenerateDecompositionError when not even one cube fits with its
    separation gap (pitch exceeds the box side).
    """
    if cube_side < 1 or gap < 1:
        raise ValueError(f"cube_side and gap must be >= 1, got {cube_side}, {gap}")
    pitch = cube_side + gap
    per_axis = box.side // pitch
    if per_axis < 1:
        raise DegenerateDecompositionError(
            f"box side {box.side} cannot hold a cube of side {cube_side} "
            f"with gap {gap} (pitch {pitch})"
        )
    start = -box.half_side + gap
    axis_positions = [start + k * pitch for k in range(per_axis)]
    corners = tuple(itertools.product(*([axis_positions] * box.d)))
    return BoxDecomposition(
        box=box, cube_side=cube_side, gap=gap, corners=corners, per_axis=per_axis
    )
