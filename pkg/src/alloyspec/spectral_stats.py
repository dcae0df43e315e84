"""Spectral statistics: IDS, unfolding, counting, moments, localization.

Distances between lattice sites use the max-norm on the torus
throughout, matching the cube geometry in :mod:`alloyspec.lattice`.
Energy intervals are half-open ``(a, b]`` so that counts add exactly
over adjacent intervals.  Rescaled center coordinates divide by the
full box side, landing in (−1/2, 1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as _scipy_stats

from . import disorder as _disorder
from . import hamiltonian as _hamiltonian
from .eig import Spectrum, count_sorted, eigh
from .lattice import BoxDecomposition, Cube, PeriodicBox

__all__ = [
    "CountingStatistics",
    "DosEstimate",
    "FactorialMomentReport",
    "IdsCurve",
    "JointProcessReport",
    "LocalizationReport",
    "MatchReport",
    "UnfoldedPointProcess",
    "WegnerMinamiTable",
    "bernoulli_indicator",
    "counting_statistics",
    "dos_at",
    "energy_at_level",
    "estimate_ids",
    "factorial_moment",
    "factorial_moment_nested",
    "joint_process",
    "localization_report",
    "match_local_global",
    "poisson_joint_reference",
    "unfold",
]

_AMPLITUDE_FLOOR = 1e-14


# ---------------------------------------------------------------------------
# Integrated density of states and its derivative


@dataclass(frozen=True, eq=False)
class IdsCurve:
    """Empirical integrated density of states on an energy grid.

    ``values[i]`` is the trial-averaged fraction of eigenvalues at or
    below ``energies[i]`` (states per site, in [0, 1], nondecreasing).
    """

    energies: np.ndarray
    values: np.ndarray
    sample_count: int
    box_volume: int

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if e.ndim != 1 or e.shape != v.shape:
            raise ValueError("energy grid and values must be 1-d and aligned")
        if np.any(np.diff(e) <= 0):
            raise ValueError("energy grid must be strictly increasing")
        if np.any(np.diff(v) < -1e-12):
            raise ValueError("IDS values must be nondecreasing")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "values", v)

    def at(self, energy: float) -> float:
        """Linear interpolation; clamps outside the grid to {0, 1} limits."""
        return float(np.interp(energy, self.energies, self.values))


def estimate_ids(spectra: Sequence[Spectrum], grid: np.ndarray) -> IdsCurve:
    """Average the per-trial eigenvalue counting functions over ``grid``."""
    if len(spectra) == 0:
        raise ValueError("estimate_ids needs at least one spectrum")
    volumes = {s.eigenvalues.size for s in spectra}
    if len(volumes) != 1:
        raise ValueError(
            "spectra come from different box sizes: %s" % sorted(volumes)
        )
    volume = volumes.pop()
    if volume == 0:
        raise ValueError("spectra are empty")
    grid = np.asarray(grid, dtype=np.float64)
    total = np.zeros(grid.shape)
    for s in spectra:
        total += np.searchsorted(s.eigenvalues, grid, side="right")
    return IdsCurve(
        energies=grid,
        values=total / (len(spectra) * volume),
        sample_count=len(spectra),
        box_volume=volume,
    )


@dataclass(frozen=True)
class DosEstimate:
    """Central-difference estimate of the density of states.

    ``flagged_nonpositive`` marks estimates the Poisson analysis cannot
    use (it needs a positive density at the reference energy).
    """

    value: float
    reference_energy: float
    bandwidth: float
    ids_below: float
    ids_above: float
    flagged_nonpositive: bool

    def __float__(self) -> float:
        return self.value


def dos_at(ids: IdsCurve, energy: float, bandwidth: float) -> DosEstimate:
    """Differentiate the IDS at ``energy`` by a symmetric difference."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    lo = energy - bandwidth
    hi = energy + bandwidth
    if lo < ids.energies[0] or hi > ids.energies[-1]:
        raise ValueError(
            "window [%g, %g] leaves the IDS grid [%g, %g]"
            % (lo, hi, ids.energies[0], ids.energies[-1])
        )
    below = ids.at(lo)
    above = ids.at(hi)
    value = (above - below) / (2.0 * bandwidth)
    return DosEstimate(
        value=float(value),
        reference_energy=float(energy),
        bandwidth=float(bandwidth),
        ids_below=float(below),
        ids_above=float(above),
        flagged_nonpositive=bool(value <= 0.0),
    )


def energy_at_level(ids: IdsCurve, level: float) -> float:
    """Smallest grid-interpolated energy where the IDS reaches ``level``."""
    if not 0.0 <= level <= 1.0:
        raise ValueError("level must be in [0, 1]")
    return float(np.interp(level, ids.values, ids.energies))


# ---------------------------------------------------------------------------
# Unfolding and Poisson counting statistics


@dataclass(frozen=True, eq=False)
class UnfoldedPointProcess:
    """Dimensionless rescaled eigenvalues around one reference energy.

    ``points[i] = volume · density · (E_j − E₀)`` for the source
    eigenvalue index ``indices[i]``; only points with |ξ| ≤ window are
    kept.
    """

    reference_energy: float
    density: float
    volume: int
    window: float
    points: np.ndarray
    indices: np.ndarray

    @property
    def count(self) -> int:
        return int(self.points.size)


def unfold(
    spec: Spectrum, reference_energy: float, density: float, window: float
) -> UnfoldedPointProcess:
    """Affine map ξ = |Λ|·n₀·(E − E₀), keeping |ξ| ≤ window."""
    if density <= 0:
        raise ValueError("density must be positive")
    if window <= 0:
        raise ValueError("window must be positive")
    volume = spec.grid.volume if spec.grid is not None else spec.size
    xi = volume * density * (spec.eigenvalues - reference_energy)
    keep = np.abs(xi) <= window
    return UnfoldedPointProcess(
        reference_energy=float(reference_energy),
        density=float(density),
        volume=int(volume),
        window=float(window),
        points=xi[keep],
        indices=np.nonzero(keep)[0],
    )


def _validate_disjoint(intervals: Sequence[Tuple[float, float]]) -> None:
    ordered = sorted(intervals)
    for (a, b), (c, d) in zip(ordered, ordered[1:]):
        if a > b or c > d:
            raise ValueError("interval with lo > hi")
        if c < b:
            raise ValueError(
                "intervals (%g, %g] and (%g, %g] overlap" % (a, b, c, d)
            )


def poisson_joint_reference(
    intervals: Sequence[Tuple[float, float]], counts: Sequence[int]
) -> float:
    """Product of Poisson probabilities Π |I|^k e^{−|I|} / k! (unit intensity)."""
    ref = 1.0
    for (a, b), k in zip(intervals, counts):
        length = b - a
        ref *= length**k * math.exp(-length) / math.factorial(k)
    return ref


@dataclass(frozen=True)
class CountingStatistics:
    """Empirical joint counting probability against the Poisson product."""

    intervals: Tuple[Tuple[float, float], ...]
    counts: Tuple[int, ...]
    empirical: float
    reference: float
    stderr: float
    half_width: float
    trials: int


def counting_statistics(
    processes: Sequence[UnfoldedPointProcess],
    intervals: Sequence[Tuple[float, float]],
    counts: Sequence[int],
    sigmas: float = 3.0,
) -> CountingStatistics:
    """Frequency of the joint event {#(ξ ∈ I_l) = k_l for every l}.

    The reference is the unit-intensity Poisson product; the half-width
    is ``sigmas`` binomial standard errors of the empirical frequency.
    """
    if len(intervals) != len(counts) or not intervals:
        raise ValueError("need equally many intervals and counts (at least one)")
    if len(processes) == 0:
        raise ValueError("need at least one point process")
    _validate_disjoint(intervals)
    hits = 0
    for proc in processes:
        pts = np.sort(proc.points)
        ok = True
        for (a, b), k in zip(intervals, counts):
            if int(count_sorted(pts, a, b)) != int(k):
                ok = False
                break
        hits += ok
    n = len(processes)
    p = hits / n
    stderr = math.sqrt(max(p * (1.0 - p), 1e-12) / n)
    return CountingStatistics(
        intervals=tuple((float(a), float(b)) for a, b in intervals),
        counts=tuple(int(k) for k in counts),
        empirical=float(p),
        reference=float(poisson_joint_reference(intervals, counts)),
        stderr=float(stderr),
        half_width=float(sigmas * stderr),
        trials=n,
    )


# ---------------------------------------------------------------------------
# Factorial moments (eigenvalue-counting bounds)


@dataclass(frozen=True)
class FactorialMomentReport:
    """Empirical falling-factorial moment of interval counts.

    ``ratio`` divides the moment by (concentration·volume)^k — the
    natural scale of the counting bounds; ``bound_scale`` records the
    denominator.  ``half_width`` is three standard errors of the mean.
    """

    intervals: Tuple[Tuple[float, float], ...]
    order: int
    moment: float
    half_width: float
    trials: int
    concentration: Optional[float] = None
    volume: Optional[int] = None
    bound_scale: Optional[float] = None
    ratio: Optional[float] = None


def _falling_product(samples: np.ndarray) -> np.ndarray:
    """Per-trial product N(I₁)·(N(I₂)−1)⋯(N(I_k)−(k−1)) over columns."""
    prod = np.ones(samples.shape[0])
    for j in range(samples.shape[1]):
        prod *= samples[:, j] - j
    return prod


def factorial_moment(count_samples: Sequence[int], order: int) -> FactorialMomentReport:
    """Mean of N(N−1)⋯(N−k+1) over trials for one interval's counts."""
    if order < 1:
        raise ValueError("order must be >= 1")
    arr = np.asarray(count_samples, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("count_samples must be a nonempty 1-d sequence")
    tiled = np.tile(arr[:, None], (1, order))
    per_trial = _falling_product(tiled)
    mean = float(per_trial.mean())
    sem = float(per_trial.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return FactorialMomentReport(
        intervals=(),
        order=order,
        moment=mean,
        half_width=3.0 * sem,
        trials=int(arr.size),
    )


def factorial_moment_nested(count_vectors: np.ndarray) -> FactorialMomentReport:
    """Nested-interval form: rows are trials, column j counts I_{j+1} ⊇ I_j.

    Computes the mean of N(I₁)·(N(I₂)−1)⋯(N(I_k)−(k−1)); the nesting
    I₁ ⊂ I₂ ⊂ ⋯ ⊂ I_k must hold for the inputs to mean anything, so
    nondecreasing rows are enforced.
    """
    arr = np.asarray(count_vectors, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError("count_vectors must be a nonempty 2-d array")
    if np.any(np.diff(arr, axis=1) < 0):
        raise ValueError("rows must be nondecreasing (nested intervals)")
    per_trial = _falling_product(arr)
    mean = float(per_trial.mean())
    sem = (
        float(per_trial.std(ddof=1) / math.sqrt(arr.shape[0]))
        if arr.shape[0] > 1
        else 0.0
    )
    return FactorialMomentReport(
        intervals=(),
        order=arr.shape[1],
        moment=mean,
        half_width=3.0 * sem,
        trials=int(arr.shape[0]),
    )


@dataclass(frozen=True, eq=False)
class WegnerMinamiTable:
    """Moment/ratio table over an interval ladder and factorial orders."""

    rows: Tuple[FactorialMomentReport, ...]
    box_volume: int
    coupling: float
    trials: int

    def max_ratio(self, order: int) -> float:
        vals = [r.ratio for r in self.rows if r.order == order and r.ratio is not None]
        if not vals:
            raise ValueError("no rows of order %d" % order)
        return max(vals)

    def min_ratio(self, order: int) -> float:
        vals = [r.ratio for r in self.rows if r.order == order and r.ratio is not None]
        if not vals:
            raise ValueError("no rows of order %d" % order)
        return min(vals)


def wegner_minami_report(
    trials: int,
    box: PeriodicBox,
    intervals: Sequence[Tuple[float, float]],
    k_max: int,
    law: _disorder.DisorderLaw,
    coupling: float,
    profile: Optional[_disorder.SingleSitePotential] = None,
    seed: int = 0,
    backend: str = "auto",
    mapper: Optional[Callable] = None,
) -> WegnerMinamiTable:
    """Monte Carlo table of count moments against the concentration scale.

    For every interval I in the ladder and k ≤ k_max: the empirical
    k-th falling factorial moment of tr P(I), scaled by
    (S(|I|)·|Λ|)^k where S is the base law's concentration function.
    The coupling dependence stays inside the measured moment (stronger
    coupling spreads levels and shrinks the ratio), so on a single site
    the k=1 ratio is exactly min(|I|/λ, 1)/min(|I|, 1).

    ``mapper`` replaces the builtin ``map`` over trial indices; it must
    preserve order, so a thread pool works but results stay
    trial-indexed.
    """
    if trials < 1 or k_max < 1:
        raise ValueError("trials and k_max must be >= 1")
    if profile is None:
        profile = _disorder.SingleSitePotential.delta(box.d)
    source = _disorder.enlarged_box(box, profile)
    from .rng import trial_rng  # local import: avoids cycle at package init

    def one_trial(t: int) -> np.ndarray:
        rng = trial_rng(seed, t)
        raw = _disorder.DisorderRealization(
            box=source,
            values=law.sample(rng, source.volume),
            seed=seed,
            trial_index=t,
        )
        pot = _disorder.correlate(raw, profile, box)
        h = _hamiltonian.assemble(pot, coupling)
        w = eigh(h, backend=backend, vectors=False).eigenvalues
        return np.array([count_sorted(w, a, b) for a, b in intervals], dtype=np.int64)

    run = map if mapper is None else mapper
    counts = np.stack(list(run(one_trial, range(trials))))
    rows: List[FactorialMomentReport] = []
    for i, (a, b) in enumerate(intervals):
        width = b - a
        conc = law.concentration(width)
        for k in range(1, k_max + 1):
            base = factorial_moment(counts[:, i], k)
            scale = (conc * box.volume) ** k
            rows.append(
                FactorialMomentReport(
                    intervals=((float(a), float(b)),),
                    order=k,
                    moment=base.moment,
                    half_width=base.half_width,
                    trials=trials,
                    concentration=float(conc),
                    volume=box.volume,
                    bound_scale=float(scale),
                    ratio=float(base.moment / scale) if scale > 0 else math.inf,
                )
            )
    return WegnerMinamiTable(
        rows=tuple(rows), box_volume=box.volume, coupling=coupling, trials=trials
    )


# ---------------------------------------------------------------------------
# Localization reports


@dataclass(frozen=True, eq=False)
class LocalizationReport:
    """Exponential-decay diagnostics for one eigenvector.

    The center is the amplitude argmax (lowest linear index on ties);
    the decay rate comes from least squares on log|φ| against torus
    max-norm distance from the center, over sites above the amplitude
    floor.  ``near_max_diameter`` is the max pairwise distance among
    sites within a factor 2 of the peak amplitude — a constructive
    stand-in for the non-unique-center diagnostic.
    """

    eigenvalue: float
    center: Tuple[int, ...]
    eta_hat: float
    q_hat: float
    outside_mass: Dict[int, float]
    near_max_diameter: int
    fit_site_count: int


def _single_localization(
    box: PeriodicBox,
    eigenvalue: float,
    vector: np.ndarray,
    radii: Sequence[int],
    floor: float,
) -> LocalizationReport:
    amp = np.abs(vector)
    center_idx = int(np.argmax(amp))
    center = box.index_to_site(center_idx)
    dists = box.torus_distances_from(center)
    mask = amp > floor
    x = dists[mask]
    y = np.log(amp[mask])
    if x.size >= 2 and float(x.max()) > float(x.min()):
        slope, intercept = np.polyfit(x, y, 1)
    else:
        slope, intercept = 0.0, float(y.max(initial=0.0))
    mass = amp * amp
    outside = {int(r): float(mass[dists > r].sum()) for r in radii}
    near = np.nonzero(amp >= 0.5 * amp[center_idx])[0]
    diameter = 0
    if near.size > 1:
        coords = box.coordinate_array()[near]
        diff = np.abs(coords[:, None, :] - coords[None, :, :])
        wrapped = np.minimum(diff, box.side - diff)
        diameter = int(wrapped.max(axis=2).max())
    return LocalizationReport(
        eigenvalue=float(eigenvalue),
        center=center,
        eta_hat=float(-slope),
        q_hat=float(intercept),
        outside_mass=outside,
        near_max_diameter=diameter,
        fit_site_count=int(x.size),
    )


def localization_report(
    spec: Spectrum,
    box: PeriodicBox,
    indices: Optional[Sequence[int]] = None,
    radii: Sequence[int] = (5, 10, 20, 40),
    floor: float = _AMPLITUDE_FLOOR,
) -> List[LocalizationReport]:
    """Per-eigenvector localization diagnostics (all vectors by default)."""
    if spec.eigenvectors is None:
        raise ValueError("localization_report needs eigenvectors")
    if spec.eigenvalues.size != box.volume:
        raise ValueError(
            "spectrum size %d does not match box volume %d"
            % (spec.eigenvalues.size, box.volume)
        )
    if indices is None:
        indices = range(spec.size)
    return [
        _single_localization(
            box, spec.eigenvalues[j], spec.eigenvectors[:, j], radii, floor
        )
        for j in indices
    ]


def eigenvector_centers(spec: Spectrum, box: PeriodicBox) -> np.ndarray:
    """Amplitude-argmax site per eigenvector, shape (n, d)."""
    if spec.eigenvectors is None:
        raise ValueError("eigenvector_centers needs eigenvectors")
    idx = np.argmax(np.abs(spec.eigenvectors), axis=0)
    return box.coordinate_array()[idx]


# ---------------------------------------------------------------------------
# Local indicator variables and local/global matching


def bernoulli_indicator(
    local: Spectrum,
    interval: Tuple[float, float],
    margin: float,
    require: str = "exactly_one",
) -> int:
    """0/1 localized-level indicator on one cube.

    ``exactly_one``: 1 iff the cube spectrum has exactly one eigenvalue
    in the interval and its eigenvector's center lies in the cube's
    center region for the given margin.  ``at_least_one``: 1 iff any
    eigenvalue in the interval has its center there (the one-sided form
    the truncation comparison uses).
    """
    if require not in ("exactly_one", "at_least_one"):
        raise ValueError("require must be 'exactly_one' or 'at_least_one'")
    if local.eigenvectors is None:
        raise ValueError("bernoulli_indicator needs eigenvectors")
    cube = local.grid
    if not isinstance(cube, Cube):
        raise ValueError("local spectrum must come from a cube restriction")
    a, b = interval
    w = local.eigenvalues
    hits = np.nonzero((w > a) & (w <= b))[0]
    if require == "exactly_one" and hits.size != 1:
        return 0
    if hits.size == 0:
        return 0
    for j in hits:
        amp = np.abs(local.eigenvectors[:, j])
        center = cube.index_to_site(int(np.argmax(amp)))
        if cube.in_center_region(center, margin):
            return 1
    return 0


@dataclass(frozen=True, eq=False)
class MatchReport:
    """Outcome of matching global eigenvalues to per-cube eigenvalues.

    ``z_ok`` is True when all three clauses hold: (i) each cube has at
    most one local eigenvalue in the window, (ii) each global
    eigenvalue in the window has its center in some cube's center
    region, (iii) the greedy gap matching is complete with every gap at
    most the threshold.  ``violations`` lists every failure, labeled by
    clause.
    """

    z_ok: bool
    interval: Tuple[float, float]
    threshold: float
    per_box_counts: np.ndarray
    matched_pairs: Tuple[Tuple[float, float, float], ...]
    center_clearances: Tuple[int, ...]
    violations: Tuple[str, ...]


def match_local_global(
    global_spec: Spectrum,
    global_centers: np.ndarray,
    local_specs: Sequence[Spectrum],
    decomp: BoxDecomposition,
    interval: Tuple[float, float],
    eta: float,
) -> MatchReport:
    """Match window eigenvalues of the box operator to cube eigenvalues.

    ``global_centers`` holds one center site per global eigenvector (in
    eigenvalue order).  ``local_specs`` must align with
    ``decomp.cubes()``.  The gap threshold is e^{−η·gap/2} with the
    decomposition's inter-cube gap.
    """
    cubes = list(decomp.cubes())
    if len(local_specs) != len(cubes):
        raise ValueError(
            "got %d local spectra for %d cubes" % (len(local_specs), len(cubes))
        )
    for spec, cube in zip(local_specs, cubes):
        if spec.grid != cube:
            raise ValueError("local spectrum grid does not match its cube")
    a, b = interval
    threshold = math.exp(-eta * decomp.gap / 2.0)
    violations: List[str] = []

    per_box = np.array(
        [int(count_sorted(s.eigenvalues, a, b)) for s in local_specs], dtype=np.int64
    )
    for i, c in enumerate(per_box):
        if c > 1:
            violations.append(
                "(i) cube %d holds %d eigenvalues in the window" % (i, int(c))
            )

    w = global_spec.eigenvalues
    g_idx = np.nonzero((w > a) & (w <= b))[0]
    clearances: List[int] = []
    for j in g_idx:
        center = tuple(int(t) for t in np.asarray(global_centers[j]))
        placed = False
        for cube in cubes:
            if cube.contains(center):
                clearances.append(cube.clearance(center))
                if cube.in_center_region(center, decomp.gap):
                    placed = True
                break
        else:
            clearances.append(0)
        if not placed:
            violations.append(
                "(ii) eigenvalue %.6g has center %s outside every cube core"
                % (w[j], center)
            )

    local_entries = [
        (box_i, float(e))
        for box_i, s in enumerate(local_specs)
        for e in s.eigenvalues[(s.eigenvalues > a) & (s.eigenvalues <= b)]
    ]
    globals_left = {int(j): float(w[j]) for j in g_idx}
    locals_left = dict(enumerate(local_entries))
    candidates = sorted(
        (
            (abs(ge - le[1]), gj, li)
            for gj, ge in globals_left.items()
            for li, le in locals_left.items()
        ),
        key=lambda t: (t[0], t[1], t[2]),
    )
    pairs: List[Tuple[float, float, float]] = []
    for gap, gj, li in candidates:
        if gj in globals_left and li in locals_left:
            pairs.append((globals_left.pop(gj), locals_left.pop(li)[1], gap))
            if gap > threshold:
                violations.append(
                    "(iii) matched gap %.3e exceeds threshold %.3e" % (gap, threshold)
                )
    for ge in globals_left.values():
        violations.append("(iii) global eigenvalue %.6g left unmatched" % ge)
    for _, le in locals_left.values():
        violations.append("(iii) local eigenvalue %.6g left unmatched" % le)

    return MatchReport(
        z_ok=not violations,
        interval=(float(a), float(b)),
        threshold=float(threshold),
        per_box_counts=per_box,
        matched_pairs=tuple(pairs),
        center_clearances=tuple(clearances),
        violations=tuple(violations),
    )


# ---------------------------------------------------------------------------
# Joint eigenvalue–center process


@dataclass(frozen=True, eq=False)
class JointProcessReport:
    """Rescaled (energy, center) pairs with uniformity/independence stats.

    ``pairs`` has rows (ξ, x₁/side, …, x_d/side).  The chi-square tests
    uniformity of centers over a regular spatial partition; the rank
    correlations test independence of ξ from each center coordinate,
    with |ρ| ≲ null_band expected under the product law.
    """

    pairs: np.ndarray
    cells_per_axis: int
    chi2_statistic: float
    chi2_pvalue: float
    rank_correlations: Tuple[float, ...]
    null_band: float


def joint_process(
    processes: Sequence[UnfoldedPointProcess],
    centers_per_process: Sequence[np.ndarray],
    box: PeriodicBox,
    cells_per_axis: Optional[int] = None,
) -> JointProcessReport:
    """Pool (ξ, center/side) pairs across trials and test the product law.

    The chi-square null accounts for the lattice: cell probabilities are
    the exact fractions of lattice sites per cell, not the continuum
    cell volume, since a box side rarely divides evenly into cells.
    """
    if len(processes) != len(centers_per_process):
        raise ValueError("need one center array per process")
    rows = []
    sites = []
    for proc, centers in zip(processes, centers_per_process):
        centers = np.asarray(centers)
        if centers.ndim != 2 or centers.shape[1] != box.d:
            raise ValueError("centers must have shape (n_eigenvectors, d)")
        for xi, j in zip(proc.points, proc.indices):
            site = centers[int(j)]
            sites.append([int(t) for t in site])
            rows.append([float(xi)] + [t / box.side for t in site])
    pairs = np.asarray(rows, dtype=np.float64).reshape(-1, 1 + box.d)
    site_arr = np.asarray(sites, dtype=np.int64).reshape(-1, box.d)
    n = pairs.shape[0]
    if n == 0:
        return JointProcessReport(
            pairs=pairs,
            cells_per_axis=0,
            chi2_statistic=math.nan,
            chi2_pvalue=math.nan,
            rank_correlations=(math.nan,) * box.d,
            null_band=math.inf,
        )
    if cells_per_axis is None:
        cells_per_axis = max(2, min(int((n / 5.0) ** (1.0 / box.d)), box.side // 3))
    m = int(cells_per_axis)
    side = box.side
    # per-axis bin of every lattice coordinate, and the exact site count per bin
    axis_bins = (np.arange(side, dtype=np.int64) * m) // side
    axis_counts = np.bincount(axis_bins, minlength=m).astype(np.float64)
    cell_idx = np.zeros(n, dtype=np.int64)
    for axis in range(box.d):
        shifted = site_arr[:, axis] + box.half_side
        if np.any(shifted < 0) or np.any(shifted >= side):
            raise ValueError("center site outside the box")
        cell_idx = cell_idx * m + axis_bins[shifted]
    observed = np.bincount(cell_idx, minlength=m**box.d).astype(np.float64)
    probs = axis_counts / side
    for _ in range(box.d - 1):
        probs = np.multiply.outer(probs, axis_counts / side).ravel()
    expected = n * probs
    live = expected > 0
    chi2_stat = float(((observed[live] - expected[live]) ** 2 / expected[live]).sum())
    dof = int(live.sum()) - 1
    pvalue = float(_scipy_stats.chi2.sf(chi2_stat, dof)) if dof > 0 else math.nan
    correlations = []
    coords = pairs[:, 1:]
    for axis in range(box.d):
        if n >= 3 and np.ptp(pairs[:, 0]) > 0 and np.ptp(coords[:, axis]) > 0:
            rho = _scipy_stats.spearmanr(pairs[:, 0], coords[:, axis]).statistic
        else:
            rho = math.nan
        correlations.append(float(rho))
    return JointProcessReport(
        pairs=pairs,
        cells_per_axis=m,
        chi2_statistic=chi2_stat,
        chi2_pvalue=pvalue,
        rank_correlations=tuple(correlations),
        null_band=3.0 / math.sqrt(n),
    )
