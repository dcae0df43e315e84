"""Single-site profiles, disorder laws, and correlated potential fields.

The random potential is built in two steps: i.i.d. site variables are drawn
from a bounded law on an enlarged box, then convolved with a summable
single-site profile. Sampling on the enlarged box makes the convolution an
exact finite sum (no periodization of the profile is ever needed).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lattice import PeriodicBox
from .rng import trial_rng

Offset = tuple[int, ...]

# target relative l1 tail when auto-sizing the stored support
_AUTO_TAIL = 1e-10
_AUTO_RADIUS_CAP = 200_000


def _max_norm(offset: Offset) -> int:
    return max(abs(c) for c in offset)


class SingleSitePotential:
    """Finitely stored real convolution profile with optional decay tag.

    Parameters
    ----------
    d : lattice dimension of the offsets.
    coefficients : mapping offset -> value; zeros are dropped.
    decay_exponent : polynomial decay rate p in |u(n)| <= c|n|^-p, or None
        for a compactly supported profile (everything outside the stored
        radius is exactly zero).
    """

    def __init__(self, d: int, coefficients: dict, decay_exponent: float | None = None):
        if d < 1:
            raise ValueError(f"dimension must be >= 1, got {d}")
        cleaned: dict[Offset, float] = {}
        for off, val in coefficients.items():
            if isinstance(off, (int, np.integer)):
                off = (int(off),)
            off = tuple(int(c) for c in off)
            if len(off) != d:
                raise ValueError(f"offset {off} has dimension {len(off)}, expected {d}")
            val = float(val)
            if not math.isfinite(val):
                raise ValueError(f"coefficient at {off} is not finite")
            if val != 0.0:
                cleaned[off] = val
        if not cleaned:
            raise ValueError("potential has no nonzero coefficient")
        self.d = d
        self.coefficients = cleaned
        self.decay_exponent = None if decay_exponent is None else float(decay_exponent)
        offs = sorted(cleaned)
        self.offsets = np.array(offs, dtype=np.int64).reshape(len(offs), d)
        self.values = np.array([cleaned[o] for o in offs], dtype=np.float64)

    # -- basic queries ----------------------------------------------------

    @property
    def radius(self) -> int:
        return int(np.abs(self.offsets).max())

    @property
    def is_compact(self) -> bool:
        return self.decay_exponent is None

    def coefficient(self, offset) -> float:
        if isinstance(offset, (int, np.integer)):
            offset = (int(offset),)
        return self.coefficients.get(tuple(int(c) for c in offset), 0.0)

    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum())

    def linf_norm(self) -> float:
        return float(np.abs(self.values).max())

    def decay_prefactor(self) -> float | None:
        """Smallest c with |u(n)| <= c|n|^-p over the stored support."""
        if self.decay_exponent is None:
            return None
        norms = np.abs(self.offsets).max(axis=1)
        mask = norms >= 1
        if not mask.any():
            return 0.0
        return float(
            (np.abs(self.values[mask]) * norms[mask] ** self.decay_exponent).max()
        )

    def stored_l1_tail(self, cutoff: int) -> float:
        norms = np.abs(self.offsets).max(axis=1)
        return float(np.abs(self.values[norms >= cutoff]).sum())

    def stored_l2_tail(self, cutoff: int) -> float:
        norms = np.abs(self.offsets).max(axis=1)
        return float((self.values[norms >= cutoff] ** 2).sum())

    def fitted_tail(self, beyond: int, power: float = 1.0) -> float:
        """Decay-fit bound on sum_{|n| > beyond} |u(n)|^power (0 if compact).

        Uses the integral comparison
        sum_{r > R} shell(r) r^-q <= 2d 3^(d-1) R^(d-q) / (q - d), q > d.
        """
        if self.is_compact:
            return 0.0
        c = self.decay_prefactor()
        q = self.decay_exponent * power
        if q <= self.d:
            return math.inf
        geom = 2.0 * self.d * 3.0 ** (self.d - 1)
        return (c**power) * geom * float(beyond) ** (self.d - q) / (q - self.d)

    def l1_tail(self, cutoff: int) -> float:
        beyond = max(self.radius, cutoff - 1)
        return self.stored_l1_tail(cutoff) + self.fitted_tail(beyond, power=1.0)

    def l2_tail(self, cutoff: int) -> float:
        beyond = max(self.radius, cutoff - 1)
        return self.stored_l2_tail(cutoff) + self.fitted_tail(beyond, power=2.0)

    def __repr__(self):
        tag = "compact" if self.is_compact else f"decay={self.decay_exponent}"
        return (
            f"SingleSitePotential(d={self.d}, terms={len(self.values)}, "
            f"radius={self.radius}, {tag})"
        )

    # -- constructors ------------------------------------------------------

    @classmethod
    def delta(cls, d: int = 1) -> "SingleSitePotential":
        return cls(d, {(0,) * d: 1.0})

    @classmethod
    def geometric(cls, ratio: float, d: int = 1, radius: int | None = None):
        """u(n) = ratio^|n| in one dimension.

        Decays faster than any polynomial, so it is stored as compact: the
        auto-sized radius pushes the exact l1 tail below 1e-10 of the norm.
        """
        if d != 1:
            raise NotImplementedError("geometric profile implemented for d=1")
        if not 0.0 < ratio < 1.0:
            raise ValueError(f"ratio must be in (0,1), got {ratio}")
        if radius is None:
            # exact d=1 tail: 2 ratio^(R+1) / (1-ratio)
            l1 = (1.0 + ratio) / (1.0 - ratio)
            radius = 1
            while 2.0 * ratio ** (radius + 1) / (1.0 - ratio) >= _AUTO_TAIL * l1:
                radius += 1
        coeffs = {(n,): ratio ** abs(n) for n in range(-radius, radius + 1)}
        return cls(1, coeffs)

    @classmethod
    def polynomial(cls, exponent: float, radius: int | None = None, d: int = 1):
        """u(n) = (1 + |n|)^-exponent with max-norm |n|, stored to `radius`."""
        if exponent <= d:
            raise ValueError(f"exponent must exceed d={d} for summability")
        if radius is None:
            if d != 1:
                raise ValueError("auto radius for polynomial decay needs d=1")
            radius = 1
            l1 = 3.0  # running lower bound, refined in the loop
            while True:
                tail = 2.0 * (radius + 1.5) ** (1.0 - exponent) / (exponent - 1.0)
                l1 = sum(2.0 * (1 + n) ** -exponent for n in range(1, radius + 1)) + 1.0
                if tail < _AUTO_TAIL * l1:
                    break
                if radius >= _AUTO_RADIUS_CAP:
                    raise ValueError(
                        f"cannot reach relative l1 tail {_AUTO_TAIL} within radius "
                        f"{_AUTO_RADIUS_CAP}; pass an explicit radius"
                    )
                radius *= 2
        rng_1d = range(-radius, radius + 1)
        coeffs = {
            off: (1.0 + _max_norm(off)) ** -exponent
            for off in itertools.product(*([rng_1d] * d))
        }
        return cls(d, coeffs, decay_exponent=exponent)

    # -- file round-trip ----------------------------------------------------

    def to_file(self, path) -> None:
        lines = [f"dim {self.d}"]
        lines.append("decay compact" if self.is_compact else f"decay {self.decay_exponent!r}")
        for off, val in zip(self.offsets, self.values):
            lines.append(" ".join(str(int(c)) for c in off) + f" {float(val)!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path) -> "SingleSitePotential":
        d = None
        decay: float | None = None
        seen_decay = False
        coeffs: dict[Offset, float] = {}
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                try:
                    if parts[0] == "dim":
                        d = int(parts[1])
                    elif parts[0] == "decay":
                        decay = None if parts[1] == "compact" else float(parts[1])
                        seen_decay = True
                    else:
                        if d is None:
                            raise ValueError("coefficient before dim line")
                        off = tuple(int(c) for c in parts[:-1])
                        if len(off) != d:
                            raise ValueError(f"expected {d} coordinates")
                        coeffs[off] = float(parts[-1])
                except (ValueError, IndexError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad line {line!r} ({exc})") from None
        if d is None or not seen_decay:
            raise ValueError(f"{path}: missing dim or decay header")
        return cls(d, coeffs, decay_exponent=decay)


# -- multiplier assumptions ---------------------------------------------------


@dataclass
class AssumptionReport:
    """Summability / invertibility / decay diagnostics for a profile."""

    l1_norm: float
    linf_norm: float
    radius: int
    multiplier_min_grid: float
    multiplier_min: float
    multiplier_argmin: tuple[float, ...]
    multiplier_max: float
    invertible: bool
    decay_exponent: float | None
    decay_prefactor: float | None
    fitted_decay_exponent: float | None
    decay_bound_ok: bool | None
    all_ok: bool


def multiplier_values(u: SingleSitePotential, thetas: np.ndarray) -> np.ndarray:
    """Evaluate the symbol M(theta) = sum_n u_n e^(i n.theta).

    thetas has shape (..., d); the result is complex with shape (...,).
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    phase = thetas @ u.offsets.T.astype(np.float64)  # (..., m)
    return (np.exp(1j * phase) * u.values).sum(axis=-1)


def _grid_thetas(d: int, grid_points: int) -> np.ndarray:
    axis = np.linspace(0.0, 2.0 * np.pi, grid_points, endpoint=False)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def check_assumptions(
    u: SingleSitePotential, grid_points: int = 256, tol: float = 1e-6
) -> AssumptionReport:
    """Evaluate the standing assumptions on a single-site profile.

    The symbol is scanned on a uniform grid with `grid_points` per axis and
    the grid minimum of |M| is then refined by a local search, so a symbol
    with an exact zero fails invertibility regardless of grid resolution.
    """
    thetas = _grid_thetas(u.d, grid_points)
    mods = np.abs(multiplier_values(u, thetas))
    i_min = int(np.argmin(mods))
    grid_min = float(mods[i_min])
    grid_max = float(mods.max())

    from scipy.optimize import minimize

    def objective(theta):
        return float(np.abs(multiplier_values(u, theta[None, :]))[0]) ** 2

    res = minimize(objective, thetas[i_min], method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-24, "maxiter": 2000})
    refined = math.sqrt(max(res.fun, 0.0))
    refined = min(refined, grid_min)
    argmin = tuple(float(t % (2.0 * np.pi)) for t in np.atleast_1d(res.x))

    invertible = refined > tol

    fitted_exp = None
    decay_ok = None
    prefactor = u.decay_prefactor()
    if u.decay_exponent is not None:
        norms = np.abs(u.offsets).max(axis=1)
        mask = norms >= 1
        if mask.sum() >= 2:
            slope, _ = np.polyfit(
                np.log(norms[mask].astype(float)), np.log(np.abs(u.values[mask])), 1
            )
            fitted_exp = float(-slope)
        bound = prefactor * np.where(norms >= 1, norms, 1) ** (-u.decay_exponent)
        decay_ok = bool((np.abs(u.values) <= bound * (1 + 1e-12)).all())

    return AssumptionReport(
        l1_norm=u.l1_norm(),
        linf_norm=u.linf_norm(),
        radius=u.radius,
        multiplier_min_grid=grid_min,
        multiplier_min=refined,
        multiplier_argmin=argmin,
        multiplier_max=grid_max,
        invertible=invertible,
        decay_exponent=u.decay_exponent,
        decay_prefactor=prefactor,
        fitted_decay_exponent=fitted_exp,
        decay_bound_ok=decay_ok,
        all_ok=invertible,
    )


# -- disorder law and sampling ------------------------------------------------


@dataclass(frozen=True)
class DisorderLaw:
    """Bounded single-site law; only uniform laws are supported."""

    lo: float = -0.5
    hi: float = 0.5

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def bound(self) -> float:
        """Essential bound max(|lo|, |hi|)."""
        return max(abs(self.lo), abs(self.hi))

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def concentration(self, s: float) -> float:
        """Maximal mass the law gives to any interval of length s."""
        if s <= 0.0:
            return 0.0
        return min(s / self.width, 1.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.lo + self.width * rng.random(size)


@dataclass(frozen=True, eq=False)
class DisorderRealization:
    """I.i.d. site variables on a box, with their reproducibility key."""

    box: PeriodicBox
    values: np.ndarray
    seed: int
    trial_index: int

    def __post_init__(self):
        if self.values.shape != (self.box.volume,):
            raise ValueError(
                f"values shape {self.values.shape} != ({self.box.volume},)"
            )


def sample_disorder(
    box: PeriodicBox, law: DisorderLaw, seed: int, trial_index: int
) -> DisorderRealization:
    rng = trial_rng(seed, trial_index)
    values = law.sample(rng, box.volume)
    return DisorderRealization(box=box, values=values, seed=seed, trial_index=trial_index)


@dataclass(frozen=True, eq=False)
class CorrelatedPotential:
    """Convolution of a disorder realization with a single-site profile."""

    box: PeriodicBox
    values: np.ndarray
    profile: SingleSitePotential
    realization: DisorderRealization


def enlarged_box(target: PeriodicBox, u: SingleSitePotential) -> PeriodicBox:
    """Sampling box large enough for an exact convolution onto `target`."""
    return PeriodicBox(target.d, target.half_side + u.radius)


def correlate(
    realization: DisorderRealization,
    u: SingleSitePotential,
    target: PeriodicBox,
) -> CorrelatedPotential:
    """Exact finite convolution (u * omega) restricted to the target box.

    The realization box must extend the target by at least the profile
    radius on every side; no wraparound of the profile occurs.
    """
    src = realization.box
    if src.d != target.d or u.d != target.d:
        raise ValueError("dimension mismatch between realization, profile, target")
    pad = src.half_side - target.half_side
    if pad < u.radius:
        raise ValueError(
            f"realization box half-side {src.half_side} too small: need at least "
            f"{target.half_side + u.radius} for profile radius {u.radius}"
        )
    grid = realization.values.reshape((src.side,) * src.d)
    out = np.zeros((target.side,) * target.d)
    for off, val in zip(u.offsets, u.values):
        slices = tuple(slice(pad - o, pad - o + target.side) for o in off)
        out += val * grid[slices]
    return CorrelatedPotential(
        box=target, values=out.ravel(), profile=u, realization=realization
    )


def truncate(u: SingleSitePotential, cutoff: int) -> SingleSitePotential:
    """Drop all coefficients with max-norm offset beyond `cutoff`.

    The result is compactly supported by construction. cutoff 0 keeps only
    the origin coefficient.
    """
    if cutoff < 0:
        raise ValueError(f"cutoff must be >= 0, got {cutoff}")
    kept = {
        tuple(off): val
        for off, val in zip(u.offsets, u.values)
        if _max_norm(tuple(off)) <= cutoff
    }
    if not kept:
        raise ValueError(f"truncation at {cutoff} removes every coefficient")
    return SingleSitePotential(u.d, kept, decay_exponent=None)


# -- tail bounds ---------------------------------------------------------------


@dataclass
class TailReport:
    """Size of the profile tail beyond a cutoff and the induced deviation bounds.

    hoeffding_bound is the standard two-sided bound
    2 exp(-eps^2 L^-2d / (2 c^2 T)) for the dropped convolution sum to exceed
    eps L^-d at one site; printed_bound is the single-power variant
    exp(-eps L^-d / (2 c^2 T)) kept for comparison. The two exponents
    delta_paper_form = -d + (2p - d + 1) beta' and
    delta_scaling_form = -d + (2p - d) beta' are both recorded; the second is
    the one consistent with T(cutoff) ~ cutoff^(d - 2p) dimensional analysis.
    """

    cutoff: int
    l2_tail: float
    l1_tail: float
    uniform_bound: float
    hoeffding_bound: float
    printed_bound: float
    delta_paper_form: float | None
    delta_scaling_form: float | None


def tail_bounds(
    u: SingleSitePotential,
    cutoff: int,
    eps: float,
    half_side: int,
    law_bound: float = 0.5,
    beta_prime: float | None = None,
) -> TailReport:
    """Tail sums of the profile past `cutoff` and per-site deviation bounds.

    beta_prime defaults to log(cutoff)/log(half_side), the exponent the
    cutoff would have as a power of the box scale.
    """
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    if eps <= 0.0:
        raise ValueError(f"eps must be > 0, got {eps}")
    d = u.d
    t2 = u.l2_tail(cutoff)
    t1 = u.l1_tail(cutoff)
    level = eps * float(half_side) ** (-d)
    c2 = law_bound**2
    if t2 > 0.0:
        hoeff = 2.0 * math.exp(-(level**2) / (2.0 * c2 * t2))
        printed = math.exp(-level / (2.0 * c2 * t2))
    else:
        hoeff = 0.0
        printed = 0.0
    delta_paper = delta_scaling = None
    if u.decay_exponent is not None:
        p = u.decay_exponent
        if beta_prime is None:
            if cutoff > 1 and half_side > 1:
                beta_prime = math.log(cutoff) / math.log(half_side)
        if beta_prime is not None:
            delta_paper = -d + (2.0 * p - d + 1.0) * beta_prime
            delta_scaling = -d + (2.0 * p - d) * beta_prime
    return TailReport(
        cutoff=cutoff,
        l2_tail=t2,
        l1_tail=t1,
        uniform_bound=law_bound * t1,
        hoeffding_bound=hoeff,
        printed_bound=printed,
        delta_paper_form=delta_paper,
        delta_scaling_form=delta_scaling,
    )
