"""Experiment configuration: schema, validation, canonical serialization.

Every experiment shares a core schema (model, law, trial plan, output) and
adds a few knobs of its own.  Validation is strict: a key the experiment
does not read is an error, so a config file cannot silently misdirect a
run.  Error messages carry the field path (``law.lo``, ``intervals[1]``).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence, Tuple

EXPERIMENTS = (
    "poisson",
    "wegner-minami",
    "localization",
    "wiener",
    "truncation",
    "representation",
    "lemmas",
    "joint",
)

DEFAULT_SEED = 20260817


class ConfigError(ValueError):
    """Schema violation; the message starts with the offending field path."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved, validated parameters of one experiment run."""

    experiment: str
    dimension: int = 1
    box_sizes: Tuple[int, ...] = (500,)
    coupling: float = 4.0
    law: Tuple[float, float] = (-0.5, 0.5)
    potential: Mapping[str, Any] = field(default_factory=lambda: {"kind": "delta"})
    trials: int = 2000
    seed: int = DEFAULT_SEED
    threads: int = 1
    out_dir: str = "runs"
    backend: str = "lapack"
    # reference energy / unfolding
    reference_rule: str = "band-center"
    window: float = 12.0
    ids_grid_points: int = 2001
    pilot_trials: int = 200
    # poisson / joint
    intervals: Tuple[Tuple[float, float], ...] = ((0.0, 1.0), (-2.0, -1.0))
    counts_max: int = 2
    tolerance: float = 0.05
    cells_per_axis: Optional[int] = None
    # wegner-minami
    interval_widths: Tuple[float, ...] = (0.01, 0.05, 0.1, 0.3)
    k_max: int = 2
    ratio_spread: float = 2.0
    minami_factor: float = 3.0
    # localization
    center_fraction: float = 0.2
    radii: Tuple[int, ...] = (5, 10, 20, 40)
    mass_radius: int = 20
    mass_level: float = 0.99
    eta_min: float = 0.5
    mass_fraction: float = 0.95
    # decomposition-driven experiments (truncation, representation)
    decomposition: Tuple[float, float, float, float] = (0.01, 0.9, 0.7, 0.6)
    interval_scale: float = 0.15
    eta: Optional[float] = None
    eps_safety: float = 1.0
    sandwich_level: float = 0.95
    z_ok_level: float = 0.8
    # wiener
    profiles: Tuple[Mapping[str, Any], ...] = (
        {"kind": "delta"},
        {"kind": "geometric", "ratio": 0.25},
    )
    torus: int = 512
    # lemmas
    instances: int = 200
    independence_trials: int = 10000


# Fields every experiment reads, then the experiment-specific extras.
_CORE = {
    "experiment",
    "dimension",
    "box_sizes",
    "coupling",
    "law",
    "potential",
    "trials",
    "seed",
    "threads",
    "out_dir",
    "backend",
}
_REFERENCE = {"reference_rule", "window", "ids_grid_points", "pilot_trials"}
_FIELDS_BY_EXPERIMENT = {
    "poisson": _CORE | _REFERENCE | {"intervals", "counts_max", "tolerance"},
    "wegner-minami": _CORE
    | _REFERENCE
    | {"interval_widths", "k_max", "ratio_spread", "minami_factor"},
    "localization": _CORE
    | {
        "center_fraction",
        "radii",
        "mass_radius",
        "mass_level",
        "eta_min",
        "mass_fraction",
    },
    "wiener": (_CORE - {"potential", "law", "coupling", "box_sizes"})
    | {"profiles", "torus"},
    "truncation": _CORE
    | _REFERENCE
    | {"decomposition", "interval_scale", "eta", "eps_safety", "sandwich_level"},
    "representation": _CORE
    | _REFERENCE
    | {
        "decomposition",
        "interval_scale",
        "eta",
        "z_ok_level",
        "center_fraction",
    },
    "lemmas": _CORE | {"instances", "independence_trials", "decomposition"},
    "joint": _CORE | _REFERENCE | {"cells_per_axis", "tolerance"},
}

# Per-experiment defaults that differ from the dataclass baseline: each
# acceptance configuration is the out-of-the-box run.
_DEFAULTS_BY_EXPERIMENT: dict[str, dict[str, Any]] = {
    "poisson": {},
    "wegner-minami": {
        "box_sizes": (100, 200, 400),
        "reference_rule": "fixed:0.0",
        "pilot_trials": 200,
    },
    "localization": {"box_sizes": (200,), "coupling": 10.0, "trials": 200},
    "wiener": {"trials": 1},
    "truncation": {
        "box_sizes": (100, 200, 300),
        "coupling": 10.0,
        "trials": 200,
        "potential": {"kind": "polynomial", "exponent": 2.0, "radius": 50},
    },
    "representation": {
        "box_sizes": (100, 200, 300),
        "coupling": 10.0,
        "trials": 200,
    },
    "lemmas": {"trials": 2000},
    "joint": {"trials": 200, "tolerance": 0.01},
}


def _fail(path: str, message: str) -> None:
    raise ConfigError(f"{path}: {message}")


def _check_int(path: str, value: Any, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(path, f"must be >= {minimum}, got {value}")
    return int(value)


def _check_real(path: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    value = float(value)
    if value != value or value in (float("inf"), float("-inf")):
        _fail(path, "must be finite")
    return value


def _check_interval(path: str, value: Any) -> Tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        _fail(path, f"expected [lo, hi], got {value!r}")
    lo = _check_real(f"{path}[0]", value[0])
    hi = _check_real(f"{path}[1]", value[1])
    if not lo < hi:
        _fail(path, f"needs lo < hi, got [{lo}, {hi}]")
    return (lo, hi)


_POTENTIAL_KINDS = {
    "delta": set(),
    "geometric": {"ratio", "radius"},
    "polynomial": {"exponent", "radius"},
    "file": {"path"},
}


def _check_potential(path: str, value: Any) -> dict:
    if not isinstance(value, Mapping):
        _fail(path, f"expected an object with a 'kind' key, got {value!r}")
    kind = value.get("kind")
    if kind not in _POTENTIAL_KINDS:
        _fail(f"{path}.kind", f"expected one of {sorted(_POTENTIAL_KINDS)}, got {kind!r}")
    allowed = _POTENTIAL_KINDS[kind] | {"kind"}
    for key in value:
        if key not in allowed:
            _fail(f"{path}.{key}", f"not a parameter of kind '{kind}'")
    out: dict[str, Any] = {"kind": kind}
    if kind == "geometric":
        ratio = _check_real(f"{path}.ratio", value.get("ratio", 0.25))
        if not 0.0 < abs(ratio) < 1.0:
            _fail(f"{path}.ratio", f"|ratio| must lie in (0, 1), got {ratio}")
        out["ratio"] = ratio
        if value.get("radius") is not None:
            out["radius"] = _check_int(f"{path}.radius", value["radius"], 1)
    elif kind == "polynomial":
        if "exponent" not in value:
            _fail(f"{path}.exponent", "required for kind 'polynomial'")
        out["exponent"] = _check_real(f"{path}.exponent", value["exponent"])
        if value.get("radius") is not None:
            out["radius"] = _check_int(f"{path}.radius", value["radius"], 1)
    elif kind == "file":
        if not isinstance(value.get("path"), str):
            _fail(f"{path}.path", "required string for kind 'file'")
        out["path"] = value["path"]
    return out


def _check_reference_rule(path: str, value: Any) -> str:
    if not isinstance(value, str):
        _fail(path, f"expected a string, got {value!r}")
    if value == "band-center":
        return value
    if value.startswith("fixed:"):
        try:
            float(value[len("fixed:"):])
        except ValueError:
            _fail(path, f"'fixed:' must be followed by a number, got {value!r}")
        return value
    _fail(path, f"expected 'band-center' or 'fixed:<energy>', got {value!r}")
    return value  # unreachable


def resolve_config(raw: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """Validate a raw mapping (plus CLI overrides) into an ExperimentConfig."""
    if not isinstance(raw, Mapping):
        raise ConfigError("config: expected a JSON object at top level")
    merged = dict(raw)
    for key, val in (overrides or {}).items():
        if val is not None:
            merged[key] = val

    experiment = merged.get("experiment")
    if experiment not in EXPERIMENTS:
        _fail("experiment", f"expected one of {list(EXPERIMENTS)}, got {experiment!r}")

    allowed = _FIELDS_BY_EXPERIMENT[experiment]
    for key in merged:
        if key not in allowed:
            _fail(key, f"not a field of experiment '{experiment}'")

    values: dict[str, Any] = dict(_DEFAULTS_BY_EXPERIMENT[experiment])
    values["experiment"] = experiment
    values.update({k: v for k, v in merged.items() if k != "experiment"})

    out: dict[str, Any] = {"experiment": experiment}
    defaults = {f.name: f for f in dataclasses.fields(ExperimentConfig)}

    def take(name: str) -> Any:
        if name in values:
            return values[name]
        f = defaults[name]
        if f.default is not dataclasses.MISSING:
            return f.default
        return f.default_factory()  # type: ignore[misc]

    out["dimension"] = _check_int("dimension", take("dimension"), 1)
    if out["dimension"] > 3:
        _fail("dimension", f"at most 3 supported, got {out['dimension']}")
    sizes = take("box_sizes")
    if not isinstance(sizes, (list, tuple)) or not sizes:
        _fail("box_sizes", f"expected a nonempty list, got {sizes!r}")
    out["box_sizes"] = tuple(
        _check_int(f"box_sizes[{i}]", s, 1) for i, s in enumerate(sizes)
    )
    out["coupling"] = _check_real("coupling", take("coupling"))
    if out["coupling"] <= 0:
        _fail("coupling", f"must be positive, got {out['coupling']}")
    law = take("law")
    if isinstance(law, Mapping):
        extra = set(law) - {"lo", "hi"}
        if extra:
            _fail(f"law.{sorted(extra)[0]}", "unknown key (expected lo, hi)")
        law = (law.get("lo", -0.5), law.get("hi", 0.5))
    out["law"] = _check_interval("law", law)
    out["potential"] = _check_potential("potential", take("potential"))
    out["trials"] = _check_int("trials", take("trials"), 1)
    out["seed"] = _check_int("seed", take("seed"), 0)
    if out["seed"] >= 2**64:
        _fail("seed", "must fit in 64 bits")
    out["threads"] = _check_int("threads", take("threads"), 1)
    out_dir = take("out_dir")
    if not isinstance(out_dir, str) or not out_dir:
        _fail("out_dir", f"expected a nonempty string, got {out_dir!r}")
    out["out_dir"] = out_dir
    backend = take("backend")
    if backend not in ("auto", "lapack", "native", "python"):
        _fail("backend", f"expected auto|lapack|native|python, got {backend!r}")
    out["backend"] = backend

    if "reference_rule" in allowed:
        out["reference_rule"] = _check_reference_rule(
            "reference_rule", take("reference_rule")
        )
        out["window"] = _check_real("window", take("window"))
        if out["window"] <= 0:
            _fail("window", "must be positive")
        out["ids_grid_points"] = _check_int("ids_grid_points", take("ids_grid_points"), 10)
        out["pilot_trials"] = _check_int("pilot_trials", take("pilot_trials"), 1)

    if experiment in ("poisson",):
        ivs = take("intervals")
        if not isinstance(ivs, (list, tuple)) or not ivs:
            _fail("intervals", f"expected a nonempty list of [lo, hi], got {ivs!r}")
        out["intervals"] = tuple(
            _check_interval(f"intervals[{i}]", iv) for i, iv in enumerate(ivs)
        )
        out["counts_max"] = _check_int("counts_max", take("counts_max"), 0)
        out["tolerance"] = _check_real("tolerance", take("tolerance"))
        if out["tolerance"] <= 0:
            _fail("tolerance", "must be positive")

    if experiment == "wegner-minami":
        widths = take("interval_widths")
        if not isinstance(widths, (list, tuple)) or not widths:
            _fail("interval_widths", f"expected a nonempty list, got {widths!r}")
        parsed = []
        for i, w in enumerate(widths):
            w = _check_real(f"interval_widths[{i}]", w)
            if w <= 0:
                _fail(f"interval_widths[{i}]", f"must be positive, got {w}")
            parsed.append(w)
        out["interval_widths"] = tuple(parsed)
        out["k_max"] = _check_int("k_max", take("k_max"), 1)
        out["ratio_spread"] = _check_real("ratio_spread", take("ratio_spread"))
        out["minami_factor"] = _check_real("minami_factor", take("minami_factor"))

    if experiment in ("localization", "representation"):
        frac = _check_real("center_fraction", take("center_fraction"))
        if not 0.0 < frac <= 1.0:
            _fail("center_fraction", f"must lie in (0, 1], got {frac}")
        out["center_fraction"] = frac

    if experiment == "localization":
        radii = take("radii")
        if not isinstance(radii, (list, tuple)) or not radii:
            _fail("radii", f"expected a nonempty list, got {radii!r}")
        rs = sorted({_check_int(f"radii[{i}]", r, 1) for i, r in enumerate(radii)})
        out["mass_radius"] = _check_int("mass_radius", take("mass_radius"), 1)
        if out["mass_radius"] not in rs:
            rs = sorted(set(rs) | {out["mass_radius"]})
        out["radii"] = tuple(rs)
        out["mass_level"] = _check_real("mass_level", take("mass_level"))
        out["eta_min"] = _check_real("eta_min", take("eta_min"))
        out["mass_fraction"] = _check_real("mass_fraction", take("mass_fraction"))

    if experiment in ("truncation", "representation", "lemmas"):
        dec = take("decomposition")
        if isinstance(dec, Mapping):
            extra = set(dec) - {"rho_tilde", "alpha", "beta", "beta_prime"}
            if extra:
                _fail(f"decomposition.{sorted(extra)[0]}", "unknown key")
            dec = (
                dec.get("rho_tilde", 0.01),
                dec.get("alpha", 0.9),
                dec.get("beta", 0.7),
                dec.get("beta_prime", 0.6),
            )
        if not isinstance(dec, (list, tuple)) or len(dec) != 4:
            _fail(
                "decomposition",
                "expected [rho_tilde, alpha, beta, beta_prime] or an object",
            )
        out["decomposition"] = tuple(
            _check_real(f"decomposition[{i}]", v) for i, v in enumerate(dec)
        )

    if experiment in ("truncation", "representation"):
        out["interval_scale"] = _check_real("interval_scale", take("interval_scale"))
        if out["interval_scale"] <= 0:
            _fail("interval_scale", "must be positive")
        eta = take("eta")
        out["eta"] = None if eta is None else _check_real("eta", eta)
        if out["eta"] is not None and out["eta"] <= 0:
            _fail("eta", "must be positive when given")

    if experiment == "truncation":
        out["eps_safety"] = _check_real("eps_safety", take("eps_safety"))
        if out["eps_safety"] <= 0:
            _fail("eps_safety", "must be positive")
        out["sandwich_level"] = _check_real("sandwich_level", take("sandwich_level"))

    if experiment == "representation":
        out["z_ok_level"] = _check_real("z_ok_level", take("z_ok_level"))

    if experiment == "wiener":
        profiles = take("profiles")
        if not isinstance(profiles, (list, tuple)) or not profiles:
            _fail("profiles", f"expected a nonempty list, got {profiles!r}")
        out["profiles"] = tuple(
            _check_potential(f"profiles[{i}]", p) for i, p in enumerate(profiles)
        )
        torus = _check_int("torus", take("torus"), 4)
        out["torus"] = torus
        out["dimension"] = 1
        out["box_sizes"] = (1,)

    if experiment == "lemmas":
        out["instances"] = _check_int("instances", take("instances"), 1)
        out["independence_trials"] = _check_int(
            "independence_trials", take("independence_trials"), 100
        )
        if out["trials"] < 1000:
            _fail("trials", "spectral averaging needs >= 1000 trials")

    if experiment == "joint":
        cells = take("cells_per_axis")
        out["cells_per_axis"] = (
            None if cells is None else _check_int("cells_per_axis", cells, 2)
        )
        out["tolerance"] = _check_real("tolerance", take("tolerance"))

    return ExperimentConfig(**out)


def read_raw_config(path: str) -> dict:
    """Read a JSON config file into a raw mapping (no validation)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object at top level")
    return raw


def load_config(path: str, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """Read a JSON config file and validate it."""
    return resolve_config(read_raw_config(path), overrides)


def default_config(experiment: str, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """The built-in (acceptance) configuration of one experiment."""
    return resolve_config({"experiment": experiment}, overrides)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """JSON-ready canonical form, tuples as lists, mappings as plain dicts."""

    def convert(value: Any) -> Any:
        if isinstance(value, tuple):
            return [convert(v) for v in value]
        if isinstance(value, Mapping):
            return {k: convert(value[k]) for k in sorted(value)}
        return value

    return {f.name: convert(getattr(cfg, f.name)) for f in dataclasses.fields(cfg)}


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical config, excluding execution-only fields.

    ``threads`` and ``out_dir`` do not influence any computed number, so
    two runs differing only there share a hash — that is exactly the
    determinism contract the artifacts are checked against.
    """
    payload = config_to_dict(cfg)
    payload.pop("threads", None)
    payload.pop("out_dir", None)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
