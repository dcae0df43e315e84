"""Command-line front end: one subcommand per experiment.

Exit codes: 0 on success, 2 on configuration or pre-flight errors, 3 when
``--check`` is passed and any verdict failed.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .config import (
    EXPERIMENTS,
    ConfigError,
    default_config,
    read_raw_config,
    resolve_config,
)
from .pipelines import PreflightError, ReferenceEnergyError, run

_DESCRIPTIONS = {
    "poisson": "joint counting statistics of the unfolded local spectrum",
    "wegner-minami": "factorial-moment ratio tables over an interval ladder",
    "localization": "eigenvector decay-rate and mass-concentration survey",
    "wiener": "convolution-inverse construction and slope cross-check",
    "truncation": "per-cube sandwich test of the truncated-potential model",
    "representation": "local/global eigenvalue matching on a box decomposition",
    "lemmas": "deterministic and Monte Carlo checks of the standalone lemmas",
    "joint": "energy-position product-law test for localization centers",
}


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alloyspec",
        description=(
            "Simulation laboratory for a correlated-disorder lattice model: "
            "spectra, eigenvalue statistics, localization, and the supporting "
            "lemma checks."
        ),
    )
    sub = parser.add_subparsers(dest="experiment", metavar="experiment")
    sub.required = True
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=_DESCRIPTIONS[name])
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--seed", type=_seed, metavar="U64", help="master seed override")
        p.add_argument("--threads", type=int, metavar="N", help="worker thread budget")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--trials", type=int, metavar="N", help="trial count override")
        p.add_argument(
            "--check",
            action="store_true",
            help="exit with status 3 if any verdict fails",
        )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "seed": args.seed,
        "threads": args.threads,
        "out_dir": args.out,
        "trials": args.trials,
    }
    try:
        if args.config:
            raw = read_raw_config(args.config)
            named = raw.get("experiment")
            if named is not None and named != args.experiment:
                raise ConfigError(
                    f"experiment: config file says {named!r} but the "
                    f"subcommand is {args.experiment!r}"
                )
            raw["experiment"] = args.experiment
            cfg = resolve_config(raw, overrides)
        else:
            cfg = default_config(args.experiment, overrides)
        summary = run(cfg)
    except (ConfigError, PreflightError, ReferenceEnergyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    for name, passed in summary.verdicts.items():
        print(f"[{'PASS' if passed else 'FAIL'}] {name}")
    print(
        f"{summary.experiment}: {len(summary.artifacts)} artifacts in "
        f"{summary.out_dir} ({summary.wall_clock_seconds:.1f}s, "
        f"config {summary.config_hash[:12]})"
    )
    if args.check and not summary.ok:
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
