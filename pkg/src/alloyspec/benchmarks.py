"""Backend benchmark: times the eigensolvers against each other.

Run as ``python -m alloyspec.benchmarks``.  Random symmetric matrices are
decomposed by every available backend; the table reports wall time per
decomposition and the cross-backend eigenvalue agreement, so the compiled
kernel, its pure-Python twin, and the production LAPACK route can be
compared on the same inputs.
"""

from __future__ import annotations

import argparse
import sys
import time
from typing import List, Optional, Sequence

import numpy as np

from .eig import HAVE_NATIVE, eigh
from .rng import trial_rng


def _time_backend(matrix: np.ndarray, backend: str, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        eigh(matrix, backend=backend, certify=False)
        best = min(best, time.perf_counter() - start)
    return best


def run_benchmark(
    sizes: Sequence[int], repeats: int, seed: int = 0, out=sys.stdout
) -> List[dict]:
    backends = ["lapack", "python"] + (["native"] if HAVE_NATIVE else [])
    if not HAVE_NATIVE:
        print("note: compiled extension not available; timing the fallback only", file=out)
    rows: List[dict] = []
    header = f"{'n':>6}  " + "".join(f"{b + ' (s)':>14}" for b in backends) + f"{'max |Δλ|':>14}"
    print(header, file=out)
    print("-" * len(header), file=out)
    for i, n in enumerate(sizes):
        rng = trial_rng(seed, i)
        m = rng.standard_normal((n, n))
        m = (m + m.T) / 2.0
        times = {b: _time_backend(m, b, repeats) for b in backends}
        reference = eigh(m, backend=backends[0], vectors=False).eigenvalues
        spread = 0.0
        for b in backends[1:]:
            w = eigh(m, backend=b, vectors=False).eigenvalues
            spread = max(spread, float(np.max(np.abs(w - reference))))
        rows.append({"n": n, "times": times, "max_eigenvalue_spread": spread})
        line = f"{n:>6}  " + "".join(f"{times[b]:>14.6f}" for b in backends)
        print(line + f"{spread:>14.3e}", file=out)
    return rows


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m alloyspec.benchmarks", description=__doc__.splitlines()[0]
    )
    parser.add_argument(
        "--sizes",
        type=int,
        nargs="+",
        default=[50, 100, 200, 400],
        metavar="N",
        help="matrix sizes to time (default: 50 100 200 400)",
    )
    parser.add_argument(
        "--repeats",
        type=int,
        default=3,
        metavar="K",
        help="timing repetitions per size; the best is kept (default: 3)",
    )
    args = parser.parse_args(argv)
    if args.repeats < 1 or any(n < 2 for n in args.sizes):
        parser.error("need repeats >= 1 and sizes >= 2")
    run_benchmark(args.sizes, args.repeats)
    return 0


if __name__ == "__main__":
    sys.exit(main())
