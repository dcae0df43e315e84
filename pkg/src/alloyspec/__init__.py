"""Simulation laboratory for lattice Schrödinger operators with correlated disorder.

The package builds random operators H = hopping + λ·(u ⋆ ω) on periodic
boxes, diagonalizes them, and measures the spectral statistics that
characterize localization: eigenvalue counting bounds, factorial
moments, decay of eigenfunctions, Poisson behaviour of rescaled
eigenvalues, and the convolution-inversion change of variables that
links correlated and independent disorder.

Layout:

- ``lattice``        periodic boxes, cubes, box decompositions
- ``rng``            reproducible per-trial random generators
- ``disorder``       single-site profiles, disorder laws, convolution
- ``hamiltonian``    matrix assembly and restriction to cubes
- ``eig``            dense symmetric eigensolvers (three backends)
- ``wiener``         convolution inversion on the torus
- ``spectral_stats`` IDS, unfolding, counting statistics, localization
- ``lemma_checks``   direct Monte Carlo checks of spectral identities
- ``harness``        experiment configs, runners, CSV/JSON output, CLI
- ``benchmarks``     eigensolver backend timing comparison
"""

__version__ = "0.1.0"

from . import disorder, eig, hamiltonian, lattice, lemma_checks, rng, spectral_stats, wiener

__all__ = [
    "disorder",
    "eig",
    "hamiltonian",
    "lattice",
    "lemma_checks",
    "rng",
    "spectral_stats",
    "wiener",
    "__version__",
]
