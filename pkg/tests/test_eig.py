import numpy as np
import pytest

from alloyspec.disorder import DisorderLaw, SingleSitePotential, correlate, enlarged_box, sample_disorder
from alloyspec.eig import (
    HAVE_NATIVE,
    Spectrum,
    available_backends,
    count_in,
    count_sorted,
    eigh,
    projector_diagonal,
)
from alloyspec.hamiltonian import assemble
from alloyspec.lattice import PeriodicBox
from alloyspec.rng import trial_rng

from oracles import symmetric_2x2_eigenvalues, symmetric_3x3_eigenvalues

BACKENDS = available_backends()


def _random_symmetric(n, seed):
    a = trial_rng(seed, 0).standard_normal((n, n))
    return (a + a.T) / 2.0


def _desk_hamiltonian(half_side=25, seed=0, coupling=4.0):
    box = PeriodicBox(1, half_side)
    u = SingleSitePotential.delta()
    real = sample_disorder(enlarged_box(box, u), DisorderLaw(), seed, 0)
    return assemble(correlate(real, u, box), coupling)


class TestEigh:
    @pytest.mark.parametrize("backend", BACKENDS)
    def test_two_by_two(self, backend):
        spec = eigh(np.array([[0.0, 1.0], [1.0, 0.0]]), backend=backend)
        assert np.allclose(spec.eigenvalues, [-1.0, 1.0], atol=1e-12)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_diagonal_sorting_and_permutation_vectors(self, backend):
        spec = eigh(np.diag([3.0, 1.0, 2.0]), backend=backend)
        assert np.allclose(spec.eigenvalues, [1.0, 2.0, 3.0], atol=1e-12)
        v = np.abs(spec.eigenvectors)
        assert np.allclose(v[:, 0], [0, 1, 0], atol=1e-10)
        assert np.allclose(v[:, 1], [0, 0, 1], atol=1e-10)
        assert np.allclose(v[:, 2], [1, 0, 0], atol=1e-10)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_random_2x2_closed_form(self, backend):
        rng = trial_rng(31, 0)
        for _ in range(25):
            a, b, c = rng.uniform(-2, 2, 3)
            spec = eigh(np.array([[a, c], [c, b]]), backend=backend)
            lo, hi = symmetric_2x2_eigenvalues(a, b, c)
            assert spec.eigenvalues == pytest.approx([lo, hi], abs=1e-12)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_random_3x3_cubic_oracle(self, backend):
        rng = trial_rng(32, 0)
        for _ in range(25):
            m = _random_symmetric(3, int(rng.integers(10**6)))
            spec = eigh(m, backend=backend)
            assert np.allclose(spec.eigenvalues, symmetric_3x3_eigenvalues(m), atol=1e-10)

    def test_backends_agree(self):
        m = _desk_hamiltonian().matrix
        specs = [eigh(m, backend=b) for b in BACKENDS]
        for other in specs[1:]:
            assert np.allclose(specs[0].eigenvalues, other.eigenvalues, atol=1e-9)

    def test_certificates(self):
        h = _desk_hamiltonian()
        spec = eigh(h)
        assert spec.residual is not None and spec.gram_error is not None
        norm_bound = np.abs(h.matrix).sum(axis=1).max()
        assert spec.residual <= 1e-8 * (1.0 + norm_bound)
        assert spec.gram_error <= 1e-8

    def test_vectors_false_skips_vectors(self):
        spec = eigh(_desk_hamiltonian(), vectors=False)
        assert spec.eigenvectors is None
        assert spec.residual is None

    def test_deterministic(self):
        m = _desk_hamiltonian(seed=3).matrix
        a = eigh(m, backend="lapack")
        b = eigh(m, backend="lapack")
        assert np.array_equal(a.eigenvalues, b.eigenvalues)
        assert np.array_equal(a.eigenvectors, b.eigenvectors)

    def test_trace_and_frobenius_identities(self):
        h = _desk_hamiltonian(seed=8)
        w = eigh(h).eigenvalues
        assert w.sum() == pytest.approx(np.trace(h.matrix), abs=1e-8 * h.size)
        assert (w**2).sum() == pytest.approx((h.matrix**2).sum(), rel=1e-10)

    def test_rejects_asymmetric(self):
        m = np.array([[0.0, 1.0], [0.5, 0.0]])
        with pytest.raises(ValueError):
            eigh(m)

    def test_accepts_hamiltonian_wrapper(self):
        h = _desk_hamiltonian(half_side=4)
        spec = eigh(h)
        assert spec.grid is h.grid
        assert spec.size == h.size

    @pytest.mark.skipif(not HAVE_NATIVE, reason="native backend not built")
    def test_native_matches_lapack_on_hamiltonian(self):
        m = _desk_hamiltonian(half_side=30, seed=5).matrix
        a = eigh(m, backend="lapack")
        b = eigh(m, backend="native")
        assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-9)
        assert b.residual <= 1e-8 * (1.0 + np.abs(m).sum(axis=1).max())


class TestSpectrumValidation:
    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            Spectrum(
                eigenvalues=np.array([1.0, 0.0]),
                eigenvectors=None,
                grid=None,
                backend="given",
                residual=None,
                gram_error=None,
            )

    def test_rejects_wrong_vector_shape(self):
        with pytest.raises(ValueError):
            Spectrum(
                eigenvalues=np.array([0.0, 1.0]),
                eigenvectors=np.zeros((3, 2)),
                grid=None,
                backend="given",
                residual=None,
                gram_error=None,
            )


class TestCounting:
    def test_half_open_semantics(self):
        w = np.array([-1.0, 1.0])
        assert count_sorted(w, 0.0, 2.0) == 1
        assert count_sorted(w, -1.0, 1.0) == 1  # left endpoint excluded
        assert count_sorted(w, -1.5, 1.0) == 2  # right endpoint included
        assert count_sorted(w, 0.5, 0.5) == 0

    def test_huge_interval_counts_everything(self):
        h = _desk_hamiltonian(half_side=10)
        spec = eigh(h, vectors=False)
        assert count_in(spec, (-1e6, 1e6)) == h.size

    def test_additive_over_adjacent_intervals(self):
        spec = eigh(_desk_hamiltonian(half_side=20), vectors=False)
        a, b, c = -1.0, 0.25, 2.0
        assert count_sorted(spec.eigenvalues, a, b) + count_sorted(
            spec.eigenvalues, b, c
        ) == count_sorted(spec.eigenvalues, a, c)

    def test_matches_bracket_scan(self):
        w = np.sort(trial_rng(44, 0).uniform(-3, 3, 200))
        for lo, hi in [(-1, 1), (0, 0.5), (-3, 3), (2.9, 3.1)]:
            direct = int(np.sum((w > lo) & (w <= hi)))
            assert count_sorted(w, lo, hi) == direct


class TestProjectorDiagonal:
    def test_completeness(self):
        spec = eigh(_desk_hamiltonian(half_side=12))
        total = projector_diagonal(spec, (3,), (-1e6, 1e6))
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_empty_interval(self):
        spec = eigh(_desk_hamiltonian(half_side=12))
        assert projector_diagonal(spec, (0,), (0.3, 0.3)) == 0.0

    def test_trace_identity(self):
        h = _desk_hamiltonian(half_side=12)
        spec = eigh(h)
        interval = (-1.0, 1.5)
        total = sum(projector_diagonal(spec, i, interval) for i in range(h.size))
        assert total == pytest.approx(count_in(spec, interval), abs=1e-8)

    def test_range(self):
        spec = eigh(_desk_hamiltonian(half_side=12, seed=2))
        for i in range(0, spec.size, 5):
            val = projector_diagonal(spec, i, (-2.0, 2.0))
            assert 0.0 <= val <= 1.0 + 1e-12
