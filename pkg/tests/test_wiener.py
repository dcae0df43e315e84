import math

import numpy as np
import pytest

from alloyspec.disorder import DisorderLaw, SingleSitePotential
from alloyspec.rng import trial_rng
from alloyspec.wiener import (
    NonInvertibleMultiplierError,
    TorusResonanceError,
    build_wiener,
    conditional_slope,
    conditional_window,
    inversion_identity_error,
    kappa_from_lemma,
    write_report,
)

GEOMETRIC_KAPPA = 17.0 / 15.0  # (1 + r^2)/(1 - r^2) at r = 1/4
GEOMETRIC_SIDE = -4.0 / 15.0  # -r/(1 - r^2) at r = 1/4


class TestDeltaProfile:
    def test_trivial_inversion(self):
        data = build_wiener(SingleSitePotential.delta())
        assert data.multiplier_min == pytest.approx(1.0, abs=1e-12)
        assert data.multiplier_max == pytest.approx(1.0, abs=1e-12)
        assert data.inverse_coefficient((0,)) == pytest.approx(1.0, abs=1e-12)
        assert data.shift == (0,)
        assert data.kappa == pytest.approx(1.0, abs=1e-12)
        assert data.kappa_telescoped == pytest.approx(1.0, abs=1e-12)
        assert data.identity_residual <= 1e-12

    def test_unit_slope(self):
        assert conditional_slope(SingleSitePotential.delta(), 64, 0, 0) == pytest.approx(
            1.0, abs=1e-12
        )


class TestGeometricQuarter:
    def setup_method(self):
        self.u = SingleSitePotential.geometric(0.25)
        self.data = build_wiener(self.u)

    def test_kappa_frozen(self):
        assert self.data.shift == (0,)
        assert self.data.kappa == pytest.approx(GEOMETRIC_KAPPA, abs=1e-6)
        assert self.data.kappa_telescoped == pytest.approx(GEOMETRIC_KAPPA, abs=1e-6)
        assert kappa_from_lemma(self.u, self.data) == pytest.approx(
            self.data.kappa, abs=1e-12
        )

    def test_inverse_is_three_point(self):
        # 1/M = (1 - 2r cos + r^2)/(1 - r^2): exactly three coefficients
        assert self.data.inverse_coefficient((0,)) == pytest.approx(
            GEOMETRIC_KAPPA, abs=1e-9
        )
        assert self.data.inverse_coefficient((1,)) == pytest.approx(
            GEOMETRIC_SIDE, abs=1e-9
        )
        assert self.data.inverse_coefficient((-1,)) == pytest.approx(
            GEOMETRIC_SIDE, abs=1e-9
        )
        assert abs(self.data.inverse_coefficient((2,))) <= 1e-9
        assert abs(self.data.inverse_coefficient((7,))) <= 1e-9

    def test_two_sided_identity(self):
        assert inversion_identity_error(self.u, self.data) <= 1e-10
        assert self.data.identity_residual <= 1e-10

    def test_multiplier_extremes(self):
        # (1 - r^2)/(1 -+ 2r + r^2) at theta = 0, pi
        assert self.data.multiplier_max == pytest.approx(5.0 / 3.0, abs=1e-6)
        assert self.data.multiplier_min == pytest.approx(0.6, abs=1e-6)

    def test_slope_matches_kappa_on_torus(self):
        slope = conditional_slope(self.u, 512, 0, 0)
        assert abs(slope) == pytest.approx(GEOMETRIC_KAPPA, abs=1e-6)
        assert conditional_slope(self.u, 512, 0, 1) == pytest.approx(
            GEOMETRIC_SIDE, abs=1e-6
        )

    def test_converged(self):
        assert self.data.converged
        assert self.data.kappa_remainder <= 1e-8


class TestSlopeStructure:
    def test_translation_invariance(self):
        u = SingleSitePotential.geometric(0.3, radius=20)
        base = conditional_slope(u, 128, 0, 1)
        for m0 in (3, 17, 64, 100):
            assert conditional_slope(u, 128, m0, m0 + 1) == pytest.approx(
                base, abs=1e-12
            )

    def test_scaling_inverse_in_amplitude(self):
        u = SingleSitePotential.geometric(0.25, radius=20)
        scaled = SingleSitePotential(
            1, {off: 2.5 * val for off, val in u.coefficients.items()}
        )
        a = conditional_slope(u, 128, 0, 0)
        b = conditional_slope(scaled, 128, 0, 0)
        assert b == pytest.approx(a / 2.5, rel=1e-12)

    def test_kappa_scaling(self):
        u = SingleSitePotential.geometric(0.25)
        scaled = SingleSitePotential(
            1, {off: -2.0 * val for off, val in u.coefficients.items()}
        )
        data = build_wiener(scaled)
        assert data.kappa == pytest.approx(GEOMETRIC_KAPPA / 2.0, abs=1e-6)


class TestRandomSummablePotentials:
    def test_kappa_matches_torus_slope(self):
        # small perturbations of the delta keep the symbol away from zero
        rng = trial_rng(2026, 0)
        for case in range(5):
            coeffs = {(0,): 1.0}
            for off in range(1, 4):
                coeffs[(off,)] = float(rng.uniform(-0.1, 0.1))
                coeffs[(-off,)] = float(rng.uniform(-0.1, 0.1))
            u = SingleSitePotential(1, coeffs)
            data = build_wiener(u)
            assert inversion_identity_error(u, data) <= 1e-10
            n0 = tuple(-t for t in data.shift)
            slope = conditional_slope(u, 512, 0, n0)
            assert abs(slope) == pytest.approx(
                data.kappa, abs=1e-6 + data.kappa_remainder
            )


class TestFailureModes:
    def test_vanishing_symbol_rejected(self):
        # M(theta) = cos(theta) crosses zero
        u = SingleSitePotential(1, {-1: 0.5, 1: 0.5})
        with pytest.raises(NonInvertibleMultiplierError):
            build_wiener(u)

    def test_torus_resonance(self):
        # M(theta) = 1 + cos(theta) vanishes exactly at the pi grid node
        u = SingleSitePotential(1, {-1: 0.5, 0: 1.0, 1: 0.5})
        with pytest.raises(TorusResonanceError):
            conditional_slope(u, 512, 0, 0)


class TestConditionalWindow:
    def test_delta_window_is_full_law_width(self):
        u = SingleSitePotential.delta()
        law = DisorderLaw()
        omega = trial_rng(5, 0).uniform(-0.5, 0.5, 64)
        win = conditional_window(u, 64, 0, omega, law)
        assert win.width == pytest.approx(1.0, abs=1e-12)
        assert win.bound == pytest.approx(1.0, abs=1e-12)
        assert win.dominant_slope == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= win.position <= 1.0

    def test_window_width_bounded_and_position_uniform(self):
        u = SingleSitePotential.geometric(0.25, radius=8)
        law = DisorderLaw()
        positions = []
        for t in range(400):
            omega = trial_rng(6, t).uniform(-0.5, 0.5, 64)
            win = conditional_window(u, 64, 0, omega, law)
            assert win.width <= win.bound + 1e-12
            assert win.hi - win.lo == pytest.approx(win.width, abs=1e-12)
            positions.append(win.position)
        positions = np.array(positions)
        assert positions.min() >= 0.0 and positions.max() <= 1.0
        # uniform position: mean 1/2 within 4 sigma, sigma = 1/sqrt(12 n)
        assert abs(positions.mean() - 0.5) <= 4.0 / math.sqrt(12.0 * len(positions))

    def test_rejects_wrong_shape(self):
        u = SingleSitePotential.delta()
        with pytest.raises(ValueError):
            conditional_window(u, 64, 0, np.zeros(32), DisorderLaw())


def test_write_report(tmp_path):
    data = build_wiener(SingleSitePotential.geometric(0.25))
    path = tmp_path / "wiener.txt"
    write_report(data, path)
    text = path.read_text()
    assert "kappa" in text
    assert repr(data.kappa) in text
