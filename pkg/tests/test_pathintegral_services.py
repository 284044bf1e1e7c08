"""Tests for scene validation, Z, F-hat and the regularized terms."""

import numpy as np
import pytest

from linkcurv.core.exceptions import (
    AppValidationError,
    DuplicateIdentifierError,
    NonConvergenceError,
    TimelikeViolationError,
    UncoloredMatterError,
)
from linkcurv.geometry.models import Hyperlink
from linkcurv.geometry.services import circle_loop
from linkcurv.liealg.models import F_MINUS, F_PLUS, IrrepSpec
from linkcurv.pathintegral.models import STUDY_TERMS, Scene
from linkcurv.pathintegral.services import (
    check_coefficient_identity,
    convergence_study,
    f_hat_operator,
    loop_surface_integrals,
    term_A,
    term_B,
    term_C,
    validate_scene,
    z_observable,
)
from linkcurv.pathintegral.wilson import wilson_exponent, wilson_limit
from linkcurv.quadrature.services import tail_monotone, within_tol

E1 = np.array([0.0, 1.0, 0.0, 0.0])
E2 = np.array([0.0, 0.0, 1.0, 0.0])
COSH = np.cosh(0.75 * np.pi * np.sqrt(3.0))


@pytest.fixture
def coarse(settings):
    quad = settings.QUADRATURE.model_copy(update={"rel_tol": 1e-2, "max_refinements": 3})
    return settings.model_copy(update={"QUADRATURE": quad})


@pytest.fixture
def flat_scene(tilted_ring, unit_disk):
    """A constant-time ring over a constant-time disk, without matter."""
    return Scene(
        Hyperlink((), "matter"), Hyperlink((tilted_ring,), "geometric"), unit_disk, 0.25, "flat"
    )


class TestValidateScene:
    def test_shipped_scene(self, hopf_disk_scene, settings):
        """The shipped scene should validate unchanged."""
        assert validate_scene(hopf_disk_scene, settings) is hopf_disk_scene

    def test_duplicate_names(self, hopf_disk_scene, settings):
        """A geometric loop named like a matter loop should be rejected."""
        twin = hopf_disk_scene.geometric.loops[0].renamed("matter")
        scene = Scene(
            hopf_disk_scene.matter,
            Hyperlink((twin,), "geometric"),
            hopf_disk_scene.surface,
            0.25,
        )
        with pytest.raises(DuplicateIdentifierError):
            validate_scene(scene, settings)

    def test_spatial_matter(self, settings):
        """A matter loop in a coordinate plane at constant time is not time-like."""
        flat = circle_loop(np.zeros(4), E1, E2, 1.0, "flat")
        scene = Scene(
            Hyperlink((flat,), "matter", (IrrepSpec("1/2", "0"),)),
            Hyperlink((), "geometric"),
            None,
            0.25,
        )
        with pytest.raises(TimelikeViolationError) as exc:
            validate_scene(scene, settings)
        assert exc.value.code == "TIMELIKE_VIOLATION"

    def test_infinite_charge(self, hopf_disk_scene, settings):
        """A non-finite charge should be rejected."""
        scene = Scene(hopf_disk_scene.matter, hopf_disk_scene.geometric, None, float("inf"))
        with pytest.raises(AppValidationError):
            validate_scene(scene, settings)


class TestZObservable:
    def test_hopf_disk(self, hopf_disk_scene, settings):
        """Z should be 4 cosh(3 pi sqrt 3 / 4) for a (1/2, 1/2) loop with |sk| = 6."""
        assert z_observable(hopf_disk_scene, settings=settings) == pytest.approx(4 * COSH)

    def test_empty_surface_scene(self, empty_surface_scene, settings):
        """A (1/2, 0) loop should give 2 cosh(...) + 1."""
        assert z_observable(empty_surface_scene, settings=settings) == pytest.approx(2 * COSH + 1)

    def test_uncolored(self, hopf_disk_scene, settings):
        """Z should require a color on every matter loop."""
        bare = Hyperlink(hopf_disk_scene.matter.loops, "matter")
        scene = Scene(bare, hopf_disk_scene.geometric, hopf_disk_scene.surface, 0.25)
        with pytest.raises(UncoloredMatterError):
            z_observable(scene, settings=settings)

    def test_no_matter(self, flat_scene, settings):
        """With no matter loops Z should be one."""
        assert z_observable(flat_scene, settings=settings) == 1.0


class TestFHat:
    def test_hopf_disk(self, hopf_disk_scene, settings):
        """F-hat should be +i sqrt(4 pi) Z (F+ - F-) when lk = -1."""
        value = f_hat_operator(hopf_disk_scene, settings)
        assert value.coefficient == pytest.approx(1j * np.sqrt(4 * np.pi) * 4 * COSH)
        assert value.algebra.allclose(F_PLUS - F_MINUS)

    def test_empty_surface(self, empty_surface_scene, settings):
        """Without a surface F-hat should be the scalar Z."""
        value = f_hat_operator(empty_surface_scene, settings)
        assert value.algebra is None
        assert value.as_vector() == pytest.approx(2 * COSH + 1)

    def test_coefficient_identity(self):
        """The A and B limit coefficients should add to sqrt(4 pi)."""
        assert check_coefficient_identity() <= 1e-15


class TestRegularizedTerms:
    def test_term_a_vanishes_for_constant_time(self, flat_scene, coarse):
        """A constant-time surface has J_0i = 0, so A-bar should be exactly zero."""
        integrals = loop_surface_integrals(flat_scene, 3.0, coarse)
        assert np.all(integrals.a == 0.0)
        assert term_A(flat_scene, 3.0, 1, coarse).coefficient == 0

    def test_term_a_sign(self, hopf_disk_scene, coarse):
        """A-bar^- should carry the opposite coefficient and F^-."""
        plus = term_A(hopf_disk_scene, 2.0, 1, coarse)
        minus = term_A(hopf_disk_scene, 2.0, -1, coarse)
        assert minus.coefficient == pytest.approx(-plus.coefficient)
        assert plus.algebra.allclose(F_PLUS)
        assert minus.algebra.allclose(F_MINUS)

    def test_term_b_algebra(self, flat_scene, coarse):
        """B-bar should be purely imaginary on F+ - F-."""
        value = term_B(flat_scene, 2.0, coarse)
        assert value.algebra.allclose(F_PLUS - F_MINUS)
        assert value.coefficient.real == 0.0

    def test_bad_sign(self, flat_scene, coarse):
        """Signs other than +-1 should be rejected."""
        with pytest.raises(AppValidationError):
            term_A(flat_scene, 2.0, 0, coarse)

    def test_term_c_bad_method(self, flat_scene, coarse):
        """term_C should reject unknown methods."""
        with pytest.raises(AppValidationError):
            term_C(flat_scene, 2.0, 1, "trapezoid", coarse)

    def test_term_c_without_surface(self, empty_surface_scene, coarse):
        """With no surface C-bar should vanish without integrating."""
        assert term_C(empty_surface_scene, 5.0, -1, "nested", coarse).coefficient == 0

    def test_term_b_surface_orientation(self, hopf_disk_scene, coarse):
        """Reversing the surface orientation should negate B-bar."""
        scene = hopf_disk_scene
        flipped = Scene(scene.matter, scene.geometric, scene.surface.reversed(), scene.charge)
        forward = term_B(scene, 2.0, coarse).coefficient
        assert forward != 0
        assert term_B(flipped, 2.0, coarse).coefficient == pytest.approx(-forward)

    def test_term_c_far_loop(self, unit_disk, coarse):
        """A geometric loop far from the surface should give C-bar = 0 exactly."""
        far = circle_loop(np.array([0.0, 6.0, 6.0, 6.0]), E1, E2, 0.5, "far")
        scene = Scene(Hyperlink((), "matter"), Hyperlink((far,), "geometric"), unit_disk, 0.25)
        assert term_C(scene, 5.0, 1, "nested", coarse).coefficient == 0

    @pytest.mark.slow
    def test_term_c_qmc_matches_nested(self, hopf_disk_scene, settings):
        """The Sobol estimate of C-bar should agree with the nested rule."""
        quad = settings.QUADRATURE.model_copy(
            update={"rel_tol": 1e-2, "abs_tol": 1e-4, "max_refinements": 4, "seed": 11}
        )
        loose = settings.model_copy(update={"QUADRATURE": quad})
        nested = term_C(hopf_disk_scene, 2.0, 1, "nested", loose).coefficient
        sobol = term_C(hopf_disk_scene, 2.0, 1, "qmc", loose).coefficient
        assert sobol.real == pytest.approx(nested.real, rel=0.03, abs=1e-3)

    def test_bad_kappa(self, flat_scene, coarse):
        """Non-positive kappa should be rejected."""
        with pytest.raises(AppValidationError):
            loop_surface_integrals(flat_scene, 0.0, coarse)


@pytest.mark.slow
class TestConvergenceStudy:
    def test_empty_surface_only_z(self, empty_surface_scene, settings):
        """Without a surface the study should contain Z rows only."""
        table = convergence_study(empty_surface_scene, [5, 10, 20], settings=settings)
        assert table.terms() == ["Z"]
        assert len(table.rows) == 3

    def test_hopf_disk(self, hopf_disk_scene, settings):
        """The study should tabulate every term along the schedule."""
        table = convergence_study(hopf_disk_scene, [5, 10, 20], settings=settings)
        terms = set(table.terms())
        assert set(STUDY_TERMS) <= terms
        assert {"Z", "W:matter"} <= terms
        assert table.term("total")[-1].reference == pytest.approx(1j * np.sqrt(4 * np.pi))


class TestWilson:
    def test_no_geometric_loops(self, hopf_pair, coarse):
        """With nothing to link against the exponent should vanish."""
        c1, _ = hopf_pair
        assert wilson_exponent(c1, Hyperlink((), "geometric"), 5.0, coarse) == 0.0

    def test_far_loops(self, hopf_pair, coarse):
        """Loops far apart should give a negligible exponent at every kappa."""
        c1, _ = hopf_pair
        far = circle_loop(np.array([0.0, 6.0, 6.0, 6.0]), E1, E2, 1.0, "far")
        rows = wilson_limit(c1, Hyperlink((far,), "geometric"), [2.0, 4.0], coarse)
        assert [k for k, _, _ in rows] == [2.0, 4.0]
        assert all(abs(value) < 1e-8 for _, value, _ in rows)

    def test_geometric_orientation(self, hopf_pair, coarse):
        """Reversing the geometric loop should negate the exponent."""
        c1, c2 = hopf_pair
        forward = wilson_exponent(c1, Hyperlink((c2,), "geometric"), 5.0, coarse)
        backward = wilson_exponent(c1, Hyperlink((c2.reversed(),), "geometric"), 5.0, coarse)
        assert forward != 0.0
        assert backward == pytest.approx(-forward)


class TestNonConvergence:
    def test_term_b(self, hopf_disk_scene, exhausted):
        """term_B should raise when its quadrature runs out of refinements."""
        with pytest.raises(NonConvergenceError):
            term_B(hopf_disk_scene, 5.0, exhausted)

    def test_term_a(self, hopf_disk_scene, exhausted):
        """term_A shares the loop-surface integrals and should raise as well."""
        with pytest.raises(NonConvergenceError):
            term_A(hopf_disk_scene, 5.0, -1, exhausted)

    def test_term_c(self, hopf_disk_scene, exhausted):
        """The nested C-bar rule should raise on an exhausted budget."""
        with pytest.raises(NonConvergenceError):
            term_C(hopf_disk_scene, 5.0, 1, "nested", exhausted)

    def test_wilson_exponent(self, hopf_pair, exhausted):
        """wilson_exponent should raise instead of returning a partial value."""
        c1, c2 = hopf_pair
        with pytest.raises(NonConvergenceError):
            wilson_exponent(c1, Hyperlink((c2,), "geometric"), 5.0, exhausted)

    def test_study_records_failures(self, empty_surface_scene, exhausted):
        """Failed cells should become NON_CONVERGENCE rows of the study."""
        table = convergence_study(empty_surface_scene, [5, 10, 20], settings=exhausted)
        assert [row.failure for row in table.term("Z")] == ["NON_CONVERGENCE"] * 3
        assert not table.final_within_tol


@pytest.mark.slow
class TestKappaLimits:
    def test_total(self, hopf_disk_study):
        """The regularized sum should approach -i sqrt(4 pi) lk with a shrinking error."""
        _, table = hopf_disk_study
        rows = table.term("total")
        assert all(row.failure is None for row in rows)
        assert rows[-1].reference == pytest.approx(1j * np.sqrt(4 * np.pi))
        assert within_tol(rows[-1].value, rows[-1].reference, 0.05)
        assert tail_monotone([row.abs_error for row in rows])
        assert table.final_within_tol

    def test_time_kernel_limit(self, hopf_disk_study):
        """b should approach -pi lk, so both the B row and the time-axis row settle."""
        _, table = hopf_disk_study
        b_rows = table.term("B")
        assert within_tol(b_rows[-1].value, b_rows[-1].reference, 0.05)
        assert tail_monotone([row.abs_error for row in b_rows])
        axis0 = table.term("lk_axis0")[-1]
        assert axis0.reference == -1
        assert within_tol(axis0.value, -1, 0.05)

    @pytest.mark.parametrize("axis", [1, 2, 3])
    def test_spatial_kernel_limits(self, hopf_disk_study, axis):
        """Each a_j should approach +pi lk with the same lk as the time projection."""
        _, table = hopf_disk_study
        rows = table.term(f"lk_axis{axis}")
        assert rows[-1].reference == table.term("lk_axis0")[-1].reference
        assert within_tol(rows[-1].value, rows[-1].reference, 0.05)

    def test_term_c_decays(self, hopf_disk_study):
        """|C-bar| should shrink along the tail and end small against B-bar."""
        _, table = hopf_disk_study
        c_rows = table.term("C")
        b_last = table.term("B")[-1].value
        magnitudes = [abs(row.value) for row in c_rows]
        assert tail_monotone(magnitudes)
        assert magnitudes[-1] <= max(0.05 * abs(b_last), 1e-4)

    def test_wilson_rows(self, hopf_disk_study):
        """I / (4 pi) should approach the crossing count of the matter loop."""
        scene, table = hopf_disk_study
        rows = table.term(f"W:{scene.matter.loops[0].name}")
        assert abs(rows[-1].value - rows[-1].reference) < 0.05
