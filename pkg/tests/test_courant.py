import pytest
from pydantic import ValidationError

from src.errors import KindMismatchError
from src.models.courant_models import ExactSection, OddSection, SectionKind, TwistData
from src.models.fields import KForm, VectorField
from src.services.courant_service import (CourantAlgebroid, ExactCourantAlgebroid, OddCourantAlgebroid,
                                          algebroid_for, axiom_residuals, dorfman_exact, dorfman_odd, pairing,
                                          shift_splitting, shifted_splitting, three_form_of_splitting)
from tests.conftest import mode_form


def test_exact_axioms_hold(exact_twist3, factory3):
    e, e1, e2 = (factory3.exact_section() for _ in range(3))
    report = axiom_residuals(exact_twist3, e, e1, e2, factory3.scalar())
    assert report.kind == SectionKind.exact
    assert report.all_passed, [(entry.axiom, entry.residual) for entry in report.entries]


def test_odd_axioms_hold(odd_twist3, factory3):
    e, e1, e2 = (factory3.odd_section() for _ in range(3))
    report = axiom_residuals(odd_twist3, e, e1, e2, factory3.scalar())
    assert report.all_passed, [(entry.axiom, entry.residual) for entry in report.entries]


def test_printed_polarization_is_informational(exact_twist3, factory3):
    e, e1, e2 = (factory3.exact_section() for _ in range(3))
    entry = axiom_residuals(exact_twist3, e, e1, e2, factory3.scalar()).entry(
        CourantAlgebroid.Axioms.symmetric_part_as_printed)
    assert entry.informational
    assert entry.passed


def test_odd_axioms_on_the_plane(odd_twist2, factory2):
    e, e1, e2 = (factory2.odd_section() for _ in range(3))
    assert axiom_residuals(odd_twist2, e, e1, e2, factory2.scalar()).all_passed


def test_non_closed_f_is_rejected(grid3):
    F = mode_form(grid3, 2, ((0, 1), (0, 0, 1), 1.0))
    with pytest.raises(ValidationError, match="dF = 0"):
        TwistData.odd(grid3, F=F)


def test_non_closed_f_breaks_leibniz(grid3, factory3):
    F = mode_form(grid3, 2, ((0, 1), (0, 0, 1), 1.0))
    broken = TwistData.unchecked(grid3, SectionKind.odd, H=KForm.zeros(grid3, 3), F=F)
    e, e1, e2 = (factory3.odd_section() for _ in range(3))
    entry = axiom_residuals(broken, e, e1, e2, factory3.scalar()).entry(CourantAlgebroid.Axioms.leibniz)
    assert entry.residual > 1e-3
    assert not entry.passed


def test_exact_twist_carries_no_f(grid3):
    with pytest.raises(ValidationError, match="carries no F"):
        TwistData(grid=grid3, kind=SectionKind.exact, H=KForm.zeros(grid3, 3), F=KForm.zeros(grid3, 2))


def test_algebroid_matches_twist_kind(exact_twist3, odd_twist3, factory3):
    assert isinstance(algebroid_for(exact_twist3), ExactCourantAlgebroid)
    assert isinstance(algebroid_for(odd_twist3), OddCourantAlgebroid)
    with pytest.raises(KindMismatchError):
        OddCourantAlgebroid(exact_twist3)
    with pytest.raises(KindMismatchError):
        algebroid_for(exact_twist3).bracket(factory3.odd_section(), factory3.odd_section())


def test_pairing_is_symmetric(factory3):
    s1, s2 = factory3.odd_section(), factory3.odd_section()
    assert (pairing(s1, s2) - pairing(s2, s1)).norm() <= 1e-12


def test_pairing_of_vector_and_form(grid3):
    u = ExactSection.from_vector(VectorField.constant(grid3, [1.0, 0.0, 0.0]))
    alpha = ExactSection.from_form(KForm.constant(grid3, 1, [2.0, 0.0, 0.0]))
    # ⟨u, α⟩ = α(u)/2 with u = ∂₀
    assert (pairing(u, alpha) - KForm.constant(grid3, 0, [1.0])).norm() <= 1e-12


def test_odd_sections_combine_linearly(factory3):
    s = factory3.odd_section()
    assert isinstance(2.0 * s, OddSection)
    assert (s + s - 2.0 * s).norm() <= 1e-12


def test_splitting_recovers_three_form(exact_twist3):
    algebroid = algebroid_for(exact_twist3)
    recovered = three_form_of_splitting(algebroid)
    assert (recovered - exact_twist3.H).norm() <= 1e-9 * max(1.0, exact_twist3.H.norm())


def test_shifted_splitting_adds_db(exact_twist3, factory3):
    algebroid = algebroid_for(exact_twist3)
    B = factory3.form(2, 0.5)
    shifted = three_form_of_splitting(algebroid, shifted_splitting(B))
    expected = shift_splitting(exact_twist3, B).H
    assert (shifted - expected).norm() <= 1e-9 * max(1.0, expected.norm())


def test_odd_shift_keeps_twist_closed(odd_twist3, factory3):
    shifted = shift_splitting(odd_twist3, factory3.form(2, 0.5), factory3.form(1, 0.5))
    assert shifted.is_odd
    with pytest.raises(KindMismatchError):
        shift_splitting(TwistData.exact(odd_twist3.grid), factory3.form(2), factory3.form(1))


def test_bracket_sign_convention(grid2, grid3):
    # i_u i_v H is read as i_u(i_v H) = H(v, u, .); the literal formula's printed values are +c dx2 and +1
    c = 0.7
    d0 = VectorField.constant(grid3, [1.0, 0.0, 0.0])
    d1 = VectorField.constant(grid3, [0.0, 1.0, 0.0])
    twist = TwistData.exact(grid3, H=KForm.constant(grid3, 3, [c]))
    zero = KForm.zeros(grid3, 1)
    exact = dorfman_exact(twist, ExactSection(u=d0, alpha=zero), ExactSection(u=d1, alpha=zero))
    assert (exact.alpha - KForm.constant(grid3, 1, [0.0, 0.0, -c])).norm() <= 1e-12
    assert exact.u.norm() <= 1e-12

    e0 = OddSection(u=VectorField.constant(grid2, [1.0, 0.0]), f=KForm.zeros(grid2, 0), alpha=KForm.zeros(grid2, 1))
    e1 = OddSection(u=VectorField.constant(grid2, [0.0, 1.0]), f=KForm.zeros(grid2, 0), alpha=KForm.zeros(grid2, 1))
    odd = dorfman_odd(TwistData.odd(grid2, F=KForm.constant(grid2, 2, [1.0])), e0, e1)
    assert (odd.f - KForm.constant(grid2, 0, [-1.0])).norm() <= 1e-12
    assert odd.alpha.norm() <= 1e-12
