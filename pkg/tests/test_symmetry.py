import numpy as np
import pytest

from src.calculus.exterior import ext_deriv, pullback
from src.errors import KindMismatchError, NotADerivationError
from src.models.affine import AffineDiffeo
from src.models.courant_models import OddSection, SectionKind, TwistData
from src.models.fields import KForm, SymTensor2, VectorField
from src.models.grid_models import make_grid
from src.models.run_config import RunConfig
from src.models.symmetry_models import Derivation, GroupElement
from src.services.hodge_context import HodgeContext
from src.services.suite_runner import SuiteRunner, signed_permutations
from src.services.symmetry_service import (DerivationService, act_section, compose, conjugate, inverse,
                                           membership_defect)
from src.utils.random_fields import RandomFieldFactory


def element_gap(g1, g2):
    assert g1.phi.key == g2.phi.key
    gap = (g1.B - g2.B).norm()
    if g1.A is not None:
        gap += (g1.A - g2.A).norm()
    return gap


def random_element(factory, kind):
    grid = factory.grid
    matrix = signed_permutations(grid.n)[int(factory.rng.integers(0, 2 ** grid.n))]
    phi = AffineDiffeo.from_arrays(grid, matrix, factory.rng.integers(0, grid.N, size=grid.n))
    A = factory.form(1, 0.5) if kind == SectionKind.odd else None
    return GroupElement(phi=phi, B=factory.form(2, 0.5), A=A)


@pytest.fixture(scope="module")
def runner3():
    return SuiteRunner(RunConfig(n=3, N=12))


@pytest.mark.parametrize("kind", [SectionKind.exact, SectionKind.odd])
def test_group_laws(factory3, kind):
    g1, g2, g3 = (random_element(factory3, kind) for _ in range(3))
    assert element_gap(compose(compose(g1, g2), g3), compose(g1, compose(g2, g3))) <= 1e-10
    assert element_gap(compose(g1, inverse(g1)), GroupElement.identity(factory3.grid, kind)) <= 1e-10


@pytest.mark.parametrize("kind", [SectionKind.exact, SectionKind.odd])
def test_action_on_sections_is_a_left_action(factory3, kind):
    g1, g2 = random_element(factory3, kind), random_element(factory3, kind)
    s = factory3.odd_section() if kind == SectionKind.odd else factory3.exact_section()
    gap = (act_section(compose(g1, g2), s) - act_section(g1, act_section(g2, s))).norm()
    assert gap <= 1e-10 * max(1.0, s.norm())


def test_conjugation_by_a_b_field(factory3):
    g = random_element(factory3, SectionKind.exact)
    C = factory3.form(2, 0.5)
    expected = GroupElement(phi=g.phi, B=g.B + C - pullback(g.phi, C))
    assert element_gap(conjugate(g, GroupElement.b_field(C)), expected) <= 1e-10


def test_mixed_kinds_do_not_compose(factory3):
    with pytest.raises(KindMismatchError):
        compose(random_element(factory3, SectionKind.exact), random_element(factory3, SectionKind.odd))


def test_group_element_json_round_trip(factory3):
    g = random_element(factory3, SectionKind.odd)
    restored = GroupElement.from_json_dict(factory3.grid, g.to_json_dict())
    assert element_gap(g, restored) <= 1e-10


@pytest.mark.parametrize("fixture", ["exact_twist3", "odd_twist3"])
def test_sampled_members_are_closed_under_products(request, runner3, factory3, fixture):
    twist = request.getfixturevalue(fixture)
    m1, m2 = runner3.random_member(factory3, twist), runner3.random_member(factory3, twist)
    scale = max(1.0, twist.H.norm())
    assert max(membership_defect(twist, m1)) <= 1e-8 * scale
    assert max(membership_defect(twist, compose(m1, m2))) <= 1e-8 * scale
    assert max(membership_defect(twist, inverse(m2))) <= 1e-8 * scale


def test_conjugated_members_match_shifted_twist(runner3, factory3, exact_twist3):
    member = runner3.random_member(factory3, exact_twist3)
    psi = AffineDiffeo.from_arrays(factory3.grid, signed_permutations(3)[3], [4, 0, 1])
    C = factory3.form(2, 0.5)
    shifted = TwistData.exact(factory3.grid, H=pullback(psi, exact_twist3.H) - ext_deriv(C))
    assert max(membership_defect(shifted, conjugate(member, GroupElement(phi=psi, B=C)))) <= 1e-8


@pytest.fixture
def exact_derivations(exact_twist3, flat_hodge3):
    return DerivationService(exact_twist3, flat_hodge3)


@pytest.fixture
def odd_derivations(odd_twist3, flat_hodge3):
    return DerivationService(odd_twist3, flat_hodge3)


def test_iota_e_gives_exact_derivations(exact_derivations, factory3):
    D = exact_derivations.iota_e(factory3.exact_section(0.5))
    assert exact_derivations.is_derivation(D)
    assert exact_derivations.exactness_defect(D).is_exact()


def test_iota_e_odd_uses_consistent_sign(odd_derivations, factory3):
    s = factory3.odd_section(0.5)
    D = odd_derivations.iota_e(s)
    assert odd_derivations.is_derivation(D)
    assert odd_derivations.exactness_defect(D).is_exact()
    diagnostics = odd_derivations.convention_diagnostics(s, factory3.form(2, 0.5), factory3.form(1, 0.5))
    consistent = {name: value for name, value in diagnostics.items() if name.endswith("_consistent")}
    assert all(value <= 1e-8 for value in consistent.values()), consistent


@pytest.mark.parametrize("services", ["exact_derivations", "odd_derivations"])
def test_right_inverse_of_iota_e(request, factory3, services):
    service = request.getfixturevalue(services)
    s = factory3.odd_section(0.5) if service.twist.is_odd else factory3.exact_section(0.5)
    D = service.iota_e(s)
    assert (service.iota_e(service.iota_e_inv(D)) - D).norm() <= 1e-8 * max(1.0, D.norm())


def test_split_recovers_harmonic_part(exact_derivations, factory3):
    h = exact_derivations.from_coordinates([0.75, -0.5, 0.25], 2)
    D = exact_derivations.iota_e(factory3.exact_section(0.5)) + exact_derivations.complement_element(h)
    exact_part, harmonic = exact_derivations.split_derivation(D)
    assert (harmonic - h).norm() <= 1e-8
    assert exact_derivations.exactness_defect(exact_part).is_exact()


def test_odd_split_recovers_harmonic_parts(odd_derivations, factory3):
    # h(F) ∝ 0.5 dx01 - 0.25 dx12: h2 is orthogonal to it and h1∧h(F) = 0
    h2 = odd_derivations.from_coordinates([0.25, 0.5, 0.5], 2)
    h1 = odd_derivations.from_coordinates([0.5, -0.5, 0.25], 1)
    complement = odd_derivations.complement_element(h2, h1)
    assert odd_derivations.is_derivation(complement)
    D = odd_derivations.iota_e(factory3.odd_section(0.5)) + complement
    exact_part, (recovered_h2, recovered_h1) = odd_derivations.split_derivation(D)
    assert (recovered_h1 - h1).norm() <= 1e-8
    assert (recovered_h2 - h2).norm() <= 1e-8
    assert odd_derivations.exactness_defect(exact_part).is_exact()
    assert (exact_part + odd_derivations.complement_element(recovered_h2, recovered_h1) - D).norm() <= 1e-8


@pytest.fixture(scope="module")
def constant_f_derivations():
    grid = make_grid(3, 8)
    twist = TwistData.odd(grid, F=KForm.constant(grid, 2, [0.5, 0.0, 0.0]))
    return DerivationService(twist, HodgeContext(SymTensor2.flat(grid)))


def test_complement_rejects_h1_wedging_into_f(constant_f_derivations):
    service = constant_f_derivations
    h1 = service.from_coordinates([0.0, 0.0, 1.0], 1)
    defect = service.derivation_defect(Derivation.pure_form(KForm.zeros(service.grid, 2), h1))
    assert defect[0] > 0.5
    with pytest.raises(NotADerivationError):
        service.complement_element(KForm.zeros(service.grid, 2), h1)


def test_complement_coordinates_drop_obstructed_directions(constant_f_derivations):
    service = constant_f_derivations
    two, one = service.complement_coordinates([1.0, 1.0, 1.0], [1.0, 1.0, 1.0])
    np.testing.assert_allclose(two, [0.0, 1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(one, [1.0, 1.0, 0.0], atol=1e-12)
    assert service.complement_dimension() == 4
    h2, h1 = service.from_coordinates(two, 2), service.from_coordinates(one, 1)
    assert service.is_derivation(service.complement_element(h2, h1))


def test_constant_f_section_is_exact(constant_f_derivations):
    grid = constant_f_derivations.grid
    s = OddSection(u=VectorField.zeros(grid), f=KForm.constant(grid, 0, [1.0]), alpha=KForm.zeros(grid, 1))
    D = constant_f_derivations.iota_e(s)
    assert constant_f_derivations.is_derivation(D)
    assert constant_f_derivations.exactness_defect(D).is_exact()


def test_split_with_harmonic_twist(constant_f_derivations):
    service = constant_f_derivations
    factory = RandomFieldFactory(service.grid, seed=5)
    h2 = service.from_coordinates([0.0, 0.5, -0.25], 2)
    h1 = service.from_coordinates([0.75, -0.5, 0.0], 1)
    D = service.iota_e(factory.odd_section(0.5)) + service.complement_element(h2, h1)
    exact_part, (recovered_h2, recovered_h1) = service.split_derivation(D)
    assert (recovered_h2 - h2).norm() <= 1e-8
    assert (recovered_h1 - h1).norm() <= 1e-8
    assert service.exactness_defect(exact_part).is_exact()


def test_bracket_of_derivations_is_a_derivation(exact_derivations, factory3):
    D1 = exact_derivations.iota_e(factory3.exact_section(0.3))
    D2 = exact_derivations.iota_e(factory3.exact_section(0.3))
    assert exact_derivations.is_derivation(exact_derivations.derivation_bracket(D1, D2))


def test_non_derivation_is_rejected(grid3, flat_hodge3, factory3):
    twist = TwistData.exact(grid3, H=KForm.constant(grid3, 3, [1.0]))
    service = DerivationService(twist, flat_hodge3)
    D = Derivation(u=factory3.vector(), b=KForm.zeros(grid3, 2))
    assert not service.is_derivation(D)
    with pytest.raises(NotADerivationError):
        service.exactness_defect(D)


def test_constant_b_field_is_not_exact(exact_derivations, grid3):
    D = Derivation.pure_form(KForm.constant(grid3, 2, [1.0, 0.0, 0.0]))
    defect = exact_derivations.exactness_defect(D)
    assert not defect.is_exact()
    assert np.count_nonzero(np.abs(defect.values) > 1e-9) == 1
