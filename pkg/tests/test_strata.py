import numpy as np
import pytest

from src.errors import KindMismatchError, NotAGroupError, ResourceGuardError
from src.models.affine import AffineDiffeo
from src.models.courant_models import SectionKind, TwistData
from src.models.fields import KForm, SymTensor2
from src.models.genmetric_models import GenMetric
from src.models.strata_models import FiniteSymmetryGroup
from src.models.symmetry_models import GroupElement
from src.services.strata_service import StrataService
from src.services.suite_runner import ROTATIONS
from tests.conftest import mode_form


@pytest.fixture(scope="module")
def service(matrix_grid2):
    return StrataService(TwistData.exact(matrix_grid2))


@pytest.fixture(scope="module")
def flat(matrix_grid2):
    return GenMetric.flat(matrix_grid2)


@pytest.fixture(scope="module")
def stripe(matrix_grid2):
    return GenMetric(g=SymTensor2.flat(matrix_grid2), omega=mode_form(matrix_grid2, 2, ((0, 1), (1, 0), 0.5)))


@pytest.fixture(scope="module")
def bump(matrix_grid2):
    matrix = SymTensor2.flat(matrix_grid2).matrix.copy()
    matrix[0, 0] = matrix[0, 0] + 0.2 * np.cos(matrix_grid2.coordinates()[1])
    return GenMetric(g=SymTensor2(grid=matrix_grid2, matrix=matrix), omega=KForm.zeros(matrix_grid2, 2))


@pytest.fixture(scope="module")
def flat_pool(service, flat):
    return service.candidate_pool(flat.g, translation_step=4)


def rotations(grid):
    rotation = AffineDiffeo.from_arrays(grid, np.array(ROTATIONS[grid.n]))
    cyclic, power = [], AffineDiffeo.identity(grid)
    for _ in range(4):
        cyclic.append(power)
        power = power.compose(rotation)
    return cyclic


def test_flat_pool_is_signed_permutations_and_half_shifts(flat_pool):
    assert len(flat_pool) == 8 * 4


def test_pool_guard(matrix_grid2, flat):
    with pytest.raises(ResourceGuardError):
        StrataService(TwistData.exact(matrix_grid2), max_pool=10).candidate_pool(flat.g, translation_step=4)


def test_b_fields_absorb_the_two_form(service, flat, stripe, flat_pool):
    assert service.isometry_group(flat, flat_pool).order == 32
    group = service.isometry_group(stripe, flat_pool)
    assert group.order == 32
    identity = group.elements[0]
    assert identity.phi.is_identity()
    assert identity.B.norm() <= 1e-12


def test_metric_bump_breaks_symmetry(service, flat, bump, flat_pool):
    group = service.isometry_group(bump, service.candidate_pool(bump.g, translation_step=4))
    assert group.order == 8
    assert service.isometry_group(flat, flat_pool).contains_diffeos(group)
    assert service.metric_isometry_group(bump, group.projection()).order == 8


def test_conjugator_makes_group_pure(service, stripe, flat_pool):
    group = service.isometry_group(stripe, flat_pool)
    C, diagnostics = service.stratum_conjugator(stripe, group)
    assert diagnostics["pure_defect"] <= 1e-8
    assert (C - stripe.omega).norm() <= 1e-10


def test_conjugator_needs_exact_data(matrix_grid2, flat_pool):
    odd = StrataService(TwistData.odd(matrix_grid2))
    V = GenMetric.flat(matrix_grid2, SectionKind.odd)
    group = odd.isometry_group(V, flat_pool)
    with pytest.raises(KindMismatchError):
        odd.stratum_conjugator(V, group)


def test_conjugate_groups_share_a_label(service, flat, stripe, bump, flat_pool):
    groups = [service.isometry_group(flat, flat_pool), service.isometry_group(stripe, flat_pool),
              service.isometry_group(bump, service.candidate_pool(bump.g, translation_step=4))]
    linear = [phi for phi in flat_pool if not any(phi.shift)]
    labels = service.conjugacy_classify(groups, service.conjugator_pool(linear))
    assert labels[0].class_index == labels[1].class_index
    assert labels[2].class_index != labels[0].class_index
    assert labels[0].table_hash == labels[1].table_hash


def test_conjugation_identity(service, stripe, flat_pool, matrix_grid2):
    psi = AffineDiffeo.from_arrays(matrix_grid2, np.array(ROTATIONS[2]), [4, 0])
    C = mode_form(matrix_grid2, 2, ((0, 1), (1, 1), 0.3))
    result = service.conjugation_identity_check(stripe, psi, C, flat_pool)
    assert result["set_mismatch"] == 0.0
    assert result["order"] == 32.0


def test_invariant_perturbation_separates_strata(service, flat, flat_pool):
    linear = [phi for phi in flat_pool if not any(phi.shift)]
    larger = service.isometry_group(flat, linear)
    smaller = FiniteSymmetryGroup.from_elements([service.isometry_element(phi, flat)
                                                 for phi in rotations(flat.grid)])
    result = service.invariant_perturbation(flat, smaller, larger)
    assert result.found
    assert all(result.certificate.values())


def test_perturbation_search_needs_nested_groups(service, flat, flat_pool):
    group = service.isometry_group(flat, flat_pool)
    result = service.invariant_perturbation(flat, group, group)
    assert not result.found


def test_group_table_needs_closure(matrix_grid2):
    quarter = rotations(matrix_grid2)[:2]
    with pytest.raises(NotAGroupError):
        FiniteSymmetryGroup.from_elements([GroupElement.diffeo(phi) for phi in quarter])


def test_cyclic_group_orders(matrix_grid2):
    group = FiniteSymmetryGroup.from_elements([GroupElement.diffeo(phi) for phi in rotations(matrix_grid2)])
    assert sorted(group.element_orders()) == [1, 2, 4, 4]


def test_moduli_projection_rows(service, flat, bump):
    rows = service.moduli_projection_report([(service.twist, flat), (service.twist, bump)], pool_step=4)
    assert [row["isom_order"] for row in rows] == [32, 8]
    assert all(row["projects_into_metric_isometries"] for row in rows)
    assert rows[0]["isom_class_label"] != rows[1]["isom_class_label"]


def test_moduli_projection_merges_conjugate_stripes(service, stripe, matrix_grid2):
    turned = GenMetric(g=SymTensor2.flat(matrix_grid2), omega=mode_form(matrix_grid2, 2, ((0, 1), (0, 1), 0.5)))
    rows = service.moduli_projection_report([(service.twist, stripe), (service.twist, turned)], pool_step=4)
    assert [row["isom_order"] for row in rows] == [32, 32]
    assert all(row["conjugator_found"] for row in rows)
    assert rows[0]["isom_class_label"] == rows[1]["isom_class_label"]
    assert rows[0]["projection_class"] == rows[1]["projection_class"]
