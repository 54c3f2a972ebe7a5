import numpy as np
import pytest

from src.errors import KindMismatchError, ResourceGuardError
from src.models.courant_models import SectionKind, TwistData
from src.models.fields import KForm, SymTensor2
from src.models.genmetric_models import GenMetric, GMTangent
from src.services.genmetric_service import tangent_inner
from src.services.hodge_context import HodgeContext
from src.services.slice_service import SliceService
from tests.conftest import mode_form


@pytest.fixture(scope="module")
def reference(matrix_grid2):
    return HodgeContext(SymTensor2.flat(matrix_grid2))


@pytest.fixture(scope="module")
def exact_slice(matrix_grid2, reference):
    V = GenMetric(g=SymTensor2.flat(matrix_grid2), omega=mode_form(matrix_grid2, 2, ((0, 1), (1, 0), 0.3)))
    return SliceService(V, TwistData.exact(matrix_grid2), reference)


@pytest.fixture(scope="module")
def odd_slice(matrix_grid2, reference):
    V = GenMetric(g=SymTensor2.flat(matrix_grid2), omega=KForm.zeros(matrix_grid2, 2),
                  gamma=mode_form(matrix_grid2, 1, ((1,), (1, 0), 0.2)))
    twist = TwistData.odd(matrix_grid2, F=KForm.constant(matrix_grid2, 2, [0.5]))
    return SliceService(V, twist, reference)


@pytest.fixture(scope="module")
def exact_complex(exact_slice):
    return exact_slice.assemble_complex(SliceService.Complexes.exact)


def test_assembled_matrix_matches_operator(exact_slice, exact_complex):
    _, A = exact_complex
    rng = np.random.default_rng(1)
    assert exact_slice.probe_residual(A, exact_slice.functional(A.name), 3, rng) <= 1e-7


def test_gram_adjoint(exact_slice, exact_complex):
    _, A = exact_complex
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal(A.domain.dimension), rng.standard_normal(A.codomain.dimension)
    adjoint = exact_slice.adjoint(A)
    left = y @ A.codomain.gram @ (A @ x)
    right = (adjoint @ y) @ A.domain.gram @ x
    assert left == pytest.approx(right, rel=1e-8, abs=1e-8)


def test_exact_complex_decomposes(exact_slice, exact_complex):
    B, A = exact_complex
    report = exact_slice.decomposition_report(B, A, 1e-7)
    assert report.passed, report.residuals
    assert report.rank + report.kernel_dim == A.domain.dimension
    assert report.dict(by_alias=True)["pass"]


def test_orbit_projector_is_self_adjoint(exact_slice, exact_complex):
    B, A = exact_complex
    projector = exact_slice.orbit_projector(A, exact_slice.complex_green(A, B))
    weighted = A.codomain.gram @ projector.matrix
    assert np.linalg.norm(weighted - weighted.T) <= 1e-8 * max(1.0, np.linalg.norm(weighted))
    rank = exact_slice.svd(exact_slice.orthonormal_matrix(A), A.name)[0]
    assert np.trace(projector.matrix) == pytest.approx(rank, abs=0.5)


def test_full_group_splits_codomain(exact_slice, exact_complex, reference):
    _, A = exact_complex
    harmonic = reference.harmonic_basis(2)
    split = exact_slice.full_group_decomposition(A, harmonic, np.random.default_rng(3))
    assert all(value <= 1e-7 for value in split.residuals.values()), split.residuals
    assert split.f_dimension <= len(harmonic)
    direct = exact_slice.direct_sum_checks(exact_slice.assemble(SliceService.Operators.A_full), A, harmonic, 1e-7)
    assert direct.passed, direct.residuals


def test_odd_complex_decomposes(odd_slice):
    B, A = odd_slice.assemble_complex(SliceService.Complexes.odd)
    assert odd_slice.complex_check(B, A) <= 1e-8
    assert odd_slice.decomposition_report(B, A, 1e-7).passed


def test_twisted_gram_matches_quadrature(odd_slice):
    tangents = odd_slice.descriptor("odd_metric_tangents")
    rng = np.random.default_rng(4)
    x, y = rng.standard_normal(tangents.dimension), rng.standard_normal(tangents.dimension)
    t1 = GMTangent(**dict(zip(("g_dot", "omega_dot", "gamma_dot"), odd_slice.to_fields(tangents, x))))
    t2 = GMTangent(**dict(zip(("g_dot", "omega_dot", "gamma_dot"), odd_slice.to_fields(tangents, y))))
    quadrature = tangent_inner(odd_slice.V, t1, t2)
    assert x @ odd_slice.twisted_gram() @ y == pytest.approx(quadrature, rel=1e-9, abs=1e-9)


def test_twisted_differential_squares_to_zero(odd_slice):
    first, second = odd_slice.assemble_complex(SliceService.Complexes.dF_complex)
    assert odd_slice.complex_check(first, second) <= 1e-8
    dimension = odd_slice.twisted_cohomology_dimension(first, second)
    assert dimension == odd_slice.derivations.complement_dimension() == 2


def test_operators_follow_the_twist_kind(exact_slice, odd_slice):
    with pytest.raises(KindMismatchError):
        exact_slice.assemble(SliceService.Operators.A_odd)
    with pytest.raises(KindMismatchError):
        odd_slice.assemble(SliceService.Operators.A_exact)
    with pytest.raises(KindMismatchError):
        exact_slice.twisted_gram()
    with pytest.raises(ValueError):
        exact_slice.assemble("A_unknown")


def test_matrix_size_guard(matrix_grid2, reference):
    V = GenMetric.flat(matrix_grid2, SectionKind.exact)
    service = SliceService(V, TwistData.exact(matrix_grid2), reference, max_matrix_entries=100)
    with pytest.raises(ResourceGuardError):
        service.assemble(SliceService.Operators.A_exact)
