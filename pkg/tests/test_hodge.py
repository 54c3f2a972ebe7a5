from math import comb

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.calculus.exterior import ext_deriv
from src.errors import GridMismatchError
from src.models.fields import KForm, SymTensor2
from src.models.grid_models import make_grid
from src.services.hodge_context import HodgeContext, compound_matrix
from src.utils.random_fields import RandomFieldFactory


@pytest.fixture(scope="module")
def curved_hodge2(grid2):
    return HodgeContext(RandomFieldFactory(grid2, seed=5).metric(0.2))


def test_compound_matrix_of_diagonal():
    matrix = np.diag([2.0, 3.0, 5.0])
    assert_allclose(compound_matrix(matrix, 2), np.diag([6.0, 10.0, 15.0]))
    assert_allclose(compound_matrix(matrix, 3), [[30.0]])


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_flat_star_squares_to_sign(flat_hodge3, factory3, k):
    omega = factory3.form(k)
    twice = flat_hodge3.star(flat_hodge3.star(omega))
    assert (twice - (-1) ** (k * (3 - k)) * omega).norm() <= 1e-12 * max(1.0, omega.norm())


def test_metric_must_be_positive(grid2):
    with pytest.raises(ValueError):
        HodgeContext(SymTensor2.flat(grid2) * -1.0)


def test_context_rejects_forms_from_other_grids(flat_hodge2, matrix_grid2):
    with pytest.raises(GridMismatchError):
        flat_hodge2.star(KForm.zeros(matrix_grid2, 1))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_harmonic_bases_have_betti_size(flat_hodge2, curved_hodge2, k):
    assert len(flat_hodge2.harmonic_basis(k)) == comb(2, k)
    basis = curved_hodge2.harmonic_basis(k)
    gram = np.array([[curved_hodge2.l2_inner(a, b) for b in basis] for a in basis])
    assert_allclose(gram, np.eye(comb(2, k)), atol=1e-9)


def test_curved_inner_product_and_norm(curved_hodge2, factory2, grid2):
    alpha, beta = factory2.form(1), factory2.form(1)
    pointwise = curved_hodge2.g.pointwise()
    density = np.sqrt(np.linalg.det(pointwise))
    inverse = np.linalg.inv(pointwise)
    a, b = np.moveaxis(alpha.components, 0, -1), np.moveaxis(beta.components, 0, -1)
    expected = grid2.cell_volume * np.sum(density * np.einsum("...i,...ij,...j->...", a, inverse, b))
    assert curved_hodge2.l2_inner(alpha, beta) == pytest.approx(expected, rel=1e-12)
    assert curved_hodge2.l2_inner(beta, alpha) == pytest.approx(expected, rel=1e-12)
    assert curved_hodge2.norm(alpha) ** 2 == pytest.approx(curved_hodge2.l2_inner(alpha, alpha), rel=1e-12)
    assert curved_hodge2.norm(alpha) > 0.0
    f = factory2.form(0)
    volume_weighted = grid2.cell_volume * np.sum(density * f.components[0] ** 2)
    assert curved_hodge2.norm(f) == pytest.approx(np.sqrt(volume_weighted), rel=1e-12)


@pytest.mark.parametrize("k", [1, 2])
def test_codifferential_is_adjoint_of_d(curved_hodge2, factory2, k):
    alpha, beta = factory2.form(k - 1), factory2.form(k)
    left = curved_hodge2.l2_inner(ext_deriv(alpha), beta)
    right = curved_hodge2.l2_inner(alpha, curved_hodge2.codiff(beta))
    assert left == pytest.approx(right, rel=1e-8, abs=1e-9)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_hodge_decomposition_reassembles(curved_hodge2, factory2, k):
    omega = factory2.form(k)
    exact, coexact, harmonic = curved_hodge2.hodge_decompose(omega)
    assert (exact + coexact + harmonic - omega).norm() <= 1e-8 * max(1.0, omega.norm())
    pairs = [(exact, coexact), (exact, harmonic), (coexact, harmonic)]
    for a, b in pairs:
        assert abs(curved_hodge2.l2_inner(a, b)) <= 1e-8 * max(1.0, omega.norm() ** 2)


def test_green_operator_inverts_laplacian_off_harmonics(flat_hodge3, factory3):
    omega = factory3.form(2)
    target = omega - flat_hodge3.harmonic_projection(omega)
    assert (flat_hodge3.laplacian(flat_hodge3.green(omega)) - target).norm() <= 1e-9 * max(1.0, omega.norm())


def test_flat_harmonic_projection_keeps_constants(flat_hodge3, grid3):
    constant = KForm.constant(grid3, 1, [1.0, -2.0, 0.5])
    assert (flat_hodge3.harmonic_projection(constant) - constant).norm() <= 1e-10


@pytest.mark.parametrize("k, expected", [(0, 1), (1, 2), (2, 1)])
def test_laplacian_kernel_is_betti_number(k, expected):
    grid = make_grid(2, 8)
    assert HodgeContext(SymTensor2.flat(grid)).kernel_dimension(k) == expected


def test_curved_laplacian_kernel_matches_flat():
    grid = make_grid(2, 8)
    hodge = HodgeContext(RandomFieldFactory(grid, seed=3).metric(0.2))
    assert hodge.kernel_dimension(1) == 2
