import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from src.calculus.exterior import (ext_deriv, ext_deriv_transpose, interior, lie_form, mode_spec_of, pullback,
                                   sample, wedge)
from src.calculus.spectral import spectral_basis
from src.errors import DegreeError, GridMismatchError
from src.models.affine import AffineDiffeo
from src.models.fields import KForm, VectorField
from src.models.grid_models import FourierMode, FourierModeSpec, TorusGrid, make_grid
from src.services.suite_runner import signed_permutations
from tests.conftest import mode_form


@pytest.mark.parametrize("n, N", [(4, 8), (2, 9), (3, 6)])
def test_unsupported_grids_are_rejected(n, N):
    with pytest.raises(ValidationError):
        TorusGrid(n=n, N=N)


def test_sample_rejects_aliased_wavevector(grid2):
    spec = FourierModeSpec(degree=0, modes=[FourierMode(component=[], wavevector=[grid2.N // 2, 0])])
    with pytest.raises(ValueError):
        sample(spec, grid2)


def test_sample_rejects_unknown_component(grid2):
    spec = FourierModeSpec(degree=1, modes=[FourierMode(component=[2], wavevector=[0, 0])])
    with pytest.raises(DegreeError):
        sample(spec, grid2)


def test_product_is_dealiased():
    grid = make_grid(2, 8)
    basis = spectral_basis(grid.n, grid.N)
    x, _ = grid.coordinates()
    product = basis.product(np.cos(2 * x), np.cos(2 * x))
    # cos²(2x) = 1/2 + cos(4x)/2, and wavevector 4 falls outside the band of N = 8
    assert_allclose(product, 0.5 * np.ones(grid.shape), atol=1e-12)


@pytest.mark.parametrize("degree", [0, 1])
def test_d_squared_vanishes(factory3, degree):
    omega = factory3.form(degree)
    assert ext_deriv(ext_deriv(omega)).norm() <= 1e-10 * max(1.0, omega.norm())


def test_d_of_a_mode(grid2):
    f = mode_form(grid2, 0, ((), (1, 0), 1.0))
    x, _ = grid2.coordinates()
    assert_allclose(ext_deriv(f).component((0,)), -np.sin(x), atol=1e-12)
    assert_allclose(ext_deriv(f).component((1,)), 0.0, atol=1e-12)


def test_graded_leibniz_rule(factory3):
    alpha, beta = factory3.form(1), factory3.form(1)
    lhs = ext_deriv(wedge(alpha, beta))
    rhs = wedge(ext_deriv(alpha), beta) - wedge(alpha, ext_deriv(beta))
    assert (lhs - rhs).norm() <= 1e-9 * max(1.0, lhs.norm())


def test_transpose_of_d_is_nodal_adjoint(factory3):
    omega, beta = factory3.form(1), factory3.form(2)
    left = np.sum(ext_deriv(omega).components * beta.components)
    right = np.sum(omega.components * ext_deriv_transpose(beta).components)
    assert left == pytest.approx(right, rel=1e-10, abs=1e-10)


def test_interior_convention(grid3):
    omega = mode_form(grid3, 2, ((0, 1), (0, 0, 0), 1.0))
    u = VectorField.constant(grid3, [1.0, 0.0, 0.0])
    # (u ⌟ dx0∧dx1)_j = u^i ω_ij = dx1
    assert_allclose(interior(u, omega).component((1,)), 1.0, atol=1e-14)
    assert_allclose(interior(u, omega).component((0,)), 0.0, atol=1e-14)


def test_lie_derivative_of_area_form_is_divergence(grid2, factory2):
    u = factory2.vector()
    area = KForm.basis_form(grid2, (0, 1))
    basis = spectral_basis(grid2.n, grid2.N)
    divergence = sum(basis.derivative(u.components[i], i) for i in range(grid2.n))
    assert_allclose(lie_form(u, area).component((0, 1)), divergence, atol=1e-10)


def test_pullback_reverses_composition(grid3, factory3):
    permutations = signed_permutations(grid3.n)
    phi = AffineDiffeo.from_arrays(grid3, permutations[5], [1, 2, 3])
    psi = AffineDiffeo.from_arrays(grid3, permutations[17], [0, 5, 1])
    omega = factory3.form(2)
    composed = pullback(phi.compose(psi), omega)
    iterated = pullback(psi, pullback(phi, omega))
    assert (composed - iterated).norm() <= 1e-12


def test_pullback_commutes_with_d(grid3, factory3):
    phi = AffineDiffeo.from_arrays(grid3, signed_permutations(grid3.n)[9], [2, 0, 7])
    alpha = factory3.form(1)
    assert (pullback(phi, ext_deriv(alpha)) - ext_deriv(pullback(phi, alpha))).norm() <= 1e-10


def test_affine_maps_need_unit_determinant(grid2):
    with pytest.raises(ValidationError):
        AffineDiffeo.from_arrays(grid2, np.array([[2, 0], [0, 1]]))
    phi = AffineDiffeo.from_arrays(grid2, np.array([[1, 1], [0, 1]]), [3, 20])
    assert phi.shift == [3, 4]
    assert phi.compose(phi.inverse()).is_identity()


def test_mode_spec_reproduces_form(factory2):
    omega = factory2.form(1)
    assert (sample(mode_spec_of(omega), omega.grid) - omega).norm() <= 1e-10


def test_fields_on_different_grids_do_not_mix(grid2, matrix_grid2):
    with pytest.raises(GridMismatchError):
        wedge(mode_form(grid2, 1, ((0,), (0, 0), 1.0)), mode_form(matrix_grid2, 1, ((1,), (0, 0), 1.0)))
