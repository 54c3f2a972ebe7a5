"""Cartan calculus on band-limited fields over the flat torus."""
import logging
from functools import lru_cache
from itertools import combinations
from typing import Tuple, Union

import numpy as np

from src.calculus.spectral import spectral_basis
from src.errors import DegreeError, GridMismatchError
from src.models.affine import AffineDiffeo
from src.models.fields import KForm, SymTensor2, VectorField, scalar_field
from src.models.grid_models import FourierModeSpec, TorusGrid

logger = logging.getLogger(__name__)

Field = Union[KForm, VectorField, SymTensor2]


def _permutation_sign(sequence) -> int:
    sequence = list(sequence)
    inversions = sum(1 for a in range(len(sequence)) for b in range(a + 1, len(sequence))
                     if sequence[a] > sequence[b])
    return -1 if inversions % 2 else 1


@lru_cache(maxsize=None)
def _coboundary_terms(n: int, k: int) -> Tuple[Tuple[int, int, int, int], ...]:
    """(output index, input index, axis, sign) of (dα)_I = Σ_p (-1)^p ∂_{i_p} α_{I without i_p}."""
    inputs = list(combinations(range(n), k))
    terms = []
    for out, multi_index in enumerate(combinations(range(n), k + 1)):
        for position, axis in enumerate(multi_index):
            rest = multi_index[:position] + multi_index[position + 1:]
            terms.append((out, inputs.index(rest), axis, -1 if position % 2 else 1))
    return tuple(terms)


@lru_cache(maxsize=None)
def _wedge_terms(n: int, p: int, q: int) -> Tuple[Tuple[int, int, int, int], ...]:
    outputs = list(combinations(range(n), p + q))
    terms = []
    for a, left in enumerate(combinations(range(n), p)):
        for b, right in enumerate(combinations(range(n), q)):
            if set(left) & set(right):
                continue
            merged = left + right
            terms.append((outputs.index(tuple(sorted(merged))), a, b, _permutation_sign(merged)))
    return tuple(terms)


@lru_cache(maxsize=None)
def _interior_terms(n: int, k: int) -> Tuple[Tuple[int, int, int, int], ...]:
    """(output index, vector component, input index, sign) of i_u on k-forms."""
    inputs = list(combinations(range(n), k))
    terms = []
    for out, rest in enumerate(combinations(range(n), k - 1)):
        for i in range(n):
            if i in rest:
                continue
            merged = tuple(sorted(rest + (i,)))
            terms.append((out, i, inputs.index(merged), -1 if merged.index(i) % 2 else 1))
    return tuple(terms)


def _same_grid(*fields):
    grid = fields[0].grid
    for field in fields[1:]:
        if field.grid != grid:
            raise GridMismatchError(f"fields on different grids: {grid} and {field.grid}")
    return grid


def sample(spec: FourierModeSpec, grid: TorusGrid) -> KForm:
    if not 0 <= spec.degree <= grid.n:
        raise DegreeError(f"form degree {spec.degree} outside 0..{grid.n}")
    indices = grid.multi_indices(spec.degree)
    coordinates = np.stack(grid.coordinates())
    components = np.zeros((len(indices),) + grid.shape)
    for mode in spec.modes:
        if len(mode.component) != spec.degree or tuple(mode.component) not in indices:
            raise DegreeError(f"component {mode.component} is not a degree-{spec.degree} multi-index on T^{grid.n}")
        wavevector = np.asarray(mode.wavevector, dtype=int)
        if wavevector.shape != (grid.n,):
            raise ValueError(f"wavevector {mode.wavevector} does not match dimension {grid.n}")
        if np.any(np.abs(wavevector) > grid.bandwidth):
            raise ValueError(f"aliased wavevector {mode.wavevector}: entries must not exceed {grid.bandwidth}")
        phase = np.tensordot(wavevector, coordinates, axes=1) + mode.phase
        components[indices.index(tuple(mode.component))] += mode.amplitude * np.cos(phase)
    return KForm(grid=grid, degree=spec.degree, components=components)


def ext_deriv(omega: KForm) -> KForm:
    grid = omega.grid
    if omega.degree >= grid.n:
        raise DegreeError(f"exterior derivative of a top-degree ({omega.degree}) form")
    basis = spectral_basis(grid.n, grid.N)
    derivatives = np.stack([basis.derivative(omega.components, axis) for axis in range(grid.n)])
    result = KForm.zeros(grid, omega.degree + 1).components.copy()
    for out, source, axis, sign in _coboundary_terms(grid.n, omega.degree):
        result[out] += sign * derivatives[axis, source]
    return KForm(grid=grid, degree=omega.degree + 1, components=result)


def ext_deriv_transpose(beta: KForm) -> KForm:
    """Nodal transpose of d: maps (k+1)-forms to k-forms, (dᵀβ)_J = -Σ sign ∂_i β_I."""
    grid = beta.grid
    if beta.degree == 0:
        raise DegreeError("transpose of d applied to a degree-0 form")
    basis = spectral_basis(grid.n, grid.N)
    result = KForm.zeros(grid, beta.degree - 1).components.copy()
    for out, source, axis, sign in _coboundary_terms(grid.n, beta.degree - 1):
        result[source] -= sign * basis.derivative(beta.components[out], axis)
    return KForm(grid=grid, degree=beta.degree - 1, components=result)


def ext_deriv_or_zero(omega: KForm) -> KForm:
    """dω, returning the zero form when the degree leaves no room."""
    if omega.degree >= omega.grid.n:
        return KForm.zeros(omega.grid, omega.degree + 1)
    return ext_deriv(omega)


def closure_norm(omega: KForm) -> float:
    """‖dω‖, with d of a top-degree form taken as zero."""
    if omega.degree >= omega.grid.n:
        return 0.0
    return ext_deriv(omega).norm()


def wedge(alpha: KForm, beta: KForm) -> KForm:
    grid = _same_grid(alpha, beta)
    degree = alpha.degree + beta.degree
    if degree > grid.n:
        raise DegreeError(f"wedge of degrees {alpha.degree} and {beta.degree} exceeds dimension {grid.n}")
    basis = spectral_basis(grid.n, grid.N)
    result = KForm.zeros(grid, degree).components.copy()
    for out, a, b, sign in _wedge_terms(grid.n, alpha.degree, beta.degree):
        result[out] += sign * basis.product(alpha.components[a], beta.components[b])
    return KForm(grid=grid, degree=degree, components=result)


def wedge_or_zero(alpha: KForm, beta: KForm) -> KForm:
    if alpha.degree + beta.degree > alpha.grid.n:
        _same_grid(alpha, beta)
        return KForm.zeros(alpha.grid, alpha.degree + beta.degree)
    return wedge(alpha, beta)


def multiply(f: KForm, omega: KForm) -> KForm:
    """f·ω for a scalar f."""
    if f.degree != 0:
        raise DegreeError(f"multiplier must be a scalar, got degree {f.degree}")
    return wedge(f, omega)


def interior(u: VectorField, omega: KForm) -> KForm:
    grid = _same_grid(u, omega)
    if omega.degree == 0:
        raise DegreeError("interior product of a degree-0 form")
    basis = spectral_basis(grid.n, grid.N)
    result = KForm.zeros(grid, omega.degree - 1).components.copy()
    for out, i, source, sign in _interior_terms(grid.n, omega.degree):
        result[out] += sign * basis.product(u.components[i], omega.components[source])
    return KForm(grid=grid, degree=omega.degree - 1, components=result)


def lie_form(u: VectorField, omega: KForm) -> KForm:
    """Cartan formula L_u = i_u d + d i_u."""
    _same_grid(u, omega)
    if omega.degree > omega.grid.n:
        return omega
    if omega.degree == 0:
        return interior(u, ext_deriv(omega))
    result = ext_deriv(interior(u, omega))
    if omega.degree < omega.grid.n:
        result = result + interior(u, ext_deriv(omega))
    return result


def lie_sym(u: VectorField, g: SymTensor2) -> SymTensor2:
    """(L_u g)_ij = u^k ∂_k g_ij + g_kj ∂_i u^k + g_ik ∂_j u^k."""
    grid = _same_grid(u, g)
    basis = spectral_basis(grid.n, grid.N)
    n = grid.n
    dg = [basis.derivative(g.matrix, axis) for axis in range(n)]
    du = [basis.derivative(u.components, axis) for axis in range(n)]
    result = np.zeros_like(g.matrix)
    for i in range(n):
        for j in range(i, n):
            total = sum(basis.product(u.components[k], dg[k][i, j]) for k in range(n))
            total = total + sum(basis.product(g.matrix[k, j], du[i][k]) for k in range(n))
            total = total + sum(basis.product(g.matrix[i, k], du[j][k]) for k in range(n))
            result[i, j] = total
            result[j, i] = total
    return SymTensor2(grid=grid, matrix=result)


def lie_bracket(u: VectorField, v: VectorField) -> VectorField:
    grid = _same_grid(u, v)
    basis = spectral_basis(grid.n, grid.N)
    du = [basis.derivative(u.components, axis) for axis in range(grid.n)]
    dv = [basis.derivative(v.components, axis) for axis in range(grid.n)]
    result = np.zeros_like(u.components)
    for i in range(grid.n):
        result += basis.product(u.components[i], dv[i]) - basis.product(v.components[i], du[i])
    return VectorField(grid=grid, components=result)


def pair_vector_form(u: VectorField, alpha: KForm) -> KForm:
    """Scalar u ⌟ α for a 1-form α."""
    if alpha.degree != 1:
        raise DegreeError(f"expected a 1-form, got degree {alpha.degree}")
    return interior(u, alpha)


def integrate(f: KForm) -> float:
    """∫ f dx for a scalar f with the flat volume."""
    return float(f.grid.cell_volume * np.sum(f.values))


def _minor(matrix: np.ndarray, rows, cols) -> float:
    if not rows:
        return 1.0
    return float(np.linalg.det(matrix[np.ix_(rows, cols)]))


def pullback(phi: AffineDiffeo, field: Field) -> Field:
    """
    Exact pullback by an affine lattice map: node permutation composed with the constant
    action of A on tensor indices.
    :param phi: map x -> A x + t.
    :param field: KForm, VectorField or SymTensor2 on phi's grid.
    :return: field of the same kind.
    """
    grid = _same_grid(phi, field)
    nodes = phi.node_map()
    A = phi.matrix.astype(float)

    def compose(values: np.ndarray) -> np.ndarray:
        return values[(Ellipsis,) + nodes]

    if isinstance(field, KForm):
        indices = grid.multi_indices(field.degree)
        if not indices:
            return field
        action = np.array([[_minor(A, list(J), list(I)) for J in indices] for I in indices])
        components = np.tensordot(action, compose(field.components), axes=1)
        return KForm(grid=grid, degree=field.degree, components=components)
    if isinstance(field, VectorField):
        inverse = np.linalg.inv(A)
        return VectorField(grid=grid, components=np.tensordot(inverse, compose(field.components), axes=1))
    if isinstance(field, SymTensor2):
        matrix = np.einsum("ki,kl...,lj->ij...", A, compose(field.matrix), A)
        return SymTensor2(grid=grid, matrix=matrix)
    raise TypeError(f"cannot pull back {type(field).__name__}")


def pushforward(phi: AffineDiffeo, field: Field) -> Field:
    return pullback(phi.inverse(), field)


def constant_scalar(grid: TorusGrid, value: float) -> KForm:
    return scalar_field(grid, np.full(grid.shape, float(value)))


def scale_vector(f: KForm, u: VectorField) -> VectorField:
    """f·u for a scalar f, dealiased."""
    grid = _same_grid(f, u)
    if f.degree != 0:
        raise DegreeError(f"multiplier must be a scalar, got degree {f.degree}")
    basis = spectral_basis(grid.n, grid.N)
    return VectorField(grid=grid, components=basis.product(f.values, u.components))


def mode_spec_of(form: KForm, threshold: float = 1e-12) -> FourierModeSpec:
    """Fourier analysis of a band-limited form; sample(mode_spec_of(ω), grid) reproduces ω."""
    grid = form.grid
    basis = spectral_basis(grid.n, grid.N)
    coefficients = basis.forward(form.components)
    wavevectors = basis.wavevectors.reshape(grid.n, -1).T.astype(int)
    modes = []
    for position, multi_index in enumerate(form.multi_indices):
        flat = coefficients[position].ravel()
        for wavevector, coefficient in zip(wavevectors, flat):
            if abs(coefficient) <= threshold or np.any(np.abs(wavevector) > grid.bandwidth):
                continue
            nonzero = wavevector[np.nonzero(wavevector)[0]]
            if nonzero.size == 0:
                modes.append(dict(component=list(multi_index), wavevector=wavevector.tolist(),
                                  amplitude=float(coefficient.real), phase=0.0))
            elif nonzero[0] > 0:
                modes.append(dict(component=list(multi_index), wavevector=wavevector.tolist(),
                                  amplitude=float(2.0 * abs(coefficient)), phase=float(np.angle(coefficient))))
    return FourierModeSpec(degree=form.degree, modes=modes)
