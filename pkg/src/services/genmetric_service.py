"""Generalized metrics in graph form and the right action of the symmetry groups on them."""
import logging
from typing import List

import numpy as np

from src.calculus.exterior import pullback, wedge
from src.errors import KindMismatchError, NotAGroupError, SubbundleError
from src.models.courant_models import SectionKind, TwistData
from src.models.fields import KForm, SymTensor2
from src.models.genmetric_models import (GenMetric, GMTangent, IsometryDefect, SubbundleFrame, two_form_from_matrix,
                                         two_form_matrix)
from src.models.symmetry_models import GroupElement
from src.services.hodge_context import compound_matrix
from src.services.symmetry_service import compose, membership_defect

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12


def _node_first(matrix: np.ndarray) -> np.ndarray:
    return np.moveaxis(matrix, (0, 1), (-2, -1))


def _component_first(matrix: np.ndarray) -> np.ndarray:
    return np.moveaxis(matrix, (-2, -1), (0, 1))


def _one_form_vector(form: KForm) -> np.ndarray:
    """Node-first covector field, shape (N, ..., N, n)."""
    return np.moveaxis(form.components, 0, -1)


def _check_kind(gel: GroupElement, V) -> None:
    if gel.kind != V.kind:
        raise KindMismatchError(f"{gel.kind} group element acting on an {V.kind} generalized metric")


def graph_frame(V: GenMetric) -> SubbundleFrame:
    """
    Frame of V₊: columns e^ω(∂_i + i_{∂_i} g), and in the odd case the image under
    T_{(ω,γ)} of ∂_i + i_{∂_i} g and of the unit function.
    """
    grid = V.grid
    n = grid.n
    graph = V.g.pointwise() + _node_first(two_form_matrix(V.omega))
    if V.gamma is None:
        vectors = np.zeros(grid.shape + (2 * n, n))
        vectors[..., :n, :] = np.eye(n)
        vectors[..., n:, :] = np.swapaxes(graph, -2, -1)
        return SubbundleFrame(grid=grid, kind=SectionKind.exact, vectors=vectors)

    gamma = _one_form_vector(V.gamma)
    vectors = np.zeros(grid.shape + (2 * n + 1, n + 1))
    vectors[..., :n, :n] = np.eye(n)
    vectors[..., n, :n] = gamma
    vectors[..., n + 1:, :n] = np.swapaxes(graph, -2, -1) - gamma[..., :, None] * gamma[..., None, :]
    vectors[..., n, n] = 1.0
    vectors[..., n + 1:, n] = -2.0 * gamma
    return SubbundleFrame(grid=grid, kind=SectionKind.odd, vectors=vectors)


def from_subbundle(frame: SubbundleFrame) -> GenMetric:
    """
    Recover (g, ω[, γ]) from any frame of a positive graph-type subbundle.
    :raises SubbundleError: when the projection to TM (⊕ R) is singular or g fails positivity.
    """
    grid = frame.grid
    n = grid.n
    top_rows = n + 1 if frame.kind == SectionKind.odd else n
    top = frame.vectors[..., :top_rows, :]
    condition = np.linalg.cond(top)
    if not np.all(np.isfinite(condition)) or np.max(condition) > CONDITION_LIMIT:
        raise SubbundleError(f"projection of the frame is rank deficient (condition {np.max(condition):.3e})")
    normalized = frame.vectors @ np.linalg.inv(top)
    M = normalized[..., top_rows:, :n]

    gamma = None
    graph = np.swapaxes(M, -2, -1)
    if frame.kind == SectionKind.odd:
        gamma_values = -0.5 * normalized[..., top_rows:, n]
        graph = graph - gamma_values[..., :, None] * gamma_values[..., None, :]
        gamma = KForm(grid=grid, degree=1, components=np.moveaxis(gamma_values, -1, 0))

    g = SymTensor2(grid=grid, matrix=_component_first(0.5 * (graph + np.swapaxes(graph, -2, -1))))
    if not g.is_positive_definite():
        raise SubbundleError("subbundle is not positive: recovered metric fails positivity")
    omega = two_form_from_matrix(grid, _component_first(graph))
    return GenMetric(g=g, omega=omega, gamma=gamma)


def act(gel: GroupElement, V: GenMetric) -> GenMetric:
    """
    Right action: exact (φ*g, φ*ω - B); odd (φ*g, (φ*ω - B - A∧φ*γ, φ*γ - A)).
    """
    _check_kind(gel, V)
    g = pullback(gel.phi, V.g)
    omega = pullback(gel.phi, V.omega) - gel.B
    if V.gamma is None:
        return GenMetric(g=g, omega=omega)
    pulled_gamma = pullback(gel.phi, V.gamma)
    return GenMetric(g=g, omega=omega - wedge(gel.A, pulled_gamma), gamma=pulled_gamma - gel.A)


def _b_field_matrix(frame: SubbundleFrame, B: KForm, A=None) -> np.ndarray:
    """Pointwise matrix of u + f + α ↦ u + (f + i_uA) + (α + i_uB - (i_uA)A - 2fA)."""
    grid = frame.grid
    n = grid.n
    dimension = frame.fibre_dimension
    offset = n + 1 if A is not None else n
    transform = np.zeros(grid.shape + (dimension, dimension))
    transform[..., :, :] = np.eye(dimension)
    transform[..., offset:, :n] += np.swapaxes(_node_first(two_form_matrix(B)), -2, -1)
    if A is not None:
        a = _one_form_vector(A)
        transform[..., n, :n] += a
        transform[..., offset:, :n] -= a[..., :, None] * a[..., None, :]
        transform[..., offset:, n] -= 2.0 * a
    return transform


def act_frame(gel: GroupElement, frame: SubbundleFrame) -> SubbundleFrame:
    """
    Inverse image F⁻¹(V₊) of a subbundle under the section action of gel, i.e.
    T_{(-B,-A)} applied after the pointwise pullback by φ.
    """
    if gel.kind != frame.kind:
        raise KindMismatchError(f"{gel.kind} group element acting on an {frame.kind} frame")
    n = frame.grid.n
    A = gel.phi.matrix.astype(float)
    fibre = np.eye(frame.fibre_dimension)
    offset = n + 1 if gel.A is not None else n
    fibre[:n, :n] = np.linalg.inv(A)
    fibre[offset:, offset:] = A.T
    pulled = np.einsum("ij,...jr->...ir", fibre, frame.vectors[gel.phi.node_map()])
    minus_A = None if gel.A is None else -gel.A
    transform = _b_field_matrix(frame, -gel.B, minus_A)
    return SubbundleFrame(grid=frame.grid, kind=frame.kind, vectors=transform @ pulled)


def isometry_defect(twist: TwistData, gel: GroupElement, V: GenMetric) -> IsometryDefect:
    _check_kind(gel, V)
    metric = (pullback(gel.phi, V.g) - V.g).norm()
    action = act(gel, V).difference(V).norm()
    return IsometryDefect(membership=max(membership_defect(twist, gel)), metric=metric, action=action)


def _same_element(g1: GroupElement, g2: GroupElement, tolerance: float) -> bool:
    if g1.phi.key != g2.phi.key:
        return False
    distance = (g1.B - g2.B).norm()
    if g1.A is not None:
        distance += (g1.A - g2.A).norm()
    return distance <= tolerance


def check_group(group: List[GroupElement], tolerance: float = 1e-9) -> None:
    """:raises NotAGroupError: when the list is not closed under the product."""
    for g1 in group:
        for g2 in group:
            product = compose(g1, g2)
            if not any(_same_element(product, candidate, tolerance) for candidate in group):
                raise NotAGroupError(f"product of {g1.phi.key} and {g2.phi.key} is not in the list")


def average(group: List[GroupElement], V: GenMetric, tolerance: float = 1e-9) -> GenMetric:
    """Mean of the orbit of V; invariant because the action is affine in (g, ω, γ)."""
    if not group:
        raise NotAGroupError("cannot average over an empty list")
    check_group(group, tolerance)
    images = [act(gel, V) for gel in group]
    weight = 1.0 / len(images)
    g = images[0].g * weight
    omega = images[0].omega * weight
    gamma = None if V.gamma is None else images[0].gamma * weight
    for image in images[1:]:
        g = g + image.g * weight
        omega = omega + image.omega * weight
        if gamma is not None:
            gamma = gamma + image.gamma * weight
    logger.debug(f"averaged a generalized metric over {len(group)} elements")
    return GenMetric(g=g, omega=omega, gamma=gamma)


def tangent_pushforward(gel: GroupElement, t: GMTangent) -> GMTangent:
    """Differential of the action: (φ*ġ, φ*ω̇ [- A∧φ*γ̇], φ*γ̇)."""
    if gel.kind != t.kind:
        raise KindMismatchError(f"{gel.kind} group element with an {t.kind} tangent")
    g_dot = pullback(gel.phi, t.g_dot)
    omega_dot = pullback(gel.phi, t.omega_dot)
    if t.gamma_dot is None:
        return GMTangent(g_dot=g_dot, omega_dot=omega_dot)
    gamma_dot = pullback(gel.phi, t.gamma_dot)
    return GMTangent(g_dot=g_dot, omega_dot=omega_dot - wedge(gel.A, gamma_dot), gamma_dot=gamma_dot)


def nodal_wedge(alpha: KForm, beta: KForm) -> KForm:
    """Undealiased α∧β of two 1-forms, evaluated node by node."""
    components = [alpha.components[i] * beta.components[j] - alpha.components[j] * beta.components[i]
                  for i, j in alpha.grid.multi_indices(2)]
    return KForm(grid=alpha.grid, degree=2, components=np.stack(components))


def tangent_inner(V: GenMetric, t1: GMTangent, t2: GMTangent) -> float:
    """
    Invariant weak metric: ∫ ⟨ω̇₁ - γ∧γ̇₁, ω̇₂ - γ∧γ̇₂⟩_g + ⟨γ̇₁, γ̇₂⟩_g + tr(g⁻¹ġ₁g⁻¹ġ₂) dvol_g,
    with γ = 0 terms dropped in the exact case.
    The integrand is evaluated at the nodes, matching the twisted Gram matrix of the slice operators.
    """
    if not V.kind == t1.kind == t2.kind:
        raise KindMismatchError("generalized metric and tangents of different kinds")
    grid = V.grid
    pointwise = V.g.pointwise()
    inverse = np.linalg.inv(pointwise)
    density = np.sqrt(np.linalg.det(pointwise))

    def form_inner(alpha: KForm, beta: KForm) -> np.ndarray:
        raised = _component_first(compound_matrix(inverse, alpha.degree))
        return np.einsum("i...,ij...,j...->...", alpha.components, raised, beta.components)

    omega1, omega2 = t1.omega_dot, t2.omega_dot
    density_terms = np.zeros(grid.shape)
    if V.gamma is not None:
        omega1 = omega1 - nodal_wedge(V.gamma, t1.gamma_dot)
        omega2 = omega2 - nodal_wedge(V.gamma, t2.gamma_dot)
        density_terms = density_terms + form_inner(t1.gamma_dot, t2.gamma_dot)
    density_terms = density_terms + form_inner(omega1, omega2)
    left = inverse @ t1.g_dot.pointwise()
    right = inverse @ t2.g_dot.pointwise()
    density_terms = density_terms + np.einsum("...ij,...ji->...", left, right)
    return float(grid.cell_volume * np.sum(density_terms * density))
