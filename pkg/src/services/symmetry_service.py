import logging
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from src.calculus.exterior import (closure_norm, ext_deriv, ext_deriv_or_zero, interior, lie_bracket, lie_form,
                                   multiply, pullback, pushforward, wedge, wedge_or_zero)
from src.errors import KindMismatchError, NotADerivationError
from src.models.courant_models import ExactSection, OddSection, Section, SectionKind, TwistData
from src.models.fields import KForm
from src.models.reports import relative_residual
from src.models.symmetry_models import Derivation, ExactnessDefect, GroupElement
from src.services.hodge_context import HodgeContext

HarmonicPart = Union[KForm, Tuple[KForm, KForm]]


def _check_kinds(*items):
    kinds = {item.kind for item in items}
    if len(kinds) > 1:
        raise KindMismatchError(f"mixed exact and odd operands: {sorted(kinds)}")


def compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    """
    Group product.
    Exact: (φ,B)(ψ,B') = (φψ, ψ*B + B').
    Odd: (ψ,B,A)(ψ',B',A') = (ψψ', ψ'*B + B' + ψ'*A ∧ A', ψ'*A + A').
    """
    _check_kinds(g1, g2)
    phi = g1.phi.compose(g2.phi)
    B = pullback(g2.phi, g1.B) + g2.B
    if g1.A is None:
        return GroupElement(phi=phi, B=B)
    pulled_A = pullback(g2.phi, g1.A)
    return GroupElement(phi=phi, B=B + wedge(pulled_A, g2.A), A=pulled_A + g2.A)


def inverse(g: GroupElement) -> GroupElement:
    phi_inverse = g.phi.inverse()
    B = -pullback(phi_inverse, g.B)
    if g.A is None:
        return GroupElement(phi=phi_inverse, B=B)
    return GroupElement(phi=phi_inverse, B=B, A=-pullback(phi_inverse, g.A))


def conjugate(g: GroupElement, h: GroupElement) -> GroupElement:
    """h⁻¹ g h."""
    return compose(compose(inverse(h), g), h)


def b_field_transform(g: GroupElement, s: Section) -> Section:
    """
    Untwisted part of the action.
    Exact: u + α ↦ u + (α + i_uB).
    Odd: u + f + α ↦ u + (f + i_uA) + (α + i_uB - (i_uA)A - 2fA).
    """
    if g.kind != s.kind:
        raise KindMismatchError(f"{g.kind} group element acting on an {s.kind} section")
    if g.A is None:
        return ExactSection(u=s.u, alpha=s.alpha + interior(s.u, g.B))
    contraction = interior(s.u, g.A)
    alpha = s.alpha + interior(s.u, g.B) - multiply(contraction, g.A) - 2.0 * multiply(s.f, g.A)
    return OddSection(u=s.u, f=s.f + contraction, alpha=alpha)


def push_section(phi, s: Section) -> Section:
    if isinstance(s, OddSection):
        return OddSection(u=pushforward(phi, s.u), f=pushforward(phi, s.f), alpha=pushforward(phi, s.alpha))
    return ExactSection(u=pushforward(phi, s.u), alpha=pushforward(phi, s.alpha))


def act_section(g: GroupElement, s: Section) -> Section:
    """Left action φ_*(T_{(B,A)} s)."""
    return push_section(g.phi, b_field_transform(g, s))


def membership_defect(twist: TwistData, g: GroupElement) -> Tuple[float, ...]:
    """
    Residuals of the membership equations.
    :return: exact: (‖φ*H - H - dB‖,); odd: (‖ψ*H - H - dB + A∧(2F + dA)‖, ‖ψ*F - F - dA‖).
    """
    if twist.kind != g.kind:
        raise KindMismatchError(f"{twist.kind} twist with an {g.kind} group element")
    H_residual = pullback(g.phi, twist.H) - twist.H - ext_deriv_or_zero(g.B)
    if g.A is None:
        return (H_residual.norm(),)
    dA = ext_deriv(g.A)
    H_residual = H_residual + wedge_or_zero(g.A, 2.0 * twist.F + dA)
    F_residual = pullback(g.phi, twist.F) - twist.F - dA
    return H_residual.norm(), F_residual.norm()


class DerivationService:
    """
    Lie algebra side of the symmetry groups: derivation conditions, the exactness maps κ, κ₁, κ₂
    and I, the parametrization ι_e with its right inverse, and the split of a derivation into
    exact and harmonic parts. Green operator and harmonic bases come from the flat reference
    context.
    """

    def __init__(self,
                 twist: TwistData,
                 reference: HodgeContext,
                 tolerance: float = 1e-9):
        if reference.grid != twist.grid:
            raise ValueError("reference Hodge context and twist live on different grids")
        self.twist = twist
        self.reference = reference
        self.grid = twist.grid
        self.tolerance = tolerance
        self.two_form_basis = reference.harmonic_basis(2)
        self.one_form_basis = reference.harmonic_basis(1)
        self.logger = logging.getLogger(__name__)
        self.harmonic_F = (np.array(self.harmonic_coordinates(twist.F)) if twist.is_odd
                           else np.zeros(len(self.two_form_basis)))
        self.wedge_map = self._one_form_wedge_map()

    def _check(self, D: Union[Derivation, Section]):
        if D.kind != self.twist.kind:
            raise KindMismatchError(f"{D.kind} input for {self.twist.kind} twist data")

    def potential(self, omega: KForm) -> KForm:
        """G d*ω: the coexact primitive of the exact part of ω."""
        return self.reference.green(self.reference.codiff(omega))

    def harmonic_coordinates(self, omega: KForm) -> List[float]:
        """I(ω) = (⟨ω, e_i⟩) over the flat harmonic basis of ω's degree."""
        basis = self.two_form_basis if omega.degree == 2 else self.reference.harmonic_basis(omega.degree)
        return [self.reference.l2_inner(omega, e) for e in basis]

    def from_coordinates(self, coordinates, degree: int) -> KForm:
        """B_I: right inverse of I."""
        result = KForm.zeros(self.grid, degree)
        for value, e in zip(coordinates, self.reference.harmonic_basis(degree)):
            result = result + float(value) * e
        return result

    def kappa(self, D: Derivation) -> KForm:
        """κ(u, b) = ι_uH - b."""
        return interior(D.u, self.twist.H) - D.b

    def kappa1(self, D: Derivation) -> Tuple[KForm, KForm]:
        """κ₁(u, (b, a)) = (ι_uH - b, ι_uF - a)."""
        return interior(D.u, self.twist.H) - D.b, interior(D.u, self.twist.F) - D.a

    def kappa2(self, beta: KForm, alpha: KForm) -> Tuple[KForm, KForm]:
        """κ₂(β, α) = (β - 2 (G d*α) F, α)."""
        return beta - 2.0 * multiply(self.potential(alpha), self.twist.F), alpha

    def derivation_defect(self, D: Derivation) -> Tuple[float, ...]:
        """
        Exact: ‖d(ι_uH - b)‖.
        Odd: (‖d(ι_uH - b) + 2(ι_uF + a)∧F‖, ‖d(ι_uF - a)‖).
        """
        self._check(D)
        if D.a is None:
            return (closure_norm(self.kappa(D)),)
        kappa_b, kappa_a = self.kappa1(D)
        first = ext_deriv_or_zero(kappa_b) + 2.0 * wedge_or_zero(interior(D.u, self.twist.F) + D.a, self.twist.F)
        return first.norm(), closure_norm(kappa_a)

    def is_derivation(self, D: Derivation, tolerance: Optional[float] = None) -> bool:
        tolerance = self.tolerance if tolerance is None else tolerance
        return relative_residual(max(self.derivation_defect(D)), D.norm()) <= tolerance

    def _require_derivation(self, D: Derivation):
        if not self.is_derivation(D):
            raise NotADerivationError(f"derivation defect {max(self.derivation_defect(D)):.3e} above tolerance")

    def exactness_defect(self, D: Derivation) -> ExactnessDefect:
        self._check(D)
        self._require_derivation(D)
        if D.a is None:
            return ExactnessDefect(kind=SectionKind.exact, two_form_part=self.harmonic_coordinates(self.kappa(D)))
        beta, alpha = self.kappa2(*self.kappa1(D))
        # the constant in f = G d*α + c shifts β by 2cF, so the h(F) direction is not a defect
        two, _ = self.complement_coordinates(self.harmonic_coordinates(beta))
        return ExactnessDefect(kind=SectionKind.odd,
                               two_form_part=[float(value) for value in two],
                               one_form_part=self.harmonic_coordinates(alpha))

    def iota_e(self, s: Section) -> Derivation:
        """
        Exact: ι_e(u + α) = (u, ι_uH - dα).
        Odd: ι_e(u + f + α) = (u, (ι_uH - 2fF - dα, ι_uF - df)).
        """
        self._check(s)
        b = interior(s.u, self.twist.H) - ext_deriv(s.alpha)
        if isinstance(s, ExactSection):
            return Derivation(u=s.u, b=b)
        b = b - 2.0 * multiply(s.f, self.twist.F)
        return Derivation(u=s.u, b=b, a=interior(s.u, self.twist.F) - ext_deriv(s.f))

    def iota_e_as_printed(self, s: OddSection) -> Derivation:
        """Odd ι_e with the +2fF sign, kept for the convention diagnostics."""
        b = interior(s.u, self.twist.H) + 2.0 * multiply(s.f, self.twist.F) - ext_deriv(s.alpha)
        return Derivation(u=s.u, b=b, a=interior(s.u, self.twist.F) - ext_deriv(s.f))

    def _one_form_wedge_map(self) -> np.ndarray:
        """Matrix of h₁ ↦ I(h₁∧F) from harmonic 1-form to harmonic 3-form coordinates."""
        if not self.twist.is_odd or self.grid.n < 3:
            return np.zeros((0, len(self.one_form_basis)))
        return np.array([self.harmonic_coordinates(wedge(e, self.twist.F)) for e in self.one_form_basis]).T

    def _constant_shift(self, residual_two_form: KForm) -> float:
        """Constant c removing the harmonic component of residual - 2cF along h(F)."""
        weight = float(self.harmonic_F @ self.harmonic_F)
        if weight <= 1e-24:
            return 0.0
        return float(np.array(self.harmonic_coordinates(residual_two_form)) @ self.harmonic_F) / (2.0 * weight)

    def complement_coordinates(self, two, one=None) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """
        Project harmonic coordinates onto the d_F-harmonic complement: h₂ orthogonal to h(F)
        (the direction d_F(0, c) = (2cF, 0) makes exact) and h₁ with h₁∧h(F) = 0.
        """
        two = np.asarray(two, dtype=float)
        weight = float(self.harmonic_F @ self.harmonic_F)
        if weight > 1e-24:
            two = two - (two @ self.harmonic_F) / weight * self.harmonic_F
        if one is None:
            return two, None
        one = np.asarray(one, dtype=float)
        if self.wedge_map.size:
            one = one - np.linalg.pinv(self.wedge_map) @ (self.wedge_map @ one)
        return two, one

    def complement_dimension(self) -> int:
        """dim of the harmonic complement: b₂ in the exact case, dim H²_F in the odd case."""
        b2, b1 = len(self.two_form_basis), len(self.one_form_basis)
        if not self.twist.is_odd:
            return b2
        constant_mode = 1 if float(self.harmonic_F @ self.harmonic_F) > 1e-24 else 0
        wedge_rank = int(np.linalg.matrix_rank(self.wedge_map, tol=1e-9)) if self.wedge_map.size else 0
        return b2 - constant_mode + b1 - wedge_rank

    def iota_e_inv(self, D: Derivation) -> Section:
        """
        Exact: (u, b) ↦ u + G d*(ι_uH - b).
        Odd: f = G d*(ι_uF - a) + c, α = G d*(ι_uH - b - 2fF).
        """
        self._check(D)
        if D.a is None:
            return ExactSection(u=D.u, alpha=self.potential(self.kappa(D)))
        kappa_b, kappa_a = self.kappa1(D)
        f = self.potential(kappa_a)
        shift = self._constant_shift(kappa_b - 2.0 * multiply(f, self.twist.F))
        f = f + KForm.constant(self.grid, 0, [shift])
        alpha = self.potential(kappa_b - 2.0 * multiply(f, self.twist.F))
        return OddSection(u=D.u, f=f, alpha=alpha)

    def complement_element(self, h2: KForm, h1: Optional[KForm] = None) -> Derivation:
        """
        Harmonic complement of the exact derivations.
        Exact: (0, h2). Odd: (0, (h2 - 2 h1∧θ, h1)) with θ = G d*F, a derivation exactly when
        h1∧h(F) = 0.
        :raises NotADerivationError: when h1∧h(F) does not vanish.
        """
        if h1 is None:
            return Derivation.pure_form(h2)
        if self.wedge_map.size:
            obstruction = float(np.linalg.norm(self.wedge_map @ np.array(self.harmonic_coordinates(h1))))
            if obstruction > self.tolerance * max(1.0, h1.norm()):
                raise NotADerivationError(f"h1∧h(F) = {obstruction:.3e}, (h2, h1) is not d_F-closed")
        theta = self.potential(self.twist.F)
        return Derivation.pure_form(h2 - 2.0 * wedge(h1, theta), h1)

    def split_derivation(self, D: Derivation) -> Tuple[Derivation, HarmonicPart]:
        """
        Write D = exactPart + complement with exactPart exact.
        :return: (exactPart, h) in the exact case, (exactPart, (h2, h1)) in the odd case.
        """
        self._check(D)
        self._require_derivation(D)
        defect = self.exactness_defect(D)
        if D.a is None:
            harmonic = -self.from_coordinates(defect.two_form_part, 2)
            return D - self.complement_element(harmonic), harmonic
        h1 = -self.from_coordinates(defect.one_form_part, 1)
        h2 = -self.from_coordinates(defect.two_form_part, 2)
        return D - self.complement_element(h2, h1), (h2, h1)

    def derivation_bracket(self, D1: Derivation, D2: Derivation) -> Derivation:
        """
        Exact: ([u₁,u₂], L_{u₁}b₂ - L_{u₂}b₁).
        Odd: ([u₁,u₂], (L_{u₁}b₂ - L_{u₂}b₁ - 2a₁∧a₂, L_{u₁}a₂ - L_{u₂}a₁)).
        """
        _check_kinds(D1, D2)
        u = lie_bracket(D1.u, D2.u)
        b = lie_form(D1.u, D2.b) - lie_form(D2.u, D1.b)
        if D1.a is None:
            return Derivation(u=u, b=b)
        b = b - 2.0 * wedge(D1.a, D2.a)
        return Derivation(u=u, b=b, a=lie_form(D1.u, D2.a) - lie_form(D2.u, D1.a))

    def twisted_differential(self, b: KForm, a: KForm) -> Tuple[KForm, KForm]:
        """
        d_F on Ω^{1+0}: (b, a) ↦ (db + 2aF, da); on Ω^{2+1}: (b, a) ↦ (db - 2a∧F, da).
        """
        F = self.twist.F
        if b.degree == 1:
            return ext_deriv(b) + 2.0 * multiply(a, F), ext_deriv(a)
        return ext_deriv_or_zero(b) - 2.0 * wedge_or_zero(a, F), ext_deriv(a)

    def convention_diagnostics(self, s: OddSection, beta: KForm, alpha: KForm) -> Dict[str, float]:
        """
        Residuals of the alternative sign readings in the odd case.
        :param s: section probing ι_e.
        :param beta: 2-form probing right inverses.
        :param alpha: 1-form probing right inverses.
        :return: named residuals; entries ending in "_consistent" are expected to vanish.
        """
        F = self.twist.F
        scale = max(1.0, beta.norm() + alpha.norm())
        lifted = 2.0 * multiply(self.potential(alpha), F)

        def inverse_residual(candidate: Tuple[KForm, KForm]) -> float:
            image = self.kappa2(*candidate)
            return float(((image[0] - beta).norm() + (image[1] - alpha).norm()) / scale)

        def kappa1_residual(D: Derivation) -> float:
            image = self.kappa1(D)
            return float(((image[0] - beta).norm() + (image[1] - alpha).norm()) / scale)

        printed = self.iota_e_as_printed(s)
        D = self.iota_e(s)
        return {
            "iota_e_derivation_defect_consistent": relative_residual(max(self.derivation_defect(D)), D.norm()),
            "iota_e_derivation_defect_as_printed": relative_residual(max(self.derivation_defect(printed)),
                                                                     printed.norm()),
            "kappa2_right_inverse_as_printed": inverse_residual((beta - lifted, alpha)),
            "kappa2_right_inverse_consistent": inverse_residual((beta + lifted, alpha)),
            "kappa1_right_inverse_as_printed": kappa1_residual(Derivation.pure_form(beta, alpha)),
            "kappa1_right_inverse_consistent": kappa1_residual(Derivation.pure_form(-beta, -alpha)),
            "gdiff_condition_gap": (4.0 * wedge_or_zero(interior(s.u, F), F)).norm(),
            "constant_mode_gap": float(np.linalg.norm(self.harmonic_coordinates(2.0 * F))),
        }
