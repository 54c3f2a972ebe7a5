import logging
from abc import ABC, abstractmethod
from typing import Callable, Optional

import numpy as np

from src.calculus.exterior import (ext_deriv, ext_deriv_or_zero, interior, lie_bracket, lie_form, multiply,
                                   scale_vector, wedge_or_zero)
from src.errors import KindMismatchError
from src.models.courant_models import ExactSection, OddSection, Section, SectionKind, TwistData
from src.models.fields import KForm, VectorField
from src.models.reports import AxiomEntry, AxiomReport, relative_residual


def double_interior(u: VectorField, v: VectorField, omega: KForm) -> KForm:
    """i_u i_v ω read as i_u(i_v ω) = ω(v, u, ...)."""
    return interior(u, interior(v, omega))


class CourantAlgebroidInterface(ABC):

    @abstractmethod
    def pairing(self, s1: Section, s2: Section) -> KForm:
        pass

    @abstractmethod
    def bracket(self, s1: Section, s2: Section) -> Section:
        pass

    @abstractmethod
    def D(self, f: KForm) -> Section:
        pass

    @abstractmethod
    def times(self, f: KForm, s: Section) -> Section:
        pass


class CourantAlgebroid(CourantAlgebroidInterface):
    """
    Twisted Courant algebroid over the torus grid. Subclasses fix the section kind and the
    bracket; the axioms are checked here in terms of the abstract operations.
    """

    class Axioms:
        leibniz = "leibniz"
        metric_compatibility = "metric-compatibility"
        symmetric_part = "symmetric-part"
        symmetric_part_polarized = "symmetric-part-polarized"
        symmetric_part_as_printed = "symmetric-part-literal"
        anchor_leibniz = "anchor-leibniz"
        anchor_homomorphism = "anchor-homomorphism"

    section_kind = SectionKind.exact

    def __init__(self, twist: TwistData, tolerance: float = 1e-7):
        if twist.kind != self.section_kind:
            raise KindMismatchError(f"{type(self).__name__} needs {self.section_kind} twist data, got {twist.kind}")
        self.twist = twist
        self.grid = twist.grid
        self.tolerance = tolerance
        self.logger = logging.getLogger(__name__)

    def _check_sections(self, *sections):
        for section in sections:
            if section.kind != self.section_kind:
                raise KindMismatchError(f"{self.section_kind} bracket applied to an {section.kind} section")

    @staticmethod
    def anchor(s: Section) -> VectorField:
        return s.u

    def _entry(self, axiom: str, lhs, rhs, informational: bool = False) -> AxiomEntry:
        residual = relative_residual((lhs - rhs).norm(), lhs.norm(), rhs.norm())
        return AxiomEntry(axiom=axiom, residual=residual, tolerance=self.tolerance,
                          passed=informational or residual <= self.tolerance, informational=informational)

    def axiom_residuals(self, e: Section, e1: Section, e2: Section, f: KForm) -> AxiomReport:
        """
        Evaluate the five axioms on a triple of sections and a test function.
        :param e: first section.
        :param e1: second section.
        :param e2: third section.
        :param f: scalar used in the anchor Leibniz rule.
        :return: AxiomReport with one entry per axiom and both readings of the polarized symmetric part.
        """
        self._check_sections(e, e1, e2)
        bracket, pairing = self.bracket, self.pairing
        entries = [
            self._entry(self.Axioms.leibniz,
                        bracket(e, bracket(e1, e2)),
                        bracket(bracket(e, e1), e2) + bracket(e1, bracket(e, e2))),
            self._entry(self.Axioms.metric_compatibility,
                        lie_form(e.u, pairing(e1, e2)),
                        pairing(bracket(e, e1), e2) + pairing(e1, bracket(e, e2))),
            self._entry(self.Axioms.symmetric_part, bracket(e, e), self.D(pairing(e, e))),
            self._entry(self.Axioms.symmetric_part_polarized,
                        bracket(e, e1) + bracket(e1, e),
                        2.0 * self.D(pairing(e, e1))),
            self._entry(self.Axioms.symmetric_part_as_printed,
                        bracket(e, e1) + bracket(e1, e1),
                        2.0 * self.D(pairing(e, e1)),
                        informational=True),
            self._entry(self.Axioms.anchor_leibniz,
                        bracket(e, self.times(f, e1)),
                        self.times(f, bracket(e, e1)) + self.times(lie_form(e.u, f), e1)),
            self._entry(self.Axioms.anchor_homomorphism,
                        self.anchor(bracket(e, e1)),
                        lie_bracket(self.anchor(e), self.anchor(e1))),
        ]
        report = AxiomReport(kind=self.section_kind, entries=entries)
        if not report.all_passed:
            failed = [entry.axiom for entry in entries if not entry.passed]
            self.logger.warning(f"{self.section_kind} Courant axioms above tolerance: {failed}")
        return report


class ExactCourantAlgebroid(CourantAlgebroid):
    """(TM + T*M)_H with ⟨u+α, v+β⟩ = ½(i_uβ + i_vα) and Df = (0, df)."""

    section_kind = SectionKind.exact

    def pairing(self, s1: ExactSection, s2: ExactSection) -> KForm:
        self._check_sections(s1, s2)
        return 0.5 * (interior(s1.u, s2.alpha) + interior(s2.u, s1.alpha))

    def bracket(self, s1: ExactSection, s2: ExactSection) -> ExactSection:
        """[u+α, v+β]_H = [u,v] + L_uβ - i_v dα + i_u i_v H."""
        self._check_sections(s1, s2)
        form = lie_form(s1.u, s2.alpha) - interior(s2.u, ext_deriv(s1.alpha))
        form = form + double_interior(s1.u, s2.u, self.twist.H)
        return ExactSection(u=lie_bracket(s1.u, s2.u), alpha=form)

    def D(self, f: KForm) -> ExactSection:
        return ExactSection.from_form(ext_deriv(f))

    def times(self, f: KForm, s: ExactSection) -> ExactSection:
        return ExactSection(u=scale_vector(f, s.u), alpha=multiply(f, s.alpha))


class OddCourantAlgebroid(CourantAlgebroid):
    """(TM + 1 + T*M)_{H,F} with ⟨u+f+α, v+g+β⟩ = ½(i_uβ + i_vα) + fg and Df = (0, 0, df)."""

    section_kind = SectionKind.odd

    def pairing(self, s1: OddSection, s2: OddSection) -> KForm:
        self._check_sections(s1, s2)
        return 0.5 * (interior(s1.u, s2.alpha) + interior(s2.u, s1.alpha)) + multiply(s1.f, s2.f)

    def bracket(self, s1: OddSection, s2: OddSection) -> OddSection:
        """
        [u+f+α, v+g+β] = [u,v] + (u(g) - v(f) + i_u i_v F)
                         + (L_uβ - i_v dα + 2g df + 2(g i_uF - f i_vF) + i_u i_v H).
        """
        self._check_sections(s1, s2)
        F, H = self.twist.F, self.twist.H
        u, f, alpha = s1.u, s1.f, s1.alpha
        v, g, beta = s2.u, s2.f, s2.alpha
        scalar = lie_form(u, g) - lie_form(v, f) + double_interior(u, v, F)
        form = lie_form(u, beta) - interior(v, ext_deriv(alpha))
        form = form + 2.0 * multiply(g, ext_deriv(f))
        form = form + 2.0 * (multiply(g, interior(u, F)) - multiply(f, interior(v, F)))
        form = form + double_interior(u, v, H)
        return OddSection(u=lie_bracket(u, v), f=scalar, alpha=form)

    def D(self, f: KForm) -> OddSection:
        return OddSection.from_form(ext_deriv(f))

    def times(self, f: KForm, s: OddSection) -> OddSection:
        return OddSection(u=scale_vector(f, s.u), f=multiply(f, s.f), alpha=multiply(f, s.alpha))


def algebroid_for(twist: TwistData, tolerance: float = 1e-7) -> CourantAlgebroid:
    if twist.kind == SectionKind.odd:
        return OddCourantAlgebroid(twist, tolerance=tolerance)
    return ExactCourantAlgebroid(twist, tolerance=tolerance)


def pairing(s1: Section, s2: Section) -> KForm:
    if s1.kind != s2.kind:
        raise KindMismatchError(f"pairing of {s1.kind} and {s2.kind} sections")
    if s1.kind == SectionKind.odd:
        return 0.5 * (interior(s1.u, s2.alpha) + interior(s2.u, s1.alpha)) + multiply(s1.f, s2.f)
    return 0.5 * (interior(s1.u, s2.alpha) + interior(s2.u, s1.alpha))


def dorfman_exact(twist: TwistData, s1: ExactSection, s2: ExactSection) -> ExactSection:
    return ExactCourantAlgebroid(twist).bracket(s1, s2)


def dorfman_odd(twist: TwistData, s1: OddSection, s2: OddSection) -> OddSection:
    return OddCourantAlgebroid(twist).bracket(s1, s2)


def axiom_residuals(twist: TwistData, e: Section, e1: Section, e2: Section, f: KForm,
                    tolerance: float = 1e-7) -> AxiomReport:
    return algebroid_for(twist, tolerance).axiom_residuals(e, e1, e2, f)


def shift_splitting(twist: TwistData, B: KForm, A: Optional[KForm] = None) -> TwistData:
    """
    Twist seen through the splitting shifted by B (and A in the odd case).
    :return: exact: H + dB; odd: (H + dB - A∧(2F + dA), F + dA).
    """
    H = twist.H + ext_deriv_or_zero(B)
    if not twist.is_odd:
        if A is not None:
            raise KindMismatchError("an A-shift needs odd twist data")
        return TwistData.exact(twist.grid, H=H)
    if A is None:
        A = KForm.zeros(twist.grid, 1)
    dA = ext_deriv(A)
    H = H - wedge_or_zero(A, 2.0 * twist.F + dA)
    return TwistData.odd(twist.grid, H=H, F=twist.F + dA)


def standard_splitting(u: VectorField) -> ExactSection:
    return ExactSection.from_vector(u)


def shifted_splitting(B: KForm) -> Callable[[VectorField], ExactSection]:
    """λ_B = e^{-B}∘λ, the splitting whose twist is H + dB."""

    def splitting(u: VectorField) -> ExactSection:
        return ExactSection(u=u, alpha=-interior(u, B))

    return splitting


def three_form_of_splitting(algebroid: ExactCourantAlgebroid,
                            splitting: Callable[[VectorField], ExactSection] = standard_splitting) -> KForm:
    """
    Recover the twist of a splitting from H(u,v,w) = 2⟨[λv, λu], λw⟩ on the coordinate frame.
    """
    grid = algebroid.grid
    frame = [VectorField.constant(grid, np.eye(grid.n)[i]) for i in range(grid.n)]
    images = [splitting(u) for u in frame]
    components = np.zeros(KForm.zeros(grid, 3).components.shape)
    for position, (a, b, c) in enumerate(grid.multi_indices(3)):
        value = 2.0 * algebroid.pairing(algebroid.bracket(images[b], images[a]), images[c])
        components[position] = value.values
    return KForm(grid=grid, degree=3, components=components)
