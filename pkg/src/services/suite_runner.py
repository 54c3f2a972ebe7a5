import itertools
import logging
import os
import time
from collections import defaultdict
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.calculus.exterior import closure_norm, ext_deriv, ext_deriv_or_zero, pullback, wedge_or_zero
from src.errors import NotAGroupError
from src.models.affine import AffineDiffeo
from src.models.courant_models import SectionKind, TwistData
from src.models.fields import KForm, SymTensor2
from src.models.genmetric_models import GenMetric, GMTangent
from src.models.grid_models import TorusGrid
from src.models.reports import CheckResult, SuiteReport, relative_residual
from src.models.run_config import SUITES, RunConfig, sample_or_zero
from src.models.strata_models import FiniteSymmetryGroup
from src.models.symmetry_models import GroupElement
from src.services.courant_service import (CourantAlgebroid, algebroid_for, axiom_residuals, shift_splitting,
                                          shifted_splitting, three_form_of_splitting)
from src.services.genmetric_service import (act, act_frame, average, check_group, from_subbundle, graph_frame,
                                            isometry_defect, tangent_inner, tangent_pushforward)
from src.services.hodge_context import HodgeContext
from src.services.slice_service import SliceService
from src.services.strata_service import StrataService
from src.services.symmetry_service import (DerivationService, act_section, compose, conjugate, inverse,
                                           membership_defect)
from src.utils.config import save_csv, save_json
from src.utils.random_fields import RandomFieldFactory

CSV_HEADER = ["suite", "check_id", "anchor", "residual", "tolerance", "pass", "informational"]

AXIOM_ANCHORS = {
    CourantAlgebroid.Axioms.leibniz: "[e,[e1,e2]] = [[e,e1],e2] + [e1,[e,e2]]",
    CourantAlgebroid.Axioms.metric_compatibility: "π(e)⟨e1,e2⟩ = ⟨[e,e1],e2⟩ + ⟨e1,[e,e2]⟩",
    CourantAlgebroid.Axioms.symmetric_part: "[e,e] = D⟨e,e⟩",
    CourantAlgebroid.Axioms.symmetric_part_polarized: "[e,e1] + [e1,e] = 2D⟨e,e1⟩",
    CourantAlgebroid.Axioms.symmetric_part_as_printed: "[e,e1] + [e1,e1] = 2D⟨e,e1⟩ (literal reading)",
    CourantAlgebroid.Axioms.anchor_leibniz: "[e,fe1] = f[e,e1] + (π(e)f)e1",
    CourantAlgebroid.Axioms.anchor_homomorphism: "π[e,e1] = [π(e),π(e1)]",
}

ROTATIONS = {
    2: [[0, -1], [1, 0]],
    3: [[0, -1, 0], [1, 0, 0], [0, 0, 1]],
}


def signed_permutations(n: int, orientation_preserving: bool = False) -> List[np.ndarray]:
    """Lattice maps that keep every band-limited field inside the band."""
    matrices = []
    for permutation in itertools.permutations(range(n)):
        for signs in itertools.product((1, -1), repeat=n):
            matrix = np.zeros((n, n), dtype=int)
            for row, (column, sign) in enumerate(zip(permutation, signs)):
                matrix[row, column] = sign
            if orientation_preserving and round(np.linalg.det(matrix)) != 1:
                continue
            matrices.append(matrix)
    return matrices


def _coefficients(configured: Sequence[float], size: int, rng: np.random.Generator) -> np.ndarray:
    """Configured harmonic coordinates padded with zeros, or random ones when none are configured."""
    if not configured:
        return rng.uniform(-1.0, 1.0, size)
    coefficients = np.zeros(size)
    coefficients[:min(size, len(configured))] = configured[:size]
    return coefficients


def _check(report: SuiteReport, check_id: str, anchor: str, residual: float, tolerance: float, **kwargs):
    report.add(CheckResult.evaluate(check_id, anchor, residual, tolerance, **kwargs))


class SuiteRunner:
    """
    Runs the verification suites of a RunConfig. Every suite draws its random inputs from its
    own Philox stream keyed by (seed, suite position), so a suite's report does not depend on
    which other suites run or in which order.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.tolerances = config.tolerances
        self.logger = logging.getLogger(__name__)
        self._flat_contexts: Dict[TorusGrid, HodgeContext] = {}

    # plumbing

    def rng(self, suite: str) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=[self.config.seed, SUITES.index(suite)]))

    def flat_context(self, grid: TorusGrid) -> HodgeContext:
        if grid not in self._flat_contexts:
            self._flat_contexts[grid] = HodgeContext(SymTensor2.flat(grid))
        return self._flat_contexts[grid]

    def twists(self, grid: TorusGrid) -> List[Tuple[str, TwistData]]:
        twists = [(SectionKind.exact, self.config.twist.build(grid))]
        if self.config.odd_twist is not None:
            twists.append((SectionKind.odd, self.config.odd_twist.build(grid)))
        return twists

    def base_metric(self, grid: TorusGrid, kind: str, factory: RandomFieldFactory) -> GenMetric:
        settings = self.config.genmetric
        g = factory.metric(settings.perturbation) if settings.perturbation > 0 else SymTensor2.flat(grid)
        gamma = sample_or_zero(settings.gamma, grid, 1) if kind == SectionKind.odd else None
        return GenMetric(g=g, omega=sample_or_zero(settings.omega, grid, 2), gamma=gamma)

    @staticmethod
    def random_section(factory: RandomFieldFactory, kind: str, amplitude: float = 1.0):
        if kind == SectionKind.odd:
            return factory.odd_section(amplitude)
        return factory.exact_section(amplitude)

    @staticmethod
    def random_diffeo(grid: TorusGrid, rng: np.random.Generator,
                      matrices: Sequence[np.ndarray]) -> AffineDiffeo:
        matrix = matrices[int(rng.integers(len(matrices)))]
        return AffineDiffeo.from_arrays(grid, matrix, rng.integers(0, grid.N, size=grid.n))

    def random_element(self, factory: RandomFieldFactory, kind: str) -> GroupElement:
        phi = self.random_diffeo(factory.grid, factory.rng, signed_permutations(factory.grid.n))
        A = factory.form(1, 0.5) if kind == SectionKind.odd else None
        return GroupElement(phi=phi, B=factory.form(2, 0.5), A=A)

    def random_genmetric(self, factory: RandomFieldFactory, kind: str) -> GenMetric:
        gamma = factory.form(1, 0.3) if kind == SectionKind.odd else None
        return GenMetric(g=factory.metric(0.2), omega=factory.form(2, 0.3), gamma=gamma)

    def random_tangent(self, factory: RandomFieldFactory, kind: str) -> GMTangent:
        gamma_dot = factory.form(1, 0.3) if kind == SectionKind.odd else None
        return GMTangent(g_dot=factory.sym(0.3), omega_dot=factory.form(2, 0.3), gamma_dot=gamma_dot)

    def random_member(self, factory: RandomFieldFactory, twist: TwistData) -> GroupElement:
        """
        Random element of GDiff_H (or GDiff_{H,F}). Exact: orientation preserving lattice map with
        B = d*G(φ*H - H) plus a closed form. Odd: translation with A = φ*θ - θ + dχ, θ = G d*F,
        and B = d*G(φ*H - H + A∧(2F + dA)) plus a closed form.
        """
        grid = twist.grid
        hodge = self.flat_context(grid)
        rng = factory.rng
        closed = ext_deriv(factory.form(1, 0.5)) + KForm.constant(grid, 2, rng.uniform(-0.5, 0.5, comb(grid.n, 2)))
        if not twist.is_odd:
            phi = self.random_diffeo(grid, rng, signed_permutations(grid.n, orientation_preserving=True))
            residual = pullback(phi, twist.H) - twist.H
            A = None
        else:
            phi = AffineDiffeo.translation(grid, rng.integers(0, grid.N, size=grid.n))
            theta = hodge.green(hodge.codiff(twist.F))
            A = pullback(phi, theta) - theta + ext_deriv(factory.scalar(0.5))
            residual = pullback(phi, twist.H) - twist.H + wedge_or_zero(A, 2.0 * twist.F + ext_deriv(A))
        B = closed
        if grid.n >= 3:
            B = B + hodge.codiff(hodge.green(residual))
        return GroupElement(phi=phi, B=B, A=A)

    # suites

    def courant_axioms(self) -> SuiteReport:
        report = SuiteReport(suite="courant-axioms")
        grid = self.config.grid
        factory = RandomFieldFactory(grid, rng=self.rng("courant-axioms"))
        tolerance = self.tolerances.axiom
        triples = self.config.sampling.courant_triples

        for kind, configured in self.twists(grid):
            twists = [configured]
            for _ in range(self.config.sampling.random_twists):
                H = factory.form(3, 0.5)
                if kind == SectionKind.exact:
                    twists.append(TwistData.exact(grid, H=H))
                    continue
                constant = KForm.constant(grid, 2, factory.rng.uniform(-0.5, 0.5, comb(grid.n, 2)))
                twists.append(TwistData.odd(grid, H=H, F=ext_deriv(factory.form(1, 0.5)) + constant))

            worst: Dict[str, float] = defaultdict(float)
            informational = set()
            for twist in twists:
                for _ in range(triples):
                    e, e1, e2 = (self.random_section(factory, kind) for _ in range(3))
                    axioms = axiom_residuals(twist, e, e1, e2, factory.scalar(), tolerance)
                    for entry in axioms.entries:
                        worst[entry.axiom] = max(worst[entry.axiom], entry.residual)
                        if entry.informational:
                            informational.add(entry.axiom)
            for axiom, residual in worst.items():
                _check(report, f"courant.{kind}.{axiom}", AXIOM_ANCHORS[axiom], residual, tolerance,
                       informational=axiom in informational)
            report.details[f"{kind}_twists"] = len(twists)

        twist = self.twists(grid)[0][1]
        algebroid = algebroid_for(twist, tolerance)
        recovered = three_form_of_splitting(algebroid)
        _check(report, "courant.exact.splitting_three_form", "H(u,v,w) = 2⟨[λv,λu],λw⟩ for the standard splitting",
               relative_residual((recovered - twist.H).norm(), twist.H.norm()), tolerance)
        B = factory.form(2, 0.5)
        shifted = three_form_of_splitting(algebroid, shifted_splitting(B))
        expected = shift_splitting(twist, B).H
        _check(report, "courant.exact.shifted_splitting_three_form", "the splitting e^{-B}∘λ has twist H + dB",
               relative_residual((shifted - expected).norm(), expected.norm()), tolerance)

        if self.config.odd_twist is not None and grid.n >= 3:
            F = factory.form(2, 0.5)
            broken = TwistData.unchecked(grid, SectionKind.odd, H=KForm.zeros(grid, 3), F=F)
            e, e1, e2 = (factory.odd_section() for _ in range(3))
            entry = axiom_residuals(broken, e, e1, e2, factory.scalar(), tolerance).entry(
                CourantAlgebroid.Axioms.leibniz)
            _check(report, "courant.odd.C1_negative_control", "a non-closed F breaks the Leibniz identity",
                   entry.residual, self.tolerances.negative_control, expect_above=True)
            report.details["negative_control_dF_norm"] = closure_norm(F)
        return report

    def hodge(self) -> SuiteReport:
        report = SuiteReport(suite="hodge")
        n = self.config.n
        rng = self.rng("hodge")
        settings = self.config.metric
        tolerance = self.tolerances.hodge

        factory = RandomFieldFactory(self.config.grid, rng=rng)
        metrics = [SymTensor2.flat(factory.grid)] + [factory.metric(settings.perturbation)
                                                     for _ in range(settings.samples)]
        for index, g in enumerate(metrics):
            label = "flat" if index == 0 else f"perturbed{index}"
            hodge = HodgeContext(g)
            worst = defaultdict(float)
            for k in range(n + 1):
                for _ in range(self.config.sampling.hodge_forms):
                    omega = factory.form(k)
                    scale = max(1.0, hodge.norm(omega))
                    parts = hodge.hodge_decompose(omega)
                    worst["reassembly"] = max(worst["reassembly"],
                                              relative_residual((parts[0] + parts[1] + parts[2] - omega).norm(),
                                                                omega.norm()))
                    for left, right in itertools.combinations(parts, 2):
                        worst["orthogonality"] = max(worst["orthogonality"],
                                                     abs(hodge.l2_inner(left, right)) / scale ** 2)
                    identity = hodge.laplacian(hodge.green(omega)) + hodge.harmonic_projection(omega) - omega
                    worst["green"] = max(worst["green"], relative_residual(identity.norm(), omega.norm()))
                    if k > 0:
                        alpha = factory.form(k - 1)
                        gap = hodge.l2_inner(ext_deriv(alpha), omega) - hodge.l2_inner(alpha, hodge.codiff(omega))
                        worst["adjoint"] = max(worst["adjoint"],
                                               abs(gap) / max(1.0, hodge.norm(alpha) * scale))
            _check(report, f"hodge.{label}.reassembly", "ω = dGd*ω + d*Gdω + h(ω)", worst["reassembly"], tolerance)
            _check(report, f"hodge.{label}.orthogonality", "exact, coexact and harmonic parts are L²-orthogonal",
                   worst["orthogonality"], self.tolerances.orthogonality)
            _check(report, f"hodge.{label}.green", "ΔG + h = identity", worst["green"], tolerance)
            _check(report, f"hodge.{label}.adjoint", "⟨dα, β⟩ = ⟨α, d*β⟩", worst["adjoint"], tolerance)

        matrix_factory = RandomFieldFactory(self.config.matrix_grid, rng=rng)
        matrix_metrics = [SymTensor2.flat(matrix_factory.grid)] + [matrix_factory.metric(settings.perturbation)
                                                                   for _ in range(settings.samples)]
        kernels = {}
        for index, g in enumerate(matrix_metrics):
            label = "flat" if index == 0 else f"perturbed{index}"
            hodge = HodgeContext(g)
            dimensions = [hodge.kernel_dimension(k, self.tolerances.rank_factor) for k in range(n + 1)]
            kernels[label] = dimensions
            for k, dimension in enumerate(dimensions):
                _check(report, f"hodge.{label}.kernel_dim_{k}", f"dim ker Δ_{k} = C({n},{k})",
                       abs(dimension - comb(n, k)), 0.0)
        report.details["kernel_dimensions"] = kernels
        report.details["matrix_resolution"] = self.config.N_mat
        return report

    def derivations(self) -> SuiteReport:
        report = SuiteReport(suite="derivations")
        grid = self.config.grid
        factory = RandomFieldFactory(grid, rng=self.rng("derivations"))
        settings = self.config.derivation
        tolerance = self.tolerances.identity
        reference = self.flat_context(grid)

        for kind, twist in self.twists(grid):
            service = DerivationService(twist, reference, tolerance=tolerance)
            b2, b1 = len(service.two_form_basis), len(service.one_form_basis)
            worst = defaultdict(float)
            for index in range(settings.samples):
                s = self.random_section(factory, kind, settings.section_amplitude)
                D_exact = service.iota_e(s)
                worst["iota_e_derivation"] = max(worst["iota_e_derivation"],
                                                 relative_residual(max(service.derivation_defect(D_exact)),
                                                                   D_exact.norm()))
                worst["iota_e_exactness"] = max(worst["iota_e_exactness"], service.exactness_defect(D_exact).norm())

                two = _coefficients(settings.two_form_coefficients if index == 0 else [], b2, factory.rng)
                one = _coefficients(settings.one_form_coefficients if index == 0 else [], b1, factory.rng)
                two, one = service.complement_coordinates(two, one if kind == SectionKind.odd else None)
                h2 = service.from_coordinates(two, 2)
                h1 = service.from_coordinates(one, 1) if kind == SectionKind.odd else None
                complement = service.complement_element(h2, h1)
                worst["complement_derivation"] = max(worst["complement_derivation"],
                                                     relative_residual(max(service.derivation_defect(complement)),
                                                                       complement.norm()))
                D = D_exact + complement
                exact_part, harmonic = service.split_derivation(D)
                recovered = service.complement_element(*harmonic) if kind == SectionKind.odd \
                    else service.complement_element(harmonic)
                worst["split_reassembly"] = max(worst["split_reassembly"],
                                                relative_residual((exact_part + recovered - D).norm(), D.norm()))
                worst["split_exactness"] = max(worst["split_exactness"], service.exactness_defect(exact_part).norm())
                h2_found = harmonic[0] if kind == SectionKind.odd else harmonic
                gap = np.linalg.norm(np.array(service.harmonic_coordinates(h2_found)) - two)
                if kind == SectionKind.odd:
                    gap += np.linalg.norm(np.array(service.harmonic_coordinates(harmonic[1])) - one)
                worst["harmonic_recovery"] = max(worst["harmonic_recovery"], float(gap))
                round_trip = service.iota_e(service.iota_e_inv(exact_part)) - exact_part
                worst["right_inverse"] = max(worst["right_inverse"],
                                             relative_residual(round_trip.norm(), exact_part.norm()))
                other = service.iota_e(self.random_section(factory, kind, settings.section_amplitude))
                bracket = service.derivation_bracket(D_exact, other)
                worst["bracket_closure"] = max(worst["bracket_closure"],
                                               relative_residual(max(service.derivation_defect(bracket)),
                                                                 bracket.norm()))
                if index == 0:
                    report.details[f"{kind}_configured_derivation"] = {
                        "harmonic_two_form": [float(value) for value in service.harmonic_coordinates(h2_found)],
                        "harmonic_one_form": ([float(value) for value in service.harmonic_coordinates(harmonic[1])]
                                              if kind == SectionKind.odd else []),
                        "exact_part_norm": float(exact_part.norm()),
                        "complement_norm": float(recovered.norm()),
                    }

            anchors = {
                "iota_e_derivation": "ι_e lands in the derivations",
                "iota_e_exactness": "I∘κ vanishes on the image of ι_e" if kind == SectionKind.exact
                else "I∘κ₂∘κ₁ vanishes on the image of ι_e",
                "complement_derivation": "harmonic complement elements are derivations",
                "split_reassembly": "D = exact part + harmonic complement",
                "split_exactness": "the exact part of a split has zero exactness defect",
                "harmonic_recovery": "the split returns the injected harmonic coordinates",
                "right_inverse": "ι_e∘ι_e⁻¹ = identity on exact derivations",
                "bracket_closure": "the bracket of two derivations is a derivation",
            }
            for name, residual in worst.items():
                _check(report, f"derivations.{kind}.{name}", anchors[name], residual, tolerance)
            report.details[f"{kind}_sample_size"] = settings.samples
            report.details[f"{kind}_complement_dimension"] = service.complement_dimension()

            if kind == SectionKind.odd:
                diagnostics = service.convention_diagnostics(factory.odd_section(settings.section_amplitude),
                                                             factory.form(2), factory.form(1))
                for name, residual in sorted(diagnostics.items()):
                    _check(report, f"derivations.odd.{name}", "sign reading of the odd exactness maps",
                           residual, tolerance, informational=not name.endswith("_consistent"))
                b, a = factory.form(1), factory.scalar()
                first = service.twisted_differential(b, a)
                second = service.twisted_differential(*first)
                _check(report, "derivations.odd.dF_squared", "d_F∘d_F = 0 on Ω^{1+0}",
                       relative_residual(second[0].norm() + second[1].norm(), b.norm() + a.norm()), tolerance)
                if grid.n >= 3:
                    broken = TwistData.unchecked(grid, SectionKind.odd, H=twist.H, F=factory.form(2, 0.5))
                    first = DerivationService(broken, reference).twisted_differential(b, a)
                    second = DerivationService(broken, reference).twisted_differential(*first)
                    _check(report, "derivations.odd.dF_squared_negative_control", "d_F∘d_F ≠ 0 when dF ≠ 0",
                           relative_residual(second[0].norm() + second[1].norm(), b.norm() + a.norm()),
                           self.tolerances.negative_control, expect_above=True)
        return report

    def group(self) -> SuiteReport:
        report = SuiteReport(suite="group")
        grid = self.config.grid
        factory = RandomFieldFactory(grid, rng=self.rng("group"))
        tolerance = self.tolerances.identity
        pairs = self.config.sampling.group_pairs

        for kind, twist in self.twists(grid):
            worst = defaultdict(float)
            for _ in range(pairs):
                g1, g2, g3 = (self.random_element(factory, kind) for _ in range(3))
                left = compose(compose(g1, g2), g3)
                right = compose(g1, compose(g2, g3))
                worst["associativity"] = max(worst["associativity"], self._element_gap(left, right))
                worst["inverse"] = max(worst["inverse"],
                                       self._element_gap(compose(g1, inverse(g1)), GroupElement.identity(grid, kind)))
                s = self.random_section(factory, kind)
                product_action = act_section(compose(g1, g2), s)
                iterated = act_section(g1, act_section(g2, s))
                worst["left_action"] = max(worst["left_action"],
                                           relative_residual((product_action - iterated).norm(), s.norm()))

                C = factory.form(2, 0.5)
                h = GroupElement.b_field(C, KForm.zeros(grid, 1) if kind == SectionKind.odd else None)
                closed_form = GroupElement(phi=g1.phi, B=g1.B + C - pullback(g1.phi, C), A=g1.A)
                worst["conjugation_closed_form"] = max(worst["conjugation_closed_form"],
                                                       self._element_gap(conjugate(g1, h), closed_form))

                m1, m2 = self.random_member(factory, twist), self.random_member(factory, twist)
                scale = max(1.0, twist.H.norm())
                worst["member_sample"] = max(worst["member_sample"], max(membership_defect(twist, m1)) / scale)
                worst["membership_closure"] = max(worst["membership_closure"],
                                                  max(membership_defect(twist, compose(m1, m2))) / scale,
                                                  max(membership_defect(twist, inverse(m1))) / scale)
                if kind == SectionKind.exact:
                    psi = self.random_diffeo(grid, factory.rng, signed_permutations(grid.n))
                    h = GroupElement(phi=psi, B=C)
                    shifted = TwistData.exact(grid, H=pullback(psi, twist.H) - ext_deriv_or_zero(C))
                    worst["conjugated_membership"] = max(worst["conjugated_membership"],
                                                         max(membership_defect(shifted, conjugate(m1, h))) / scale)

                V = self.random_genmetric(factory, kind)
                worst["right_action"] = max(worst["right_action"],
                                            act(compose(g1, g2), V).difference(act(g2, act(g1, V))).norm())
                from_frame = from_subbundle(act_frame(g1, graph_frame(V)))
                worst["frame_action"] = max(worst["frame_action"], from_frame.difference(act(g1, V)).norm())
                t1, t2 = self.random_tangent(factory, kind), self.random_tangent(factory, kind)
                before = tangent_inner(V, t1, t2)
                after = tangent_inner(act(g1, V), tangent_pushforward(g1, t1), tangent_pushforward(g1, t2))
                worst["tangent_metric_invariance"] = max(worst["tangent_metric_invariance"],
                                                         relative_residual(abs(after - before), abs(before)))

            anchors = {
                "associativity": "(g1g2)g3 = g1(g2g3)",
                "inverse": "g g⁻¹ = 1",
                "left_action": "(g1g2)·s = g1·(g2·s)",
                "conjugation_closed_form": "(Id,C)⁻¹(φ,B)(Id,C) = (φ, B + C - φ*C)",
                "member_sample": "sampled elements satisfy the membership equations",
                "membership_closure": "products and inverses of members are members",
                "conjugated_membership": "(ψ,C)⁻¹ GDiff_H (ψ,C) = GDiff_{ψ*H - dC}",
                "right_action": "V·(g1g2) = (V·g1)·g2 on generalized metrics",
                "frame_action": "the pair formula agrees with the subbundle action",
                "tangent_metric_invariance": "the weak metric on tangents is invariant",
            }
            for name, residual in worst.items():
                _check(report, f"group.{kind}.{name}", anchors[name], residual, tolerance)

            if kind == SectionKind.exact:
                displayed = []
                for _ in range(pairs):
                    member = self.random_member(factory, twist)
                    C = factory.form(2, 0.5)
                    psi = self.random_diffeo(grid, factory.rng, signed_permutations(grid.n))
                    other_reading = TwistData.unchecked(grid, SectionKind.exact,
                                                        H=pullback(psi, twist.H + ext_deriv_or_zero(C)))
                    displayed.append(max(membership_defect(other_reading,
                                                           conjugate(member, GroupElement(phi=psi, B=C)))))
                _check(report, "group.exact.conjugated_membership_displayed_twist",
                       "membership for the twist ψ*(H + dC), sign diagnostic", max(displayed), tolerance,
                       informational=True)
        report.details["pairs"] = pairs
        return report

    @staticmethod
    def _tangent(fields) -> GMTangent:
        g_dot, omega_dot, gamma_dot = fields
        return GMTangent(g_dot=g_dot, omega_dot=omega_dot, gamma_dot=gamma_dot)

    @staticmethod
    def _element_gap(g1: GroupElement, g2: GroupElement) -> float:
        if g1.phi.key != g2.phi.key:
            return float("inf")
        gap = (g1.B - g2.B).norm()
        if g1.A is not None:
            gap += (g1.A - g2.A).norm()
        return relative_residual(gap, g1.B.norm(), g2.B.norm())

    def slice(self) -> SuiteReport:
        report = SuiteReport(suite="slice")
        grid = self.config.matrix_grid
        rng = self.rng("slice")
        factory = RandomFieldFactory(grid, rng=rng)
        reference = self.flat_context(grid)
        identity, matrix = self.tolerances.identity, self.tolerances.matrix
        probes = self.config.sampling.slice_probes

        for kind, twist in self.twists(grid):
            V = self.base_metric(grid, kind, factory)
            service = SliceService(V, twist, reference, rank_tolerance=self.tolerances.rank_factor)
            B, A = service.assemble_complex(kind)
            prefix = f"slice.{kind}"
            functional = service.functional(A.name)
            _check(report, f"{prefix}.assembly", "matrix columns reproduce the operator on random fields",
                   service.probe_residual(A, functional, probes, rng), matrix)
            x, y = rng.standard_normal(A.domain.dimension), rng.standard_normal(A.codomain.dimension)
            adjoint = service.adjoint(A)
            gap = y @ A.codomain.gram @ (A @ x) - (adjoint @ y) @ A.domain.gram @ x
            _check(report, f"{prefix}.adjoint", "⟨Ax, y⟩ = ⟨x, A*y⟩",
                   abs(gap) / max(1.0, np.linalg.norm(A @ x) * np.linalg.norm(y)), identity)

            decomposition = service.decomposition_report(B, A, matrix)
            _check(report, f"{prefix}.complex", "A∘B = 0", decomposition.residuals["complex"], identity)
            _check(report, f"{prefix}.projector_idempotence", "P² = P for P = A G_c A*",
                   decomposition.residuals["idempotence"], matrix)
            _check(report, f"{prefix}.projector_range", "P A = A", decomposition.residuals["range"], matrix)
            _check(report, f"{prefix}.image_kernel_orthogonality", "Im A ⊥ ker A*",
                   decomposition.residuals["orthogonality"], identity)

            green = service.complex_green(A, B)
            projector = service.orbit_projector(A, green)
            weighted = A.codomain.gram @ projector.matrix
            _check(report, f"{prefix}.projector_symmetry", "P is self-adjoint for the Gram pairing",
                   np.linalg.norm(weighted - weighted.T) / max(1.0, np.linalg.norm(weighted)),
                   self.tolerances.hodge)
            _check(report, f"{prefix}.projector_trace", "trace P = rank A",
                   abs(np.trace(projector.matrix) - decomposition.rank), 0.5)
            report.details[f"{kind}_dimensions"] = {**decomposition.dims, "rank": decomposition.rank}

            if kind == SectionKind.exact:
                harmonic = reference.harmonic_basis(2)
                split = service.full_group_decomposition(A, harmonic, rng)
                for name, residual in split.residuals.items():
                    _check(report, f"{prefix}.full_group.{name}", "Im A' = Im A ⊕ F and ker A* = F ⊕ ν'",
                           residual, matrix)
                _check(report, f"{prefix}.full_group.f_dimension", "dim F ≤ b₂",
                       max(0, split.f_dimension - len(harmonic)), 0.0)
                A_full = service.assemble(SliceService.Operators.A_full)
                direct = service.direct_sum_checks(A_full, A, harmonic, matrix)
                for name, residual in direct.residuals.items():
                    _check(report, f"{prefix}.direct_sum.{name}", "gdiff_H = ι_e(TM+T*M) ⊕ H² splittings",
                           residual, matrix)
                report.details["full_group"] = {"f_dimension": split.f_dimension, **direct.dims}
                continue

            tangents = service.descriptor("odd_metric_tangents")
            x, y = rng.standard_normal(tangents.dimension), rng.standard_normal(tangents.dimension)
            quadrature = tangent_inner(V, self._tangent(service.to_fields(tangents, x)),
                                       self._tangent(service.to_fields(tangents, y)))
            _check(report, f"{prefix}.twisted_gram", "Gram matrix of h_V₊ matches quadrature",
                   relative_residual(abs(x @ service.twisted_gram() @ y - quadrature), abs(quadrature)),
                   self.tolerances.hodge)
            first, second = service.assemble_complex(SliceService.Complexes.dF_complex)
            _check(report, f"{prefix}.dF_complex", "d_F∘d_F = 0 at matrix level",
                   service.complex_check(first, second), identity)
            report.details["dF_cohomology_dimension"] = service.twisted_cohomology_dimension(first, second)
            if grid.n >= 3:
                broken = TwistData.unchecked(grid, SectionKind.odd, H=twist.H, F=factory.form(2, 0.5))
                broken_service = SliceService(V, broken, reference, rank_tolerance=self.tolerances.rank_factor)
                first, second = broken_service.assemble_complex(SliceService.Complexes.dF_complex)
                _check(report, f"{prefix}.dF_complex_negative_control", "d_F∘d_F ≠ 0 when dF ≠ 0",
                       broken_service.complex_check(first, second), self.tolerances.negative_control,
                       expect_above=True)
        return report

    def strata_family(self, grid: TorusGrid, factory: RandomFieldFactory) -> List[Tuple[str, GenMetric]]:
        """Bundled example family: flat, a 2-form stripe, a metric bump, and seeded random points."""
        x = grid.coordinates()
        stripe = np.zeros(KForm.zeros(grid, 2).components.shape)
        stripe[0] = 0.5 * np.cos(x[0])
        bump = SymTensor2.flat(grid).matrix.copy()
        bump[0, 0] = bump[0, 0] + 0.2 * np.cos(x[1])
        family = [
            ("flat", GenMetric.flat(grid)),
            ("stripe", GenMetric(g=SymTensor2.flat(grid), omega=KForm(grid=grid, degree=2, components=stripe))),
            ("bump", GenMetric(g=SymTensor2(grid=grid, matrix=bump), omega=KForm.zeros(grid, 2))),
        ]
        family += [(f"random{index}", self.random_genmetric(factory, SectionKind.exact))
                   for index in range(self.config.strata.samples)]
        return family

    def strata(self) -> SuiteReport:
        report = SuiteReport(suite="strata")
        grid = self.config.matrix_grid
        rng = self.rng("strata")
        factory = RandomFieldFactory(grid, rng=rng)
        settings = self.config.strata
        tolerance = self.tolerances.identity
        twist = self.config.twist.build(grid)
        service = StrataService(twist, tolerance=tolerance, max_pool=settings.max_pool)
        hodge = self.flat_context(grid)

        family = self.strata_family(grid, factory)
        groups, pools, rows = [], {}, []
        for label, V in family:
            pool = service.candidate_pool(V.g, settings.translation_step)
            pools[label] = pool
            try:
                group = service.isometry_group(V, pool)
                check_group(group.elements, tolerance * max(1.0, V.omega.norm()))
                scale = max(1.0, V.omega.norm(), twist.H.norm())
                residual = max(isometry_defect(twist, element, V).largest for element in group.elements) / scale
            except NotAGroupError as error:
                self.logger.warning(f"strata {label}: {error}")
                report.add(CheckResult.evaluate(f"strata.{label}.isometry_group", "Isom_H(g,ω) is a group",
                                                1.0, tolerance))
                continue
            groups.append(group)
            _check(report, f"strata.{label}.isometry_group", "Isom_H(g,ω) is a verified group of isometries",
                   residual, tolerance)

            context = hodge if np.allclose(V.g.matrix, SymTensor2.flat(grid).matrix) else None
            C, diagnostics = service.stratum_conjugator(V, group, context)
            _check(report, f"strata.{label}.pure_conjugate", "(Id,C)⁻¹ Isom (Id,C) consists of pairs (φ,0)",
                   diagnostics["pure_defect"] / max(1.0, V.omega.norm()), tolerance)
            _check(report, f"strata.{label}.pure_conjugate_opposite_sign", "opposite sign of C₁, diagnostic",
                   diagnostics["pure_defect_opposite_sign"], tolerance, informational=True)
            shifted = TwistData.exact(grid, H=twist.H - ext_deriv_or_zero(C))
            pure = service.isometry_group(GenMetric(g=V.g, omega=V.omega - C), pool, twist=shifted)
            _check(report, f"strata.{label}.pure_group", "the conjugated group equals G(ω - C)",
                   0.0 if set(pure.keys()) == set(group.keys()) else 1.0, 0.0)
            rows.append({"label": label, "order": group.order, "metric_constant": V.g.is_constant()})

        conjugation = []
        displayed = []
        for index in range(settings.conjugators):
            label, V = family[index % len(family)]
            pool = pools[label]
            psi = pool[int(rng.integers(len(pool)))]
            result = service.conjugation_identity_check(V, psi, factory.form(2, 0.5), pool)
            conjugation.append(result["set_mismatch"])
            displayed.append(result["displayed_twist_membership"])
        _check(report, "strata.conjugation_identity",
               "(ψ,C)⁻¹ Isom_H(g,ω) (ψ,C) = Isom_{ψ*H - dC}(ψ*g, ψ*ω - C)", max(conjugation), 0.0)
        _check(report, "strata.conjugation_identity_displayed_twist", "membership for the twist ψ*(H + dC)",
               max(displayed), tolerance, informational=True)

        rotation = AffineDiffeo.from_arrays(grid, np.array(ROTATIONS[grid.n]))
        cyclic, power = [], AffineDiffeo.identity(grid)
        for _ in range(4):
            cyclic.append(GroupElement.diffeo(power))
            power = power.compose(rotation)
        averaged = average(cyclic, self.random_genmetric(factory, SectionKind.exact), tolerance)
        invariance = max(act(element, averaged).difference(averaged).norm() for element in cyclic)
        _check(report, "strata.average_invariance", "the group average is a fixed point", invariance, tolerance)
        rotation_keys = {element.phi.key for element in cyclic}
        symmetric_twist = TwistData.exact(grid, H=sum((pullback(element.phi, twist.H) for element in cyclic[1:]),
                                                      twist.H) * 0.25)
        pool = service.candidate_pool(averaged.g, settings.translation_step)
        keys = set(service.isometry_group(averaged, pool, twist=symmetric_twist).keys())
        _check(report, "strata.average_isometries", "Isom of the average contains the averaging group",
               0.0 if rotation_keys <= keys else 1.0, 0.0)

        flat = GenMetric.flat(grid)
        linear = [phi for phi in pools["flat"] if not any(phi.shift)]
        larger = service.isometry_group(flat, linear)
        smaller = FiniteSymmetryGroup.from_elements([service.isometry_element(element.phi, flat)
                                                     for element in cyclic])
        perturbation = service.invariant_perturbation(flat, smaller, larger)
        _check(report, "strata.invariant_perturbation",
               "a G-invariant perturbation leaves the stratum of a larger group",
               0.0 if perturbation.found else 1.0, 0.0)

        conjugators = service.conjugator_pool(linear)
        labels = service.conjugacy_classify(groups, conjugators)
        for row, label in zip(rows, labels):
            row.update({"class_index": label.class_index, "table_hash": label.table_hash[:16],
                        "harmonic_signature": [list(pair) for pair in label.harmonic_signature]})
        report.details["family"] = rows
        report.details["perturbation"] = {"found": perturbation.found, "mode": perturbation.mode,
                                          "certificate": perturbation.certificate}
        report.details["moduli_projection"] = service.moduli_projection_report(
            [(twist, V) for _, V in family], pool_step=settings.translation_step)
        return report

    # driver

    def run(self, suites: Optional[Sequence[str]] = None) -> List[SuiteReport]:
        suites = list(self.config.suites if suites is None else suites)
        runners = {
            "courant-axioms": self.courant_axioms,
            "hodge": self.hodge,
            "derivations": self.derivations,
            "group": self.group,
            "slice": self.slice,
            "strata": self.strata,
        }
        reports = []
        for suite in suites:
            if suite not in runners:
                raise ValueError(f"unknown suite {suite!r}, expected one of {list(SUITES)}")
            start = time.perf_counter()
            report = runners[suite]()
            report.wall_time = time.perf_counter() - start
            failed = [check.check_id for check in report.failures]
            self.logger.info(f"{suite}: {len(report.checks)} checks, {len(failed)} failed, "
                             f"{report.wall_time:.1f} s")
            if failed:
                self.logger.warning(f"{suite}: failed checks {failed}")
            reports.append(report)
        return reports

    def write_reports(self, reports: List[SuiteReport], directory: Optional[str] = None,
                      output_format: Optional[str] = None) -> List[str]:
        """Writes one file per suite plus a summary; files carry no wall-clock values."""
        directory = self.config.output.directory if directory is None else directory
        output_format = self.config.output.format if output_format is None else output_format
        os.makedirs(directory, exist_ok=True)
        written = []
        for report in reports:
            if output_format == "csv":
                file_name = os.path.join(directory, f"{report.suite}.csv")
                rows = [{**check.dict(by_alias=True), "suite": report.suite} for check in report.checks]
                save_csv(file_name, CSV_HEADER, rows)
            else:
                file_name = os.path.join(directory, f"{report.suite}.json")
                save_json(file_name, report.to_json_dict())
            written.append(file_name)
        summary = os.path.join(directory, "summary.json")
        save_json(summary, {"schema_version": self.config.schema_version, "seed": self.config.seed,
                            "suites": {report.suite: report.passed for report in reports}})
        written.append(summary)
        return written
