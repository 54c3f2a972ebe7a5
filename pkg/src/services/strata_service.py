import hashlib
import itertools
import json
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.calculus.exterior import ext_deriv_or_zero, pullback, sample, wedge
from src.errors import CohomologyObstructionError, KindMismatchError, ResourceGuardError
from src.models.affine import AffineDiffeo
from src.models.courant_models import SectionKind, TwistData
from src.models.fields import KForm, SymTensor2, symmetric_index_pairs
from src.models.genmetric_models import GenMetric
from src.models.grid_models import FourierMode, FourierModeSpec, TorusGrid
from src.models.strata_models import FiniteSymmetryGroup, PerturbationResult, StratumLabel
from src.models.symmetry_models import GroupElement
from src.services.genmetric_service import act, isometry_defect
from src.services.hodge_context import HodgeContext
from src.services.symmetry_service import conjugate, membership_defect


def _half_space_wavevectors(n: int, bound: int, include_zero: bool = True) -> List[Tuple[int, ...]]:
    """Integer wavevectors with entries in [-bound, bound], one of each ±k pair, in lexicographic order."""
    vectors = []
    for wavevector in itertools.product(range(-bound, bound + 1), repeat=n):
        nonzero = [entry for entry in wavevector if entry != 0]
        if not nonzero:
            if include_zero:
                vectors.append(wavevector)
        elif nonzero[0] > 0:
            vectors.append(wavevector)
    return vectors


def _finite_order(matrix: np.ndarray, max_order: int) -> bool:
    power = np.eye(matrix.shape[0], dtype=int)
    for _ in range(max_order):
        power = power @ matrix
        if np.array_equal(power, np.eye(matrix.shape[0], dtype=int)):
            return True
    return False


def _same_element(g1: GroupElement, g2: GroupElement, tolerance: float) -> bool:
    if g1.phi.key != g2.phi.key:
        return False
    distance = (g1.B - g2.B).norm()
    if g1.A is not None:
        distance += (g1.A - g2.A).norm()
    return distance <= tolerance


class StrataService:
    """
    Finite generalized isometry groups on the torus and their conjugacy classes: candidate
    pools, isometry groups, stratum labels, the conjugator that makes an isometry group pure,
    and the invariant-perturbation search that separates nested strata.
    """

    def __init__(self,
                 twist: TwistData,
                 tolerance: float = 1e-9,
                 max_pool: int = 20000,
                 max_order: int = 6):
        self.twist = twist
        self.grid: TorusGrid = twist.grid
        self.tolerance = tolerance
        self.max_pool = max_pool
        self.max_order = max_order
        self.logger = logging.getLogger(__name__)

    def lattice_matrices(self) -> List[np.ndarray]:
        """Integer matrices with entries in {-1, 0, 1}, det ±1 and order at most max_order."""
        n = self.grid.n
        matrices = []
        for entries in itertools.product((-1, 0, 1), repeat=n * n):
            matrix = np.array(entries, dtype=int).reshape(n, n)
            if abs(int(round(np.linalg.det(matrix)))) != 1:
                continue
            if _finite_order(matrix, self.max_order):
                matrices.append(matrix)
        return matrices

    def candidate_pool(self, g: SymTensor2, translation_step: int = 1) -> List[AffineDiffeo]:
        """
        Affine maps x -> Ax + t with A from lattice_matrices() and t on the grid, kept when φ*g = g.
        :raises ResourceGuardError: when the unfiltered enumeration exceeds max_pool.
        """
        grid = self.grid
        matrices = [matrix for matrix in self.lattice_matrices()
                    if np.allclose(matrix.T @ g.matrix[(Ellipsis,) + (0,) * grid.n] @ matrix,
                                   g.matrix[(Ellipsis,) + (0,) * grid.n], atol=1e-12) or not g.is_constant()]
        shifts = list(itertools.product(range(0, grid.N, translation_step), repeat=grid.n))
        size = len(matrices) * len(shifts)
        if size > self.max_pool:
            raise ResourceGuardError(f"candidate pool of {size} maps exceeds the guard of {self.max_pool}")
        scale = max(1.0, g.norm())
        pool = []
        for matrix in matrices:
            for shift in shifts:
                phi = AffineDiffeo.from_arrays(grid, matrix, shift)
                if (pullback(phi, g) - g).norm() <= self.tolerance * scale:
                    pool.append(phi)
        self.logger.info(f"candidate pool: {len(pool)} of {size} affine maps preserve the metric")
        return pool

    def isometry_element(self, phi: AffineDiffeo, V: GenMetric) -> GroupElement:
        """Π⁻¹(φ): exact (φ, φ*ω - ω); odd (φ, φ*ω - ω - A∧φ*γ, A = φ*γ - γ)."""
        B = pullback(phi, V.omega) - V.omega
        if V.gamma is None:
            return GroupElement(phi=phi, B=B)
        pulled_gamma = pullback(phi, V.gamma)
        A = pulled_gamma - V.gamma
        return GroupElement(phi=phi, B=B - wedge(A, pulled_gamma), A=A)

    def isometry_group(self, V: GenMetric, pool: Sequence[AffineDiffeo],
                       twist: Optional[TwistData] = None) -> FiniteSymmetryGroup:
        """
        Members of the pool whose Π⁻¹ image lies in GDiff and fixes V.
        :raises NotAGroupError: when the survivors are not closed (tolerance inconsistency).
        """
        twist = self.twist if twist is None else twist
        if twist.kind != V.kind:
            raise KindMismatchError(f"{twist.kind} twist with an {V.kind} generalized metric")
        scale = max(1.0, V.omega.norm(), twist.H.norm())
        members = []
        for phi in pool:
            element = self.isometry_element(phi, V)
            if isometry_defect(twist, element, V).largest <= self.tolerance * scale:
                members.append(element)
        if not any(element.phi.is_identity() for element in members):
            members.insert(0, self.isometry_element(AffineDiffeo.identity(self.grid), V))
        return FiniteSymmetryGroup.from_elements(members)

    def metric_isometry_group(self, V: GenMetric, pool: Sequence[AffineDiffeo]) -> FiniteSymmetryGroup:
        """Isom(g) within the pool, as pure pairs (φ, 0)."""
        scale = max(1.0, V.g.norm())
        kind = V.kind
        members = [GroupElement.diffeo(phi, kind) for phi in pool
                   if (pullback(phi, V.g) - V.g).norm() <= self.tolerance * scale]
        if not any(element.phi.is_identity() for element in members):
            members.insert(0, GroupElement.identity(self.grid, kind))
        return FiniteSymmetryGroup.from_elements(members)

    # labels and conjugacy

    def harmonic_signature(self, group: FiniteSymmetryGroup) -> List[Tuple[int, int]]:
        """Sorted traces of φ* on harmonic 1-forms and 2-forms."""
        signature = []
        for phi in group.projection():
            A = phi.matrix
            trace_one = int(np.trace(A))
            trace_two = int(round((np.trace(A) ** 2 - np.trace(A @ A)) / 2))
            signature.append((trace_one, trace_two))
        return sorted(signature)

    def table_hash(self, group: FiniteSymmetryGroup) -> str:
        payload = json.dumps({"orders": sorted(group.element_orders()), "profile": group.order_profile()},
                             sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    def conjugate_group(self, group: FiniteSymmetryGroup, h: GroupElement) -> List[GroupElement]:
        return [conjugate(element, h) for element in group.elements]

    def same_elements(self, elements: Sequence[GroupElement], group: FiniteSymmetryGroup) -> bool:
        by_key = {element.phi.key: element for element in group.elements}
        if len(elements) != group.order:
            return False
        scale = max([1.0] + [element.B.norm() for element in group.elements])
        return all(element.phi.key in by_key and
                   _same_element(element, by_key[element.phi.key], self.tolerance * scale)
                   for element in elements)

    def conjugator_pool(self, diffeos: Sequence[AffineDiffeo], kind: str = SectionKind.exact,
                        bound: int = 2, amplitudes: Sequence[float] = (1.0, -1.0, 0.5, -0.5)) -> List[GroupElement]:
        """
        B-field shifts from single Fourier modes with |k|∞ <= bound, the given diffeomorphisms,
        and linear diffeomorphisms combined with constant B-fields.
        """
        grid = self.grid
        A = KForm.zeros(grid, 1) if kind == SectionKind.odd else None
        fields = []
        for component in grid.multi_indices(2):
            for wavevector in _half_space_wavevectors(grid.n, min(bound, grid.bandwidth)):
                for amplitude in amplitudes:
                    mode = FourierMode(component=list(component), wavevector=list(wavevector), amplitude=amplitude)
                    fields.append((wavevector, sample(FourierModeSpec(degree=2, modes=[mode]), grid)))
        pool = [GroupElement(phi=AffineDiffeo.identity(grid), B=B, A=A) for _, B in fields]
        pool += [GroupElement.diffeo(phi, kind) for phi in diffeos]
        linear = [phi for phi in diffeos if not any(phi.shift) and not phi.is_identity()]
        constant = [B for wavevector, B in fields if not any(wavevector)]
        pool += [GroupElement(phi=phi, B=B, A=A) for phi in linear for B in constant]
        return pool

    def conjugacy_classify(self, groups: Sequence[FiniteSymmetryGroup],
                           conjugators: Sequence[GroupElement]) -> List[StratumLabel]:
        """
        Bucket groups by order, table hash and harmonic signature, then merge groups related by
        conjugation with an element of the conjugator pool.
        """
        invariants = [(group.order, self.table_hash(group), tuple(self.harmonic_signature(group)))
                      for group in groups]
        parent = list(range(len(groups)))

        def root(index):
            while parent[index] != index:
                parent[index] = parent[parent[index]]
                index = parent[index]
            return index

        for i, j in itertools.combinations(range(len(groups)), 2):
            if invariants[i] != invariants[j] or root(i) == root(j):
                continue
            if self.same_elements(groups[i].elements, groups[j]) or any(
                    self.same_elements(self.conjugate_group(groups[i], h), groups[j]) for h in conjugators):
                parent[root(j)] = root(i)

        representatives = sorted({root(index) for index in range(len(groups))})
        labels = []
        for index, group in enumerate(groups):
            order, digest, signature = invariants[index]
            labels.append(StratumLabel(order=order, table_hash=digest, harmonic_signature=list(signature),
                                       class_index=representatives.index(root(index)),
                                       representative=root(index)))
        return labels

    # conjugator and perturbations

    def _average_pullback(self, field, diffeos: Sequence[AffineDiffeo]):
        total = None
        for phi in diffeos:
            pulled = pullback(phi, field)
            total = pulled if total is None else total + pulled
        return total * (1.0 / len(diffeos))

    def _conjugator_parts(self, V: GenMetric, group: FiniteSymmetryGroup, hodge: HodgeContext,
                          sign: float) -> Tuple[KForm, KForm]:
        H = self.twist.H
        if not H.multi_indices:
            first = KForm.zeros(self.grid, 2)
        else:
            averaged = self._average_pullback(H, group.projection())
            first = sign * hodge.codiff(hodge.green(H - averaged))
        second = hodge.closed_part(V.omega - first)
        return first, second

    def pure_defect(self, group: FiniteSymmetryGroup, C: KForm) -> float:
        """Largest ‖B‖ in (Id, C)⁻¹ G (Id, C)."""
        h = GroupElement.b_field(C, KForm.zeros(self.grid, 1) if group.elements[0].A is not None else None)
        return max(element.B.norm() for element in self.conjugate_group(group, h))

    def stratum_conjugator(self, V: GenMetric, group: FiniteSymmetryGroup,
                           hodge: Optional[HodgeContext] = None) -> Tuple[KForm, Dict[str, float]]:
        """
        C = C₁ + C₂ with C₁ = d*G(H - H'), H' the average of φ*H over Π(G), and C₂ the
        closed part of ω - C₁. Conjugating G by (Id, C) leaves pure pairs (φ, 0).
        :return: (C, diagnostics) with the certification residual and the pure defects of C and
                 of the opposite-sign reading.
        :raises CohomologyObstructionError: when dC₁ = H - H' cannot be certified.
        """
        if V.kind != SectionKind.exact:
            raise KindMismatchError("the stratum conjugator is defined for exact Courant algebroids")
        hodge = HodgeContext(V.g) if hodge is None else hodge
        first, second = self._conjugator_parts(V, group, hodge, 1.0)
        H = self.twist.H
        certification = 0.0
        if H.multi_indices:
            averaged = self._average_pullback(H, group.projection())
            certification = (H - ext_deriv_or_zero(first) - averaged).norm() / max(1.0, H.norm())
            if certification > 1e-8:
                raise CohomologyObstructionError(f"H - H' is not exact: residual {certification:.3e}")
        C = first + second
        flipped_first, flipped_second = self._conjugator_parts(V, group, hodge, -1.0)
        flipped = flipped_first + flipped_second
        diagnostics = {"certification": float(certification),
                       "pure_defect": self.pure_defect(group, C),
                       "pure_defect_opposite_sign": self.pure_defect(group, flipped)}
        return C, diagnostics

    def _perturbation_candidates(self, bound: int):
        grid = self.grid
        for position, (i, j) in enumerate(symmetric_index_pairs(grid.n)):
            for wavevector in _half_space_wavevectors(grid.n, bound, include_zero=False):
                for phase in (0.0, np.pi / 2):
                    mode = FourierMode(component=[], wavevector=list(wavevector), phase=phase)
                    values = sample(FourierModeSpec(degree=0, modes=[mode]), grid).values
                    packed = np.zeros((len(symmetric_index_pairs(grid.n)),) + grid.shape)
                    packed[position] = values
                    yield ({"component": [i, j], "wavevector": list(wavevector), "phase": phase},
                           SymTensor2.from_packed(grid, packed), KForm.zeros(grid, 2))
        for component in grid.multi_indices(2):
            for wavevector in _half_space_wavevectors(grid.n, bound, include_zero=False):
                for phase in (0.0, np.pi / 2):
                    mode = FourierMode(component=list(component), wavevector=list(wavevector), phase=phase)
                    yield ({"component": list(component), "wavevector": list(wavevector), "phase": phase},
                           SymTensor2.zeros(grid), sample(FourierModeSpec(degree=2, modes=[mode]), grid))

    def invariant_perturbation(self, V: GenMetric, group: FiniteSymmetryGroup,
                               larger: FiniteSymmetryGroup, bound: int = 2,
                               steps: Sequence[float] = (1e-2, 1e-3)) -> PerturbationResult:
        """
        Search single-mode perturbations, averaged over Π(G), that some element of the larger
        group does not preserve, and certify for each step t that the perturbed data keeps G
        and loses the larger group.
        """
        if not larger.contains_diffeos(group) or larger.order == group.order:
            self.logger.info("invariant perturbation: groups are not strictly nested")
            return PerturbationResult(found=False, lattice_bound=bound)
        diffeos = group.projection()
        pool = larger.projection()
        bound = min(bound, self.grid.bandwidth)
        for mode, h, omega_h in self._perturbation_candidates(bound):
            h = self._average_pullback(h, diffeos)
            omega_h = self._average_pullback(omega_h, diffeos)
            size = h.norm() + omega_h.norm()
            if size <= 1e-8:
                continue
            breaks = any((pullback(phi, h) - h).norm() + (pullback(phi, omega_h) - omega_h).norm() > 1e-6 * size
                         for phi in pool)
            if not breaks:
                continue
            certificate = {}
            for t in steps:
                perturbed = GenMetric(g=V.g + h * t, omega=V.omega + omega_h * t, gamma=V.gamma)
                survivors = self.isometry_group(perturbed, pool)
                certificate[f"{t:g}"] = survivors.contains_diffeos(group) and not survivors.contains_diffeos(larger)
            if all(certificate.values()):
                self.logger.info(f"invariant perturbation found at mode {mode}")
                return PerturbationResult(found=True, h=h, omega_h=omega_h, mode=mode,
                                          certificate=certificate, lattice_bound=bound)
        self.logger.warning(f"no invariant perturbation separates the groups within lattice bound {bound}")
        return PerturbationResult(found=False, lattice_bound=bound)

    # cross checks

    def conjugation_identity_check(self, V: GenMetric, psi: AffineDiffeo, C: KForm,
                                   pool: Sequence[AffineDiffeo]) -> Dict[str, float]:
        """
        (ψ,C)⁻¹ Isom_H(g,ω) (ψ,C) = Isom_{ψ*H - dC}(ψ*g, ψ*ω - C) as sets over the transported pool.
        :return: set mismatch (0 or 1), order, and the membership defect of the conjugates for
                 the twist ψ*(H + dC).
        """
        if V.kind != SectionKind.exact:
            raise KindMismatchError("the conjugation identity is checked for exact data")
        h = GroupElement(phi=psi, B=C)
        group = self.isometry_group(V, pool)
        conjugates = self.conjugate_group(group, h)

        shifted = TwistData.exact(self.grid, H=pullback(psi, self.twist.H) - ext_deriv_or_zero(C))
        transported = [psi.inverse().compose(phi).compose(psi) for phi in pool]
        image = self.isometry_group(act(h, V), transported, twist=shifted)

        displayed = TwistData.unchecked(self.grid, SectionKind.exact,
                                        H=pullback(psi, self.twist.H + ext_deriv_or_zero(C)))
        displayed_defect = max(max(membership_defect(displayed, element)) for element in conjugates)
        return {"set_mismatch": 0.0 if self.same_elements(conjugates, image) else 1.0,
                "order": float(group.order),
                "displayed_twist_membership": float(displayed_defect)}

    def moduli_projection_report(self, samples: Sequence[Tuple[TwistData, GenMetric]], pool_step: int = 1,
                                 conjugators: Optional[Sequence[GroupElement]] = None) -> List[Dict]:
        """
        Per sample: generalized and metric isometry orders, class labels, whether a pure-making
        conjugator was found, and whether Π(Isom_H) lies inside Isom(g).
        :param conjugators: pool used for the class labels. By default the linear maps of every
                            sample pool with single-mode B-fields, plus (Id, ±(C_i - C_j)) for each
                            pair of found stratum conjugators.
        """
        rows, groups, metric_groups, linear, found = [], [], [], [], []
        for twist, V in samples:
            service = StrataService(twist, tolerance=self.tolerance, max_pool=self.max_pool,
                                    max_order=self.max_order)
            pool = service.candidate_pool(V.g, translation_step=pool_step)
            group = service.isometry_group(V, pool)
            metric_group = service.metric_isometry_group(V, pool)
            linear += [phi for phi in pool if not any(phi.shift)
                       and not any(phi.A == other.A for other in linear)]
            conjugator_found = False
            if V.kind == SectionKind.exact:
                try:
                    C, diagnostics = service.stratum_conjugator(V, group)
                    conjugator_found = diagnostics["pure_defect"] <= 1e-8
                    if conjugator_found:
                        found.append(C)
                except CohomologyObstructionError as error:
                    self.logger.warning(f"stratum conjugator: {error}")
            groups.append(group)
            metric_groups.append(metric_group)
            rows.append({"isom_order": group.order,
                         "metric_isom_order": metric_group.order,
                         "conjugator_found": conjugator_found,
                         "projects_into_metric_isometries": metric_group.contains_diffeos(group)})
        if conjugators is None:
            kind = samples[0][1].kind if samples else SectionKind.exact
            conjugators = self.conjugator_pool(linear, kind)
            if kind == SectionKind.exact:
                conjugators += [GroupElement.b_field((first - second) * sign)
                                for first, second in itertools.combinations(found, 2) for sign in (1.0, -1.0)]
        labels = self.conjugacy_classify(groups, conjugators)
        metric_labels = self.conjugacy_classify(metric_groups, conjugators)
        for row, label, metric_label in zip(rows, labels, metric_labels):
            row["isom_class_label"] = label.class_index
            row["projection_class"] = metric_label.class_index
        return rows
