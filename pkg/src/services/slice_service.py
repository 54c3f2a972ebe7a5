import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as spla

from src.calculus.exterior import ext_deriv, interior, lie_form, lie_sym, wedge
from src.calculus.spectral import band_basis
from src.errors import ConditioningError, DegreeError, KindMismatchError, ResourceGuardError
from src.models.courant_models import OddSection, TwistData
from src.models.fields import KForm, SymTensor2, VectorField, symmetric_index_pairs
from src.models.genmetric_models import GenMetric
from src.models.operator_models import (BlockKind, ComplexGreen, DecompositionReport, FieldBlock, FieldSpaceDescriptor,
                                        GroupDecomposition, OperatorMatrix)
from src.services.hodge_context import HodgeContext, compound_matrix
from src.services.symmetry_service import DerivationService


def _component_first(matrix: np.ndarray) -> np.ndarray:
    return np.moveaxis(matrix, (-2, -1), (0, 1))


def _sym_unit(n: int, i: int, j: int) -> np.ndarray:
    unit = np.zeros((n, n))
    unit[i, j] = 1.0
    unit[j, i] = 1.0
    return unit


class SliceService:
    """
    Dense-matrix realization of the deformation complexes at a generalized metric:
    assembly of the orbit operators in band coordinates, Gram adjoints, complex and Green
    operator checks, orbit projectors and the splittings used for the full symmetry group.

    Coordinates of a field are its coefficients in an orthonormal basis of the band, one
    block per scalar component; Gram matrices are nodal L² pairings for the base metric.
    """

    class Operators:
        A_exact = "A_exact"
        B_exact = "B_exact"
        A_full = "A_full"
        A_odd = "A_odd"
        B_odd = "B_odd"
        dF_first = "dF_first"
        dF_second = "dF_second"

    class Complexes:
        exact = "exact"
        odd = "odd"
        dF_complex = "dF_complex"

    def __init__(self,
                 V: GenMetric,
                 twist: TwistData,
                 reference: HodgeContext,
                 rank_tolerance: float = 1e-8,
                 max_matrix_entries: int = 25_000_000):
        if V.kind != twist.kind:
            raise KindMismatchError(f"{V.kind} generalized metric with {twist.kind} twist data")
        self.V = V
        self.twist = twist
        self.grid = V.grid
        self.reference = reference
        self.rank_tolerance = rank_tolerance
        self.max_matrix_entries = max_matrix_entries
        self.columns = band_basis(self.grid.n, self.grid.N)
        self.derivations = DerivationService(twist=twist, reference=reference)
        self.logger = logging.getLogger(__name__)

        pointwise = V.g.pointwise()
        self._inverse = np.linalg.inv(pointwise)
        self._density = np.sqrt(np.linalg.det(pointwise))
        self._descriptors: Dict[str, FieldSpaceDescriptor] = {}

    # field spaces

    def _space_blocks(self, name: str) -> Tuple[List[FieldBlock], bool]:
        vector = FieldBlock(kind=BlockKind.vector)
        sym = FieldBlock(kind=BlockKind.sym)

        def form(degree):
            return FieldBlock(kind=BlockKind.form, degree=degree)

        spaces = {
            "functions": ([form(0)], False),
            "one_forms": ([form(1)], False),
            "sections": ([vector, form(1)], False),
            "odd_sections": ([vector, form(0), form(1)], False),
            "metric_tangents": ([sym, form(2)], False),
            "odd_metric_tangents": ([sym, form(2), form(1)], True),
            "derivation_parameters": ([vector, form(1),
                                       FieldBlock(kind=BlockKind.parameters,
                                                  size=len(self.reference.harmonic_basis(2)))], False),
            "forms_1_0": ([form(1), form(0)], False),
            "forms_2_1": ([form(2), form(1)], False),
            "forms_3_2": ([form(3), form(2)], False),
        }
        if name not in spaces:
            raise ValueError(f"unknown field space {name}")
        return spaces[name]

    def _block_weight(self, block: FieldBlock) -> np.ndarray:
        n = self.grid.n
        if block.kind == BlockKind.vector:
            return self.V.g.matrix * self._density
        if block.kind == BlockKind.form:
            if block.degree > n:
                return np.zeros((0, 0) + self.grid.shape)
            return _component_first(compound_matrix(self._inverse, block.degree)) * self._density
        pairs = symmetric_index_pairs(n)
        raised = [self._inverse @ _sym_unit(n, i, j) for i, j in pairs]
        weight = np.empty((len(pairs), len(pairs)) + self.grid.shape)
        for a, left in enumerate(raised):
            for b, right in enumerate(raised):
                weight[a, b] = np.einsum("...ij,...ji->...", left, right) * self._density
        return weight

    def _twist_coupling(self, blocks: List[FieldBlock]) -> np.ndarray:
        """Pointwise L with (ġ, ω̇, γ̇) ↦ (ġ, ω̇ - γ∧γ̇, γ̇)."""
        grid = self.grid
        sizes = [block.components(grid) for block in blocks]
        total = sum(sizes)
        coupling = np.zeros((total, total) + grid.shape)
        for index in range(total):
            coupling[index, index] = 1.0
        two_start, one_start = sizes[0], sizes[0] + sizes[1]
        gamma = self.V.gamma.components
        for position, (i, j) in enumerate(grid.multi_indices(2)):
            coupling[two_start + position, one_start + j] -= gamma[i]
            coupling[two_start + position, one_start + i] += gamma[j]
        return coupling

    def _nodal_gram(self, weight: np.ndarray) -> np.ndarray:
        m = self.columns.shape[1]
        size = weight.shape[0]
        gram = np.zeros((size * m, size * m))
        for a in range(size):
            for b in range(size):
                values = weight[a, b].ravel()
                if not np.any(values):
                    continue
                gram[a * m:(a + 1) * m, b * m:(b + 1) * m] = self.columns.T @ (values[:, None] * self.columns)
        return self.grid.cell_volume * gram

    def descriptor(self, name: str) -> FieldSpaceDescriptor:
        if name in self._descriptors:
            return self._descriptors[name]
        blocks, twisted = self._space_blocks(name)
        field_blocks = [block for block in blocks if block.kind != BlockKind.parameters]
        sizes = [block.components(self.grid) for block in field_blocks]
        weight = np.zeros((sum(sizes), sum(sizes)) + self.grid.shape)
        start = 0
        for block, size in zip(field_blocks, sizes):
            weight[start:start + size, start:start + size] = self._block_weight(block)
            start += size
        if twisted:
            coupling = self._twist_coupling(field_blocks)
            weight = np.einsum("ai...,ab...,bj...->ij...", coupling, weight, coupling)
        gram = self._nodal_gram(weight)
        parameters = sum(block.size for block in blocks if block.kind == BlockKind.parameters)
        if parameters:
            gram = spla.block_diag(gram, np.eye(parameters))
        descriptor = FieldSpaceDescriptor(name=name, grid=self.grid, blocks=blocks, gram=gram)
        self._descriptors[name] = descriptor
        return descriptor

    def twisted_gram(self) -> np.ndarray:
        """Gram matrix of h_{V₊} on (ġ, ω̇, γ̇) in band coordinates."""
        if self.V.gamma is None:
            raise KindMismatchError("the twisted pairing needs an odd generalized metric")
        return self.descriptor("odd_metric_tangents").gram

    def to_fields(self, space: FieldSpaceDescriptor, x: np.ndarray) -> List:
        grid = self.grid
        m = self.columns.shape[1]
        offsets = space.offsets()
        fields = []
        for block, start, stop in zip(space.blocks, offsets[:-1], offsets[1:]):
            chunk = np.asarray(x[start:stop], dtype=float)
            if block.kind == BlockKind.parameters:
                fields.append(chunk)
                continue
            size = block.components(grid)
            values = (self.columns @ chunk.reshape(size, m).T).T.reshape((size,) + grid.shape)
            if block.kind == BlockKind.vector:
                fields.append(VectorField(grid=grid, components=values))
            elif block.kind == BlockKind.sym:
                fields.append(SymTensor2.from_packed(grid, values))
            else:
                fields.append(KForm(grid=grid, degree=block.degree, components=values))
        return fields

    def to_coordinates(self, space: FieldSpaceDescriptor, fields: Sequence) -> np.ndarray:
        parts = []
        for block, field in zip(space.blocks, fields):
            if block.kind == BlockKind.parameters:
                parts.append(np.asarray(field, dtype=float))
                continue
            values = field.packed() if block.kind == BlockKind.sym else field.components
            parts.append((values.reshape(values.shape[0], -1) @ self.columns).ravel())
        return np.concatenate(parts)

    # operators

    def _a_exact(self, fields):
        u, alpha = fields[:2]
        omega = lie_form(u, self.V.omega) - interior(u, self.twist.H) + ext_deriv(alpha)
        return [lie_sym(u, self.V.g), omega]

    def _a_full(self, fields):
        g_dot, omega_dot = self._a_exact(fields)
        for t, h in zip(fields[2], self.reference.harmonic_basis(2)):
            omega_dot = omega_dot - float(t) * h
        return [g_dot, omega_dot]

    def odd_orbit_derivative(self, u: VectorField, b: KForm, a: KForm) -> List:
        """A'(u, (b, a)) = (L_u g, (L_uω - b - a∧γ, L_uγ - a))."""
        gamma = self.V.gamma
        return [lie_sym(u, self.V.g), lie_form(u, self.V.omega) - b - wedge(a, gamma), lie_form(u, gamma) - a]

    def _a_odd(self, fields):
        u, f, alpha = fields
        D = self.derivations.iota_e(OddSection(u=u, f=f, alpha=alpha))
        return self.odd_orbit_derivative(D.u, D.b, D.a)

    def _b_odd(self, fields):
        f = fields[0]
        return [VectorField.zeros(self.grid), KForm.zeros(self.grid, 0), ext_deriv(f)]

    def _twisted_differential(self, fields):
        return list(self.derivations.twisted_differential(*fields))

    def _operator_table(self) -> Dict[str, Tuple[str, str, Callable]]:
        grid = self.grid
        return {
            self.Operators.A_exact: ("sections", "metric_tangents", self._a_exact),
            self.Operators.B_exact: ("functions", "sections",
                                     lambda fields: [VectorField.zeros(grid), ext_deriv(fields[0])]),
            self.Operators.A_full: ("derivation_parameters", "metric_tangents", self._a_full),
            self.Operators.A_odd: ("odd_sections", "odd_metric_tangents", self._a_odd),
            self.Operators.B_odd: ("functions", "odd_sections", self._b_odd),
            self.Operators.dF_first: ("forms_1_0", "forms_2_1", self._twisted_differential),
            self.Operators.dF_second: ("forms_2_1", "forms_3_2", self._twisted_differential),
        }

    def functional(self, name: str) -> Callable:
        return self._operator_table()[name][2]

    def assemble_functional(self,
                            domain: FieldSpaceDescriptor,
                            codomain: FieldSpaceDescriptor,
                            fn: Callable,
                            name: str = "functional") -> OperatorMatrix:
        """
        Dense matrix of a linear map given on fields, one column per domain coordinate.
        :raises ResourceGuardError: when the matrix would exceed max_matrix_entries.
        """
        entries = domain.dimension * codomain.dimension
        if entries > self.max_matrix_entries:
            raise ResourceGuardError(f"{name}: {entries} matrix entries exceed the guard of {self.max_matrix_entries}")
        matrix = np.empty((codomain.dimension, domain.dimension))
        unit = np.zeros(domain.dimension)
        for column in range(domain.dimension):
            unit[column] = 1.0
            matrix[:, column] = self.to_coordinates(codomain, fn(self.to_fields(domain, unit)))
            unit[column] = 0.0
        self.logger.debug(f"assembled {name}: {codomain.dimension}x{domain.dimension}")
        return OperatorMatrix(name=name, domain=domain, codomain=codomain, matrix=matrix)

    def assemble(self, name: str) -> OperatorMatrix:
        table = self._operator_table()
        if name not in table:
            raise ValueError(f"unknown operator {name}; expected one of {sorted(table)}")
        if name in (self.Operators.A_odd, self.Operators.B_odd, self.Operators.dF_first,
                    self.Operators.dF_second) and not self.twist.is_odd:
            raise KindMismatchError(f"{name} needs odd twist data")
        if name in (self.Operators.A_exact, self.Operators.A_full) and self.twist.is_odd:
            raise KindMismatchError(f"{name} needs exact twist data")
        domain, codomain, fn = table[name]
        return self.assemble_functional(self.descriptor(domain), self.descriptor(codomain), fn, name)

    def assemble_complex(self, name: str) -> Tuple[OperatorMatrix, OperatorMatrix]:
        """(first, second) operators of the exact, odd or d_F complex."""
        pairs = {
            self.Complexes.exact: (self.Operators.B_exact, self.Operators.A_exact),
            self.Complexes.odd: (self.Operators.B_odd, self.Operators.A_odd),
            self.Complexes.dF_complex: (self.Operators.dF_first, self.Operators.dF_second),
        }
        if name not in pairs:
            raise ValueError(f"unknown complex {name}; expected one of {sorted(pairs)}")
        first, second = pairs[name]
        return self.assemble(first), self.assemble(second)

    def probe_residual(self, op: OperatorMatrix, fn: Callable, probes: int,
                       rng: np.random.Generator) -> float:
        """Largest relative gap between matrix action and functional evaluation on random fields."""
        worst = 0.0
        for _ in range(probes):
            x = rng.standard_normal(op.domain.dimension)
            expected = self.to_coordinates(op.codomain, fn(self.to_fields(op.domain, x)))
            gap = np.linalg.norm(op @ x - expected)
            worst = max(worst, gap / max(1.0, np.linalg.norm(expected)))
        return float(worst)

    # linear algebra

    @staticmethod
    def _factor(space: FieldSpaceDescriptor) -> np.ndarray:
        return spla.cholesky(space.gram, lower=True)

    def orthonormal_matrix(self, op: OperatorMatrix) -> np.ndarray:
        """Matrix of op between Gram-orthonormal coordinates: L_codᵀ A L_dom⁻ᵀ."""
        left = self._factor(op.codomain)
        right = self._factor(op.domain)
        return left.T @ spla.solve_triangular(right, op.matrix.T, lower=True).T

    def _from_orthonormal(self, space: FieldSpaceDescriptor, matrix: np.ndarray) -> np.ndarray:
        """Operator on space given in orthonormal coordinates, back in band coordinates."""
        factor = self._factor(space)
        return spla.solve_triangular(factor.T, matrix @ factor.T, lower=False)

    def svd(self, matrix: np.ndarray, label: str) -> Tuple[int, np.ndarray, np.ndarray, np.ndarray]:
        """
        Full SVD with numerical rank at rank_tolerance·σ_max. Singular values within a factor 10
        of the threshold trigger a recomputation with the gesvd driver.
        :return: (rank, U, s, Vt).
        """
        U, s, Vt = spla.svd(matrix, full_matrices=True)
        if s.size == 0 or s[0] == 0.0:
            return 0, U, s, Vt
        threshold = self.rank_tolerance * s[0]
        if np.any((s > threshold / 10.0) & (s < threshold * 10.0)):
            self.logger.warning(f"{label}: singular values near the rank threshold, recomputing with gesvd")
            U, s, Vt = spla.svd(matrix, full_matrices=True, lapack_driver="gesvd")
            threshold = self.rank_tolerance * s[0]
        return int(np.sum(s > threshold)), U, s, Vt

    def adjoint(self, op: OperatorMatrix) -> OperatorMatrix:
        """Gram adjoint G_dom⁻¹ Aᵀ G_cod."""
        matrix = spla.solve(op.domain.gram, op.matrix.T @ op.codomain.gram, assume_a="pos")
        name = op.name[:-1] if op.name.endswith("*") else f"{op.name}*"
        return OperatorMatrix(name=name, domain=op.codomain, codomain=op.domain, matrix=matrix)

    def complex_check(self, B: OperatorMatrix, A: OperatorMatrix) -> float:
        """Relative operator norm ‖AB‖ / (‖A‖‖B‖) in orthonormal coordinates."""
        if not B.codomain.compatible(A.domain):
            raise ValueError(f"codomain of {B.name} ({B.codomain.name}) is not the domain of {A.name} "
                             f"({A.domain.name})")
        left = self.orthonormal_matrix(A)
        right = self.orthonormal_matrix(B)
        scale = np.linalg.norm(left, 2) * np.linalg.norm(right, 2)
        if scale == 0.0:
            return 0.0
        return float(np.linalg.norm(left @ right, 2) / scale)

    def complex_green(self, A: OperatorMatrix, B: OperatorMatrix) -> ComplexGreen:
        """
        Pseudo-inverse of Δ_c = A*A + BB* on the middle space, through the SVD.
        :raises ConditioningError: when the smallest kept singular value falls below 1e-10.
        """
        if not B.codomain.compatible(A.domain):
            raise ValueError(f"{B.name} and {A.name} do not form a complex")
        left = self.orthonormal_matrix(A)
        right = self.orthonormal_matrix(B)
        laplacian = left.T @ left + right @ right.T
        rank, _, s, Vt = self.svd(0.5 * (laplacian + laplacian.T), f"Laplacian of {B.name}, {A.name}")
        kept = Vt[:rank].T
        if rank and s[rank - 1] < 1e-10:
            raise ConditioningError(f"complex Laplacian has singular value {s[rank - 1]:.3e} in its kept range")
        green_hat = kept @ np.diag(1.0 / s[:rank]) @ kept.T
        kernel_hat = np.eye(laplacian.shape[0]) - kept @ kept.T
        middle = A.domain
        green = OperatorMatrix(name=f"G[{B.name},{A.name}]", domain=middle, codomain=middle,
                               matrix=self._from_orthonormal(middle, green_hat))
        kernel = OperatorMatrix(name=f"K[{B.name},{A.name}]", domain=middle, codomain=middle,
                                matrix=self._from_orthonormal(middle, kernel_hat))
        smallest = float(s[rank - 1]) if rank else 0.0
        return ComplexGreen(green=green, kernel_projector=kernel, rank=rank, smallest_nonzero=smallest)

    def orbit_projector(self, A: OperatorMatrix, green: ComplexGreen) -> OperatorMatrix:
        """P = A G_c A*."""
        matrix = A.matrix @ green.green.matrix @ self.adjoint(A).matrix
        return OperatorMatrix(name=f"P[{A.name}]", domain=A.codomain, codomain=A.codomain, matrix=matrix)

    def range_projector(self, A: OperatorMatrix) -> OperatorMatrix:
        """Gram-orthogonal projector onto Im A from the SVD."""
        rank, U, _, _ = self.svd(self.orthonormal_matrix(A), f"range of {A.name}")
        span = U[:, :rank]
        matrix = self._from_orthonormal(A.codomain, span @ span.T)
        return OperatorMatrix(name=f"Im[{A.name}]", domain=A.codomain, codomain=A.codomain, matrix=matrix)

    def twisted_cohomology_dimension(self, first: OperatorMatrix, second: OperatorMatrix) -> int:
        """dim ker(second) - rank(first) at matrix level."""
        first_rank = self.svd(self.orthonormal_matrix(first), first.name)[0]
        second_rank = self.svd(self.orthonormal_matrix(second), second.name)[0]
        return second.domain.dimension - second_rank - first_rank

    def image_kernel_orthogonality(self, A: OperatorMatrix) -> Tuple[float, int]:
        """
        Largest Gram pairing between Im A and ker A*, with ker A* taken from the assembled adjoint.
        :return: (relative residual, rank of A*).
        """
        rank, _, _, Vt = self.svd(self.orthonormal_matrix(A), A.name)
        adjoint = self.adjoint(A)
        adjoint_rank, _, _, adjoint_Vt = self.svd(self.orthonormal_matrix(adjoint), adjoint.name)
        factor = self._factor(A.codomain)
        adjoint_kernel = spla.solve_triangular(factor.T, adjoint_Vt[adjoint_rank:].T, lower=False)
        image = A.matrix @ Vt[:rank].T
        pairing = image.T @ A.codomain.gram @ adjoint_kernel
        return float(np.linalg.norm(pairing) / max(1.0, np.linalg.norm(image))), adjoint_rank

    def full_group_decomposition(self, A: OperatorMatrix, harmonic_basis: List[KForm],
                                 rng: Optional[np.random.Generator] = None) -> GroupDecomposition:
        """
        Split A'(0, h_i) = (0, -h_i) against Im A: f_i = (I - P)A'(0, h_i). Returns F, the
        projector p₀ onto F and ν' = ker A* ⊖ F, with reassembly residuals.
        """
        rng = np.random.default_rng(0) if rng is None else rng
        codomain = A.codomain
        factor = self._factor(codomain)
        rank, U, _, _ = self.svd(self.orthonormal_matrix(A), f"range of {A.name}")
        image_hat = U[:, :rank]
        kernel_hat = U[:, rank:]

        shifts = [self.to_coordinates(codomain, [SymTensor2.zeros(self.grid), -h]) for h in harmonic_basis]
        shifts_hat = factor.T @ np.stack(shifts, axis=1) if shifts else np.zeros((codomain.dimension, 0))
        complement_hat = shifts_hat - image_hat @ (image_hat.T @ shifts_hat)
        f_rank, f_U, _, _ = self.svd(complement_hat, "harmonic complement") if shifts else (0, None, None, None)
        f_hat = f_U[:, :f_rank] if f_rank else np.zeros((codomain.dimension, 0))

        remainder = kernel_hat - f_hat @ (f_hat.T @ kernel_hat)
        nu_rank, nu_U, _, _ = self.svd(remainder, "normal complement")
        nu_hat = nu_U[:, :nu_rank]

        p0 = OperatorMatrix(name="p0", domain=codomain, codomain=codomain,
                            matrix=self._from_orthonormal(codomain, f_hat @ f_hat.T))

        probe = rng.standard_normal(codomain.dimension)
        parts = image_hat @ (image_hat.T @ probe) + f_hat @ (f_hat.T @ probe) + nu_hat @ (nu_hat.T @ probe)
        harmonic_hat = shifts_hat
        if harmonic_hat.shape[1]:
            harmonic_hat = spla.orth(harmonic_hat)
        kernel_probes = kernel_hat @ rng.standard_normal((kernel_hat.shape[1], 4))
        harmonic_gap = (f_hat @ (f_hat.T @ kernel_probes)) - harmonic_hat @ (harmonic_hat.T @ kernel_probes)
        residuals = {
            "reassembly": float(np.linalg.norm(probe - parts) / np.linalg.norm(probe)),
            "image_direct_sum": float(abs(self.svd(np.hstack([image_hat, f_hat]), "Im A + F")[0] - rank - f_rank)),
            "dimension_bookkeeping": float(abs(rank + f_rank + nu_rank - codomain.dimension)),
            "f_in_kernel_of_adjoint": float(np.linalg.norm(image_hat.T @ f_hat)) if f_rank else 0.0,
            "p0_vs_harmonic_projection": float(np.linalg.norm(harmonic_gap)
                                               / max(1.0, np.linalg.norm(kernel_probes))),
        }
        self.logger.info(f"full group decomposition: rank A={rank}, dim F={f_rank}, dim nu'={nu_rank}")
        return GroupDecomposition(f_basis=spla.solve_triangular(factor.T, f_hat, lower=False),
                                  p0=p0,
                                  nu_prime=spla.solve_triangular(factor.T, nu_hat, lower=False),
                                  residuals=residuals)

    def direct_sum_checks(self, A_full: OperatorMatrix, A_exact: OperatorMatrix,
                          harmonic_basis: List[KForm], tolerance: float = 1e-8) -> DecompositionReport:
        """
        Kernel and image splittings: ker A₀ ⊂ ker A, E = ker A ⊕ E₂ ⊕ H' with H' completed from
        the harmonic parameter directions, and codomain = Im A ⊕ ker A* orthogonally.
        """
        if A_full.domain.dimension != A_exact.domain.dimension + len(harmonic_basis):
            raise DegreeError("A_full must extend A_exact by one parameter per harmonic 2-form")
        full_hat = self.orthonormal_matrix(A_full)
        exact_hat = self.orthonormal_matrix(A_exact)
        rank, _, _, Vt = self.svd(full_hat, A_full.name)
        exact_rank, _, _, exact_Vt = self.svd(exact_hat, A_exact.name)
        dimension = A_full.domain.dimension
        parameters = len(harmonic_basis)

        kernel = Vt[rank:].T
        padding = np.zeros((parameters, exact_Vt.shape[0] - exact_rank))
        exact_kernel = np.vstack([exact_Vt[exact_rank:].T, padding])
        e2 = np.vstack([exact_Vt[:exact_rank].T, np.zeros((parameters, exact_rank))])

        stacked = np.hstack([kernel, e2])
        stacked_rank = self.svd(stacked, "ker A + E2")[0] if stacked.size else 0
        completion = []
        for index in range(parameters):
            direction = np.zeros((dimension, 1))
            direction[A_exact.domain.dimension + index] = 1.0
            candidate = np.hstack([stacked] + completion + [direction])
            if self.svd(candidate, "H' completion")[0] > stacked_rank + len(completion):
                completion.append(direction)
        total = np.hstack([stacked] + completion)
        total_rank = self.svd(total, "ker A + E2 + H'")[0]

        orthogonality, adjoint_rank = self.image_kernel_orthogonality(A_full)

        dims = {
            "domain": dimension,
            "codomain": A_full.codomain.dimension,
            "kernel": dimension - rank,
            "kernel_exact": exact_kernel.shape[1],
            "kernel_complement": dimension - rank - exact_kernel.shape[1],
            "E2": exact_rank,
            "H_prime": len(completion),
            "adjoint_kernel": A_full.codomain.dimension - adjoint_rank,
        }
        residuals = {
            "kernel_inclusion": float(np.linalg.norm(full_hat @ exact_kernel)),
            "direct_sum_rank": float(abs(total_rank - dimension)),
            "dimension_bookkeeping": float(abs(dims["kernel"] + dims["E2"] + dims["H_prime"] - dimension)),
            "orthogonality": float(orthogonality),
            "codomain_split": float(abs(rank + dims["adjoint_kernel"] - A_full.codomain.dimension)),
        }
        passed = all(value <= tolerance for value in residuals.values()) and dims["kernel"] >= dims["kernel_exact"]
        return DecompositionReport(operator=A_full.name, dims=dims, rank=rank, kernel_dim=dims["kernel"],
                                   residuals=residuals, passed=passed)

    def decomposition_report(self, B: OperatorMatrix, A: OperatorMatrix,
                             tolerance: float = 1e-8) -> DecompositionReport:
        """Complex, projector idempotence and Im A ⊥ ker A* residuals of one complex."""
        complex_residual = self.complex_check(B, A)
        green = self.complex_green(A, B)
        projector = self.orbit_projector(A, green)
        idempotence = np.linalg.norm(projector.matrix @ projector.matrix - projector.matrix)
        idempotence /= max(1.0, np.linalg.norm(projector.matrix))
        rank = self.svd(self.orthonormal_matrix(A), A.name)[0]
        orthogonality = self.image_kernel_orthogonality(A)[0]
        range_gap = np.linalg.norm(projector.matrix @ A.matrix - A.matrix) / max(1.0, np.linalg.norm(A.matrix))
        residuals = {"complex": complex_residual, "idempotence": float(idempotence),
                     "orthogonality": orthogonality, "range": float(range_gap)}
        dims = {"domain": A.domain.dimension, "codomain": A.codomain.dimension,
                "laplacian_kernel": A.domain.dimension - green.rank}
        return DecompositionReport(operator=A.name, dims=dims, rank=rank, kernel_dim=A.domain.dimension - rank,
                                   residuals=residuals,
                                   passed=all(value <= tolerance for value in residuals.values()))
