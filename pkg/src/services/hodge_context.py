import logging
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg as spla
from scipy.sparse.linalg import LinearOperator, cg

from src.calculus.exterior import ext_deriv, ext_deriv_transpose
from src.calculus.spectral import band_basis, spectral_basis
from src.errors import ConvergenceError, DegreeError, GridMismatchError
from src.models.fields import KForm, SymTensor2
from src.models.grid_models import TorusGrid


def _permutation_sign(sequence) -> int:
    sequence = list(sequence)
    inversions = sum(1 for a in range(len(sequence)) for b in range(a + 1, len(sequence))
                     if sequence[a] > sequence[b])
    return -1 if inversions % 2 else 1


def compound_matrix(matrix: np.ndarray, k: int) -> np.ndarray:
    """
    k-th compound of a pointwise matrix field.
    :param matrix: array of shape (..., n, n).
    :param k: order of the compound.
    :return: array of shape (..., C(n,k), C(n,k)) of k×k minors in lexicographic multi-index order.
    """
    n = matrix.shape[-1]
    indices = list(combinations(range(n), k))
    result = np.empty(matrix.shape[:-2] + (len(indices), len(indices)))
    for a, rows in enumerate(indices):
        for b, cols in enumerate(indices):
            if k == 0:
                result[..., a, b] = 1.0
            else:
                result[..., a, b] = np.linalg.det(matrix[..., list(rows), :][..., list(cols)])
    return result


@lru_cache(maxsize=None)
def _star_terms(n: int, k: int) -> Tuple[Tuple[int, int, int], ...]:
    """(output index, input index, sign) with output K the complement of input J."""
    inputs = list(combinations(range(n), k))
    terms = []
    for out, complement in enumerate(combinations(range(n), n - k)):
        source = tuple(i for i in range(n) if i not in complement)
        terms.append((out, inputs.index(source), _permutation_sign(source + complement)))
    return tuple(terms)


class HodgeContext:
    """
    Metric-dependent calculus on band-limited forms: Hodge star, L² pairing, codifferential,
    Laplacian, harmonic bases and Green operator.

    The codifferential is the exact adjoint of d for the nodal L² pairing on the band, so
    kernel dimensions and adjoint identities hold to solver precision for any metric. Flat
    metrics take closed-form Fourier paths; other metrics use preconditioned conjugate
    gradients.
    """

    def __init__(self,
                 g: SymTensor2,
                 solver_rtol: float = 1e-12,
                 max_iterations: int = 2000):
        if not g.is_positive_definite():
            raise ValueError("metric is not positive definite at every node")
        self.grid: TorusGrid = g.grid
        self.g = g
        self.solver_rtol = solver_rtol
        self.max_iterations = max_iterations
        self.logger = logging.getLogger(__name__)

        n = self.grid.n
        self._basis = spectral_basis(n, self.grid.N)
        self.is_flat = g.is_constant() and np.allclose(g.matrix[(Ellipsis,) + (0,) * n], np.eye(n), atol=1e-14)

        pointwise = g.pointwise()
        self.volume_density = np.sqrt(np.linalg.det(pointwise))
        inverse = np.linalg.inv(pointwise)
        self._weights: Dict[int, np.ndarray] = {}
        self._inverse_weights: Dict[int, np.ndarray] = {}
        self._raise: Dict[int, np.ndarray] = {}
        for k in range(n + 1):
            raised = compound_matrix(inverse, k)
            lowered = compound_matrix(pointwise, k)
            self._raise[k] = np.moveaxis(raised, (-2, -1), (0, 1))
            self._weights[k] = np.moveaxis(raised * self.volume_density[..., None, None], (-2, -1), (0, 1))
            self._inverse_weights[k] = np.moveaxis(lowered / self.volume_density[..., None, None], (-2, -1), (0, 1))

        self._harmonic: Dict[int, List[KForm]] = {}
        for k in range(n + 1):
            self._harmonic[k] = self._build_harmonic_basis(k)

    def _check(self, omega: KForm):
        if omega.grid != self.grid:
            raise GridMismatchError(f"form on {omega.grid} used with a context on {self.grid}")

    def weight(self, omega: KForm) -> KForm:
        """Pointwise multiplication by √det g · Λ^k g⁻¹."""
        self._check(omega)
        weighted = np.einsum("ij...,j...->i...", self._weights[omega.degree], omega.components)
        return omega.with_components(weighted)

    def star(self, omega: KForm) -> KForm:
        self._check(omega)
        n, k = self.grid.n, omega.degree
        raised = np.einsum("ij...,j...->i...", self._raise[k], omega.components)
        result = np.zeros((comb(n, n - k),) + self.grid.shape)
        for out, source, sign in _star_terms(n, k):
            result[out] = sign * self.volume_density * raised[source]
        return KForm(grid=self.grid, degree=n - k, components=result)

    def l2_inner(self, alpha: KForm, beta: KForm) -> float:
        self._check(alpha)
        self._check(beta)
        if alpha.degree != beta.degree:
            raise DegreeError(f"inner product of degrees {alpha.degree} and {beta.degree}")
        pointwise = np.einsum("i...,ij...,j...->...", alpha.components, self._weights[alpha.degree], beta.components)
        return float(self.grid.cell_volume * pointwise.sum())

    def norm(self, omega: KForm) -> float:
        return float(np.sqrt(max(self.l2_inner(omega, omega), 0.0)))

    def _solve(self, matvec, rhs: np.ndarray, preconditioner, label: str) -> np.ndarray:
        size = rhs.size
        operator = LinearOperator((size, size), matvec=matvec, dtype=float)
        precondition = LinearOperator((size, size), matvec=preconditioner, dtype=float)
        scale = np.linalg.norm(rhs)
        if scale == 0.0:
            return np.zeros_like(rhs)
        solution, info = cg(operator, rhs, rtol=self.solver_rtol, atol=0.0,
                            maxiter=self.max_iterations, M=precondition)
        residual = np.linalg.norm(matvec(solution) - rhs) / scale
        if info != 0 and residual > 1e3 * self.solver_rtol:
            self.logger.warning(f"{label}: conjugate gradients stopped with info={info}")
            raise ConvergenceError(f"{label} did not converge", residual)
        return solution

    def _mass_solve(self, rhs: KForm) -> KForm:
        """Solve P W P x = rhs on the band."""
        if self.is_flat:
            return rhs
        k = rhs.degree
        shape = rhs.components.shape
        weights, inverse_weights = self._weights[k], self._inverse_weights[k]

        def matvec(x):
            x = self._basis.band_limit(x.reshape(shape))
            return self._basis.band_limit(np.einsum("ij...,j...->i...", weights, x)).ravel()

        def preconditioner(x):
            x = self._basis.band_limit(x.reshape(shape))
            return self._basis.band_limit(np.einsum("ij...,j...->i...", inverse_weights, x)).ravel()

        solution = self._solve(matvec, rhs.components.ravel(), preconditioner, f"mass solve (degree {k})")
        return rhs.with_components(solution.reshape(shape))

    def codiff(self, omega: KForm) -> KForm:
        self._check(omega)
        if omega.degree == 0:
            raise DegreeError("codifferential of a degree-0 form")
        return self._mass_solve(ext_deriv_transpose(self.weight(omega)))

    def laplacian(self, omega: KForm) -> KForm:
        self._check(omega)
        result = KForm.zeros(self.grid, omega.degree)
        if omega.degree > 0:
            result = result + ext_deriv(self.codiff(omega))
        if omega.degree < self.grid.n:
            result = result + self.codiff(ext_deriv(omega))
        return result

    def harmonic_basis(self, k: int) -> List[KForm]:
        if not 0 <= k <= self.grid.n:
            raise DegreeError(f"degree {k} outside 0..{self.grid.n}")
        return list(self._harmonic[k])

    def harmonic_projection(self, omega: KForm) -> KForm:
        self._check(omega)
        result = KForm.zeros(self.grid, omega.degree)
        for basis_form in self._harmonic[omega.degree]:
            result = result + self.l2_inner(omega, basis_form) * basis_form
        return result

    def _flat_inverse(self, values: np.ndarray) -> np.ndarray:
        """Flat spectral inverse of Δ, identity on constants."""
        symbol = self._basis.inverse_laplacian_symbol.copy()
        symbol[(0,) * self.grid.n] = 1.0
        return self._basis.apply_symbol(values, symbol)

    def _build_harmonic_basis(self, k: int) -> List[KForm]:
        grid = self.grid
        seeds = [KForm.basis_form(grid, multi_index) for multi_index in grid.multi_indices(k)]
        if self.is_flat:
            scale = (2.0 * np.pi) ** (-grid.n / 2.0)
            return [scale * seed for seed in seeds]

        candidates = []
        for seed in seeds:
            if k == 0:
                candidates.append(seed)
                continue
            # remove the exact component: solve dᵀW d β = dᵀW c on (k-1)-forms
            shape = (comb(grid.n, k - 1),) + grid.shape

            def matvec(x):
                beta = KForm(grid=grid, degree=k - 1, components=self._basis.band_limit(x.reshape(shape)))
                return ext_deriv_transpose(self.weight(ext_deriv(beta))).components.ravel()

            def preconditioner(x):
                return self._basis.band_limit(self._flat_inverse(x.reshape(shape))).ravel()

            rhs = ext_deriv_transpose(self.weight(seed)).components.ravel()
            beta = self._solve(matvec, rhs, preconditioner, f"harmonic basis (degree {k})")
            candidates.append(seed - ext_deriv(KForm(grid=grid, degree=k - 1, components=beta.reshape(shape))))

        gram = np.array([[self.l2_inner(a, b) for b in candidates] for a in candidates])
        factor = spla.cholesky(gram, lower=True)
        transform = spla.solve_triangular(factor, np.eye(len(candidates)), lower=True)
        basis = []
        for row in transform:
            combined = KForm.zeros(grid, k)
            for coefficient, candidate in zip(row, candidates):
                combined = combined + coefficient * candidate
            basis.append(combined)
        return basis

    def green(self, omega: KForm) -> KForm:
        self._check(omega)
        k = omega.degree
        if self.is_flat:
            return omega.with_components(self._basis.apply_symbol(omega.components,
                                                                  self._basis.inverse_laplacian_symbol))
        target = omega - self.harmonic_projection(omega)
        shape = omega.components.shape

        def matvec(x):
            form = KForm(grid=self.grid, degree=k, components=self._basis.band_limit(x.reshape(shape)))
            weighted = self.weight(self.laplacian(form)).components
            return self._basis.band_limit(weighted).ravel()

        def preconditioner(x):
            return self._basis.band_limit(self._flat_inverse(x.reshape(shape))).ravel()

        rhs = self._basis.band_limit(self.weight(target).components).ravel()
        solution = self._solve(matvec, rhs, preconditioner, f"Green operator (degree {k})")
        result = omega.with_components(solution.reshape(shape))
        result = result - self.harmonic_projection(result)

        residual = (self.laplacian(result) - target).norm() / max(omega.norm(), 1e-300)
        if residual > 1e-9:
            raise ConvergenceError(f"Green operator (degree {k}) missed its residual target", residual)
        return result

    def hodge_decompose(self, omega: KForm) -> Tuple[KForm, KForm, KForm]:
        """
        Split ω into exact, coexact and harmonic parts.
        :return: (dGd*ω, d*Gdω, h(ω)), each zero where the degree rules it out.
        """
        self._check(omega)
        k = omega.degree
        exact = KForm.zeros(self.grid, k)
        coexact = KForm.zeros(self.grid, k)
        if k > 0:
            exact = ext_deriv(self.green(self.codiff(omega)))
        if k < self.grid.n:
            coexact = self.codiff(self.green(ext_deriv(omega)))
        return exact, coexact, self.harmonic_projection(omega)

    def closed_part(self, omega: KForm) -> KForm:
        """Projection onto ker d: exact plus harmonic parts."""
        exact, _, harmonic = self.hodge_decompose(omega)
        return exact + harmonic

    def laplacian_matrix(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Dense Δ_k and Gram matrix in band coordinates, for kernel and spectrum checks.
        :return: (laplacian, gram) with gram @ laplacian symmetric.
        """
        grid = self.grid
        columns = band_basis(grid.n, grid.N)
        components = comb(grid.n, k)
        size = components * columns.shape[1]

        def to_form(vector):
            values = (columns @ vector.reshape(components, -1).T).T
            return KForm(grid=grid, degree=k, components=values.reshape((components,) + grid.shape))

        def to_coordinates(form):
            return (form.components.reshape(components, -1) @ columns).ravel()

        laplacian = np.empty((size, size))
        gram = np.empty((size, size))
        for index in range(size):
            unit = np.zeros(size)
            unit[index] = 1.0
            form = to_form(unit)
            laplacian[:, index] = to_coordinates(self.laplacian(form))
            gram[:, index] = to_coordinates(self.weight(form)) * grid.cell_volume
        return laplacian, 0.5 * (gram + gram.T)

    def spectrum(self, k: int, count: Optional[int] = None) -> np.ndarray:
        laplacian, gram = self.laplacian_matrix(k)
        symmetric = gram @ laplacian
        eigenvalues = spla.eigh(0.5 * (symmetric + symmetric.T), gram, eigvals_only=True)
        return eigenvalues if count is None else eigenvalues[:count]

    def kernel_dimension(self, k: int, relative_tolerance: float = 1e-8) -> int:
        eigenvalues = self.spectrum(k)
        threshold = relative_tolerance * max(np.max(np.abs(eigenvalues)), 1.0)
        return int(np.sum(np.abs(eigenvalues) <= threshold))
