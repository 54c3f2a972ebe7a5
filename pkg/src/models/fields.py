from math import comb
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, root_validator

from src.errors import DegreeError, GridMismatchError
from src.models.grid_models import TorusGrid


def _frozen_array(values) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    array.flags.writeable = False
    return array


class _GridField(BaseModel):
    grid: TorusGrid

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    def _check_grid(self, other: "_GridField"):
        if self.grid != other.grid:
            raise GridMismatchError(f"fields on different grids: {self.grid} and {other.grid}")


class KForm(_GridField):
    """
    Differential k-form sampled on the grid.
    - degree: int - form degree, 0 <= degree <= n. On T² the zero space of 3-forms is also
      representable (empty components) so twist data has the same shape in both dimensions.
    - components: np.ndarray - shape (C(n, degree), N, ..., N), one slice per increasing multi-index.
    """
    degree: int
    components: np.ndarray

    @root_validator(skip_on_failure=True)
    def consistent_shape(cls, values):
        grid, degree = values["grid"], values["degree"]
        if not 0 <= degree <= max(grid.n, 3):
            raise DegreeError(f"form degree {degree} outside 0..{max(grid.n, 3)}")
        components = _frozen_array(values["components"])
        expected = (comb(grid.n, degree),) + grid.shape
        if components.shape != expected:
            raise ValueError(f"components shape {components.shape} does not match {expected}")
        values["components"] = components
        return values

    @classmethod
    def zeros(cls, grid: TorusGrid, degree: int) -> "KForm":
        return cls(grid=grid, degree=degree,
                   components=np.zeros((comb(grid.n, degree),) + grid.shape))

    @classmethod
    def constant(cls, grid: TorusGrid, degree: int, coefficients: Sequence[float]) -> "KForm":
        coefficients = np.asarray(coefficients, dtype=float)
        components = np.broadcast_to(coefficients.reshape((-1,) + (1,) * grid.n),
                                     (comb(grid.n, degree),) + grid.shape)
        return cls(grid=grid, degree=degree, components=components)

    @classmethod
    def basis_form(cls, grid: TorusGrid, multi_index: Tuple[int, ...]) -> "KForm":
        """Constant form dx^I for an increasing multi-index I."""
        indices = grid.multi_indices(len(multi_index))
        coefficients = np.zeros(len(indices))
        coefficients[indices.index(tuple(multi_index))] = 1.0
        return cls.constant(grid, len(multi_index), coefficients)

    @property
    def multi_indices(self) -> List[Tuple[int, ...]]:
        return self.grid.multi_indices(self.degree)

    def component(self, multi_index: Tuple[int, ...]) -> np.ndarray:
        return self.components[self.multi_indices.index(tuple(multi_index))]

    def with_components(self, components: np.ndarray) -> "KForm":
        return KForm(grid=self.grid, degree=self.degree, components=components)

    def _check_compatible(self, other: "KForm"):
        self._check_grid(other)
        if self.degree != other.degree:
            raise DegreeError(f"cannot combine forms of degree {self.degree} and {other.degree}")

    def __add__(self, other: "KForm") -> "KForm":
        self._check_compatible(other)
        return self.with_components(self.components + other.components)

    def __sub__(self, other: "KForm") -> "KForm":
        self._check_compatible(other)
        return self.with_components(self.components - other.components)

    def __neg__(self) -> "KForm":
        return self.with_components(-self.components)

    def __mul__(self, factor: float) -> "KForm":
        return self.with_components(float(factor) * self.components)

    __rmul__ = __mul__

    def norm(self) -> float:
        """Discrete L² norm for the flat metric."""
        return float(np.sqrt(self.grid.cell_volume * np.sum(self.components ** 2)))

    @property
    def values(self) -> np.ndarray:
        """Node values of a degree-0 form."""
        if self.degree != 0:
            raise DegreeError(f"values requested from a degree-{self.degree} form")
        return self.components[0]


ScalarField = KForm


def scalar_field(grid: TorusGrid, values: np.ndarray) -> KForm:
    return KForm(grid=grid, degree=0, components=np.asarray(values, dtype=float)[None])


class VectorField(_GridField):
    """
    Vector field u = u^i ∂_i on the grid.
    - components: np.ndarray - shape (n, N, ..., N).
    """
    components: np.ndarray

    @root_validator(skip_on_failure=True)
    def consistent_shape(cls, values):
        grid = values["grid"]
        components = _frozen_array(values["components"])
        if components.shape != (grid.n,) + grid.shape:
            raise ValueError(f"vector components shape {components.shape} does not match grid {grid}")
        values["components"] = components
        return values

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "VectorField":
        return cls(grid=grid, components=np.zeros((grid.n,) + grid.shape))

    @classmethod
    def constant(cls, grid: TorusGrid, vector: Sequence[float]) -> "VectorField":
        vector = np.asarray(vector, dtype=float).reshape((grid.n,) + (1,) * grid.n)
        return cls(grid=grid, components=np.broadcast_to(vector, (grid.n,) + grid.shape))

    def with_components(self, components: np.ndarray) -> "VectorField":
        return VectorField(grid=self.grid, components=components)

    def __add__(self, other: "VectorField") -> "VectorField":
        self._check_grid(other)
        return self.with_components(self.components + other.components)

    def __sub__(self, other: "VectorField") -> "VectorField":
        self._check_grid(other)
        return self.with_components(self.components - other.components)

    def __neg__(self) -> "VectorField":
        return self.with_components(-self.components)

    def __mul__(self, factor: float) -> "VectorField":
        return self.with_components(float(factor) * self.components)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.sqrt(self.grid.cell_volume * np.sum(self.components ** 2)))


class SymTensor2(_GridField):
    """
    Symmetric 2-tensor g_ij dx^i dx^j.
    - matrix: np.ndarray - shape (n, n, N, ..., N), symmetrized on construction.
    Positive-definiteness is only required of metrics and is checked with is_positive_definite.
    """
    matrix: np.ndarray

    @root_validator(skip_on_failure=True)
    def consistent_shape(cls, values):
        grid = values["grid"]
        matrix = np.asarray(values["matrix"], dtype=float)
        if matrix.shape != (grid.n, grid.n) + grid.shape:
            raise ValueError(f"tensor shape {matrix.shape} does not match grid {grid}")
        values["matrix"] = _frozen_array(0.5 * (matrix + np.swapaxes(matrix, 0, 1)))
        return values

    @classmethod
    def constant(cls, grid: TorusGrid, matrix: np.ndarray) -> "SymTensor2":
        matrix = np.asarray(matrix, dtype=float).reshape((grid.n, grid.n) + (1,) * grid.n)
        return cls(grid=grid, matrix=np.broadcast_to(matrix, (grid.n, grid.n) + grid.shape))

    @classmethod
    def flat(cls, grid: TorusGrid) -> "SymTensor2":
        return cls.constant(grid, np.eye(grid.n))

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "SymTensor2":
        return cls.constant(grid, np.zeros((grid.n, grid.n)))

    @classmethod
    def from_packed(cls, grid: TorusGrid, packed: np.ndarray) -> "SymTensor2":
        matrix = np.zeros((grid.n, grid.n) + grid.shape)
        for position, (i, j) in enumerate(symmetric_index_pairs(grid.n)):
            matrix[i, j] = packed[position]
            matrix[j, i] = packed[position]
        return cls(grid=grid, matrix=matrix)

    def packed(self) -> np.ndarray:
        """Components g_ij with i <= j, shape (n(n+1)/2, N, ..., N)."""
        return np.stack([self.matrix[i, j] for i, j in symmetric_index_pairs(self.grid.n)])

    def with_matrix(self, matrix: np.ndarray) -> "SymTensor2":
        return SymTensor2(grid=self.grid, matrix=matrix)

    def __add__(self, other: "SymTensor2") -> "SymTensor2":
        self._check_grid(other)
        return self.with_matrix(self.matrix + other.matrix)

    def __sub__(self, other: "SymTensor2") -> "SymTensor2":
        self._check_grid(other)
        return self.with_matrix(self.matrix - other.matrix)

    def __neg__(self) -> "SymTensor2":
        return self.with_matrix(-self.matrix)

    def __mul__(self, factor: float) -> "SymTensor2":
        return self.with_matrix(float(factor) * self.matrix)

    __rmul__ = __mul__

    def pointwise(self) -> np.ndarray:
        """Matrix field with node axes first, shape (N, ..., N, n, n)."""
        return np.moveaxis(self.matrix, (0, 1), (-2, -1))

    def is_positive_definite(self) -> bool:
        return bool(np.all(np.linalg.eigvalsh(self.pointwise()) > 0.0))

    def is_constant(self) -> bool:
        reference = self.matrix[(Ellipsis,) + (slice(0, 1),) * self.grid.n]
        return bool(np.allclose(self.matrix, reference, rtol=0.0, atol=1e-14))

    def norm(self) -> float:
        return float(np.sqrt(self.grid.cell_volume * np.sum(self.matrix ** 2)))


def symmetric_index_pairs(n: int) -> List[Tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, n)]
