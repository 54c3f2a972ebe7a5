from math import comb
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, root_validator

from src.models.grid_models import TorusGrid


class BlockKind:
    vector = "vector"
    form = "form"
    sym = "sym"
    parameters = "parameters"


class FieldBlock(BaseModel):
    """
    One summand of a field space.
    - kind: str - vector, form, sym or parameters.
    - degree: int - form degree, forms only.
    - size: int - number of real parameters, parameter blocks only.
    """
    kind: str
    degree: int = 0
    size: int = 0

    class Config:
        allow_mutation = False

    def components(self, grid: TorusGrid) -> int:
        if self.kind == BlockKind.vector:
            return grid.n
        if self.kind == BlockKind.form:
            return comb(grid.n, self.degree) if self.degree <= grid.n else 0
        if self.kind == BlockKind.sym:
            return grid.n * (grid.n + 1) // 2
        return self.size

    def dimension(self, grid: TorusGrid) -> int:
        if self.kind == BlockKind.parameters:
            return self.size
        return self.components(grid) * (grid.N - 1) ** grid.n


class FieldSpaceDescriptor(BaseModel):
    """
    Finite-dimensional field space in band coordinates.
    - name: str - e.g. "sections", "metric_tangents", "functions".
    - grid: TorusGrid - sampling grid.
    - blocks: List[FieldBlock] - summands in coordinate order.
    - gram: np.ndarray - symmetric positive definite Gram matrix of the nodal L² pairing.
    """
    name: str
    grid: TorusGrid
    blocks: List[FieldBlock]
    gram: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def gram_matches(cls, values):
        gram = np.asarray(values["gram"], dtype=float)
        dimension = sum(block.dimension(values["grid"]) for block in values["blocks"])
        if gram.shape != (dimension, dimension):
            raise ValueError(f"gram shape {gram.shape} does not match dimension {dimension}")
        if not np.allclose(gram, gram.T, rtol=0.0, atol=1e-12 * max(1.0, np.max(np.abs(gram), initial=0.0))):
            raise ValueError(f"gram of {values['name']} is not symmetric")
        values["gram"] = 0.5 * (gram + gram.T)
        return values

    @property
    def dimension(self) -> int:
        return self.gram.shape[0]

    def offsets(self) -> List[int]:
        offsets = [0]
        for block in self.blocks:
            offsets.append(offsets[-1] + block.dimension(self.grid))
        return offsets

    def compatible(self, other: "FieldSpaceDescriptor") -> bool:
        return self.grid == other.grid and self.blocks == other.blocks and self.dimension == other.dimension


class OperatorMatrix(BaseModel):
    """
    Dense matrix of a linear operator between two field spaces.
    - name: str - operator label.
    - domain: FieldSpaceDescriptor
    - codomain: FieldSpaceDescriptor
    - matrix: np.ndarray - shape (codomain.dimension, domain.dimension).
    """
    name: str
    domain: FieldSpaceDescriptor
    codomain: FieldSpaceDescriptor
    matrix: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def consistent_dimensions(cls, values):
        matrix = np.asarray(values["matrix"], dtype=float)
        expected = (values["codomain"].dimension, values["domain"].dimension)
        if matrix.shape != expected:
            raise ValueError(f"{values['name']}: matrix shape {matrix.shape} does not match {expected}")
        values["matrix"] = matrix
        return values

    def __matmul__(self, vector: np.ndarray) -> np.ndarray:
        return self.matrix @ vector


class ComplexGreen(BaseModel):
    """
    Green operator of an elliptic complex in the matrix regime.
    - green: OperatorMatrix - pseudo-inverse of A*A + BB* on the middle space.
    - kernel_projector: OperatorMatrix - Gram-orthogonal projector onto ker(A*A + BB*).
    - rank: int - numerical rank of the Laplacian.
    - smallest_nonzero: float - smallest singular value kept.
    """
    green: OperatorMatrix
    kernel_projector: OperatorMatrix
    rank: int
    smallest_nonzero: float


class GroupDecomposition(BaseModel):
    """
    Splitting of the codomain for the full symmetry group: Im A ⊕ F ⊕ ν′.
    - f_basis: np.ndarray - columns spanning F.
    - p0: OperatorMatrix - Gram-orthogonal projector onto F.
    - nu_prime: np.ndarray - columns spanning ker A* ⊖ F.
    - residuals: Dict[str, float] - reassembly and rank checks.
    """
    f_basis: np.ndarray
    p0: OperatorMatrix
    nu_prime: np.ndarray
    residuals: Dict[str, float] = {}

    class Config:
        arbitrary_types_allowed = True

    @property
    def f_dimension(self) -> int:
        return self.f_basis.shape[1]


class DecompositionReport(BaseModel):
    operator: str
    dims: Dict[str, int]
    rank: int
    kernel_dim: int
    residuals: Dict[str, float]
    passed: bool = Field(..., alias="pass")
    note: Optional[str] = None

    class Config:
        allow_population_by_field_name = True
