from typing import Any, Dict, Optional

import numpy as np
from pydantic import BaseModel, root_validator

from src.calculus.exterior import mode_spec_of, sample
from src.errors import DegreeError, GridMismatchError, KindMismatchError
from src.models.courant_models import SectionKind
from src.models.fields import KForm, SymTensor2, symmetric_index_pairs
from src.models.grid_models import FourierModeSpec, TorusGrid


def two_form_matrix(omega: KForm) -> np.ndarray:
    """Antisymmetric matrix field ω_ij, shape (n, n, N, ..., N)."""
    if omega.degree != 2:
        raise DegreeError(f"expected a 2-form, got degree {omega.degree}")
    n = omega.grid.n
    matrix = np.zeros((n, n) + omega.grid.shape)
    for position, (i, j) in enumerate(omega.multi_indices):
        matrix[i, j] = omega.components[position]
        matrix[j, i] = -omega.components[position]
    return matrix


def two_form_from_matrix(grid: TorusGrid, matrix: np.ndarray) -> KForm:
    """Inverse of two_form_matrix on the antisymmetric part of matrix."""
    components = [0.5 * (matrix[i, j] - matrix[j, i]) for i, j in grid.multi_indices(2)]
    return KForm(grid=grid, degree=2, components=np.stack(components))


class GenMetric(BaseModel):
    """
    Generalized metric in graph form: V₊ = e^ω{u + i_u g}, or the odd graph
    T_{(ω,γ)}{u + f + i_u g} when gamma is present.
    - g: SymTensor2 - positive definite metric.
    - omega: KForm - 2-form.
    - gamma: Optional[KForm] - 1-form, odd case only.
    """
    g: SymTensor2
    omega: KForm
    gamma: Optional[KForm] = None

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def positive_graph(cls, values):
        g, omega, gamma = values["g"], values["omega"], values.get("gamma")
        if omega.grid != g.grid or (gamma is not None and gamma.grid != g.grid):
            raise GridMismatchError("generalized metric components on different grids")
        if omega.degree != 2 or (gamma is not None and gamma.degree != 1):
            raise DegreeError("generalized metric needs a 2-form omega and an optional 1-form gamma")
        if not g.is_positive_definite():
            raise ValueError("metric component is not positive definite at every node")
        return values

    @property
    def grid(self) -> TorusGrid:
        return self.g.grid

    @property
    def kind(self) -> str:
        return SectionKind.odd if self.gamma is not None else SectionKind.exact

    @classmethod
    def flat(cls, grid: TorusGrid, kind: str = SectionKind.exact) -> "GenMetric":
        gamma = KForm.zeros(grid, 1) if kind == SectionKind.odd else None
        return cls(g=SymTensor2.flat(grid), omega=KForm.zeros(grid, 2), gamma=gamma)

    def difference(self, other: "GenMetric") -> "GMTangent":
        if self.kind != other.kind:
            raise KindMismatchError(f"{self.kind} and {other.kind} generalized metrics")
        gamma = None if self.gamma is None else self.gamma - other.gamma
        return GMTangent(g_dot=self.g - other.g, omega_dot=self.omega - other.omega, gamma_dot=gamma)

    def to_json_dict(self) -> Dict[str, Any]:
        packed = self.g.packed()
        g = {f"{i}{j}": mode_spec_of(KForm(grid=self.grid, degree=0, components=packed[position][None])).dict()
             for position, (i, j) in enumerate(symmetric_index_pairs(self.grid.n))}
        data = {"g": g, "omega": mode_spec_of(self.omega).dict()}
        if self.gamma is not None:
            data["gamma"] = mode_spec_of(self.gamma).dict()
        return data

    @classmethod
    def from_json_dict(cls, grid: TorusGrid, data: Dict[str, Any]) -> "GenMetric":
        packed = np.stack([sample(FourierModeSpec(**data["g"][f"{i}{j}"]), grid).values
                           for i, j in symmetric_index_pairs(grid.n)])
        gamma = sample(FourierModeSpec(**data["gamma"]), grid) if "gamma" in data else None
        return cls(g=SymTensor2.from_packed(grid, packed),
                   omega=sample(FourierModeSpec(**data["omega"]), grid),
                   gamma=gamma)


class GMTangent(BaseModel):
    """
    Tangent vector (ġ, ω̇[, γ̇]) to the space of generalized metrics.
    """
    g_dot: SymTensor2
    omega_dot: KForm
    gamma_dot: Optional[KForm] = None

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def shared_grid(cls, values):
        grid = values["g_dot"].grid
        gamma = values.get("gamma_dot")
        if values["omega_dot"].grid != grid or (gamma is not None and gamma.grid != grid):
            raise GridMismatchError("tangent components on different grids")
        if values["omega_dot"].degree != 2 or (gamma is not None and gamma.degree != 1):
            raise DegreeError("tangent needs a 2-form and an optional 1-form")
        return values

    @property
    def grid(self) -> TorusGrid:
        return self.g_dot.grid

    @property
    def kind(self) -> str:
        return SectionKind.odd if self.gamma_dot is not None else SectionKind.exact

    @classmethod
    def zeros(cls, grid: TorusGrid, kind: str = SectionKind.exact) -> "GMTangent":
        gamma = KForm.zeros(grid, 1) if kind == SectionKind.odd else None
        return cls(g_dot=SymTensor2.zeros(grid), omega_dot=KForm.zeros(grid, 2), gamma_dot=gamma)

    def norm(self) -> float:
        """Flat L² size of all components."""
        total = self.g_dot.norm() ** 2 + self.omega_dot.norm() ** 2
        if self.gamma_dot is not None:
            total += self.gamma_dot.norm() ** 2
        return float(np.sqrt(total))


class SubbundleFrame(BaseModel):
    """
    Pointwise frame of a rank-n (exact) or rank-(n+1) (odd) subbundle.
    - grid: TorusGrid - nodes the frame is sampled on.
    - kind: str - "exact" (fibre TM ⊕ T*M) or "odd" (fibre TM ⊕ R ⊕ T*M).
    - vectors: np.ndarray - shape (N, ..., N, fibre dimension, rank), coordinates ordered (u, f, α).
    """
    grid: TorusGrid
    kind: str
    vectors: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def consistent_shape(cls, values):
        grid, kind = values["grid"], values["kind"]
        n = grid.n
        dimension, rank = (2 * n + 1, n + 1) if kind == SectionKind.odd else (2 * n, n)
        vectors = np.array(values["vectors"], dtype=float)
        if vectors.shape != grid.shape + (dimension, rank):
            raise ValueError(f"frame shape {vectors.shape} does not match {grid.shape + (dimension, rank)}")
        vectors.flags.writeable = False
        values["vectors"] = vectors
        return values

    @property
    def fibre_dimension(self) -> int:
        return self.vectors.shape[-2]

    @property
    def rank(self) -> int:
        return self.vectors.shape[-1]

    def pairing_matrix(self) -> np.ndarray:
        """Pairing ½(i_uβ + i_vα) (+ fg) on the fibre."""
        n = self.grid.n
        eta = np.zeros((self.fibre_dimension, self.fibre_dimension))
        offset = n + 1 if self.kind == SectionKind.odd else n
        eta[:n, offset:] = 0.5 * np.eye(n)
        eta[offset:, :n] = 0.5 * np.eye(n)
        if self.kind == SectionKind.odd:
            eta[n, n] = 1.0
        return eta

    def gram(self) -> np.ndarray:
        """Pointwise Gram matrices of the frame under the pairing, shape (N, ..., N, rank, rank)."""
        return np.einsum("...ia,ij,...jb->...ab", self.vectors, self.pairing_matrix(), self.vectors)

    def transformed(self, matrices: np.ndarray) -> "SubbundleFrame":
        """Right multiplication by pointwise rank×rank matrices (same span)."""
        return SubbundleFrame(grid=self.grid, kind=self.kind, vectors=self.vectors @ matrices)


class IsometryDefect(BaseModel):
    """
    Residuals deciding whether a group element fixes a generalized metric.
    - membership: float - largest membership residual for the twist.
    - metric: float - ‖φ*g - g‖.
    - action: float - ‖act(gel, V) - V‖ over all components.
    """
    membership: float
    metric: float
    action: float

    @property
    def largest(self) -> float:
        return max(self.membership, self.metric, self.action)

    def is_isometry(self, tolerance: float = 1e-9) -> bool:
        return self.largest <= tolerance
