from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, root_validator

from src.models.grid_models import TorusGrid


class AffineDiffeo(BaseModel):
    """
    Lattice-preserving affine diffeomorphism x -> A x + 2π m / N of the torus.
    - grid: TorusGrid - the grid whose node set the map permutes.
    - A: List[List[int]] - integer matrix with |det A| = 1.
    - shift: List[int] - translation in grid steps, reduced modulo N.
    """
    grid: TorusGrid
    A: List[List[int]]
    shift: List[int]

    class Config:
        frozen = True

    @root_validator(skip_on_failure=True)
    def lattice_automorphism(cls, values):
        grid, matrix = values["grid"], np.array(values["A"], dtype=int)
        if matrix.shape != (grid.n, grid.n):
            raise ValueError(f"matrix shape {matrix.shape} does not match dimension {grid.n}")
        determinant = int(round(np.linalg.det(matrix)))
        if abs(determinant) != 1:
            raise ValueError(f"|det A| must be 1, got det A = {determinant}")
        if len(values["shift"]) != grid.n:
            raise ValueError(f"shift {values['shift']} does not match dimension {grid.n}")
        values["shift"] = [int(s) % grid.N for s in values["shift"]]
        return values

    @classmethod
    def from_arrays(cls, grid: TorusGrid, A: np.ndarray, shift=None) -> "AffineDiffeo":
        shift = np.zeros(grid.n, dtype=int) if shift is None else np.asarray(shift, dtype=int)
        return cls(grid=grid, A=np.asarray(A, dtype=int).tolist(), shift=shift.tolist())

    @classmethod
    def identity(cls, grid: TorusGrid) -> "AffineDiffeo":
        return cls.from_arrays(grid, np.eye(grid.n, dtype=int))

    @classmethod
    def translation(cls, grid: TorusGrid, shift) -> "AffineDiffeo":
        return cls.from_arrays(grid, np.eye(grid.n, dtype=int), shift)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.A, dtype=int)

    @property
    def steps(self) -> np.ndarray:
        return np.array(self.shift, dtype=int)

    @property
    def translation_vector(self) -> np.ndarray:
        return self.grid.spacing * self.steps

    @property
    def determinant(self) -> int:
        return int(round(np.linalg.det(self.matrix)))

    @property
    def key(self) -> Tuple[int, ...]:
        return tuple(self.matrix.ravel()) + tuple(self.shift)

    def is_identity(self) -> bool:
        return np.array_equal(self.matrix, np.eye(self.grid.n, dtype=int)) and not any(self.shift)

    def compose(self, other: "AffineDiffeo") -> "AffineDiffeo":
        """self ∘ other."""
        return AffineDiffeo.from_arrays(self.grid,
                                        self.matrix @ other.matrix,
                                        self.matrix @ other.steps + self.steps)

    def inverse(self) -> "AffineDiffeo":
        inverse_matrix = np.rint(np.linalg.inv(self.matrix)).astype(int)
        return AffineDiffeo.from_arrays(self.grid, inverse_matrix, -(inverse_matrix @ self.steps))

    def node_map(self) -> Tuple[np.ndarray, ...]:
        """Index arrays of φ(x_j) = x_{(A j + m) mod N} for every node j."""
        indices = np.indices(self.grid.shape).reshape(self.grid.n, -1)
        image = (self.matrix @ indices + self.steps[:, None]) % self.grid.N
        return tuple(axis.reshape(self.grid.shape) for axis in image)
