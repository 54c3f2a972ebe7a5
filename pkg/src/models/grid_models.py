from itertools import combinations
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, validator


class TorusGrid(BaseModel):
    """
    Uniform sampling of the flat torus T^n = R^n / (2πZ)^n.
    - n: int - dimension of the torus, 2 or 3.
    - N: int - number of samples per axis, even and at least 8.
    """
    n: int
    N: int

    class Config:
        frozen = True

    @validator("n")
    def supported_dimension(cls, v):
        if v not in (2, 3):
            raise ValueError(f"unsupported torus dimension n={v}, expected 2 or 3")
        return v

    @validator("N")
    def supported_resolution(cls, v):
        if v % 2 != 0:
            raise ValueError(f"resolution N={v} must be even")
        if v < 8:
            raise ValueError(f"resolution N={v} must be at least 8")
        return v

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def node_count(self) -> int:
        return self.N ** self.n

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.N

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.n

    @property
    def bandwidth(self) -> int:
        """Largest admissible wavevector magnitude per axis."""
        return self.N // 2 - 1

    def coordinates(self) -> List[np.ndarray]:
        axis = self.spacing * np.arange(self.N)
        return list(np.meshgrid(*([axis] * self.n), indexing="ij"))

    def multi_indices(self, degree: int) -> List[Tuple[int, ...]]:
        return list(combinations(range(self.n), degree))


class FourierMode(BaseModel):
    """
    One real trigonometric term amplitude * cos(wavevector · x + phase).
    - component: List[int] - increasing multi-index of the form component (0-based).
    - wavevector: List[int] - integer wavevector.
    """
    component: List[int]
    wavevector: List[int]
    amplitude: float = 1.0
    phase: float = 0.0

    @validator("component")
    def increasing_component(cls, v):
        if any(a >= b for a, b in zip(v, v[1:])):
            raise ValueError(f"component multi-index {v} is not strictly increasing")
        return v


class FourierModeSpec(BaseModel):
    """
    Band-limited description of a k-form, used to build test inputs and configured twists.
    - degree: int - form degree.
    - modes: List[FourierMode] - terms summed per component.
    """
    degree: int
    modes: List[FourierMode] = []

    def scaled(self, factor: float) -> "FourierModeSpec":
        modes = [mode.copy(update={"amplitude": factor * mode.amplitude}) for mode in self.modes]
        return FourierModeSpec(degree=self.degree, modes=modes)


def make_grid(n: int, N: int) -> TorusGrid:
    return TorusGrid(n=n, N=N)
