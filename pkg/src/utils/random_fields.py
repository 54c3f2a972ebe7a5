from typing import Optional

import numpy as np

from src.calculus.exterior import sample
from src.models.courant_models import ExactSection, OddSection
from src.models.fields import KForm, SymTensor2, VectorField
from src.models.grid_models import FourierMode, FourierModeSpec, TorusGrid


class RandomFieldFactory:
    """
    Seeded band-limited random fields. Every draw is a finite sum of Fourier modes with
    wavevector entries bounded by max_wavevector, so products of two draws stay inside the
    band whenever 2·max_wavevector <= N/2 - 1.
    """

    def __init__(self,
                 grid: TorusGrid,
                 seed: int = 0,
                 max_wavevector: int = 1,
                 rng: Optional[np.random.Generator] = None):
        if max_wavevector > grid.bandwidth:
            raise ValueError(f"max_wavevector {max_wavevector} exceeds the grid bandwidth {grid.bandwidth}")
        self.grid = grid
        self.max_wavevector = max_wavevector
        self.rng = rng if rng is not None else np.random.Generator(np.random.Philox(seed))

    def mode_spec(self, degree: int, modes_per_component: int = 3, amplitude: float = 1.0) -> FourierModeSpec:
        modes = []
        for component in self.grid.multi_indices(degree):
            for _ in range(modes_per_component):
                wavevector = self.rng.integers(-self.max_wavevector, self.max_wavevector + 1, size=self.grid.n)
                modes.append(FourierMode(component=list(component),
                                         wavevector=wavevector.tolist(),
                                         amplitude=float(amplitude * self.rng.uniform(-1.0, 1.0)),
                                         phase=float(self.rng.uniform(0.0, 2.0 * np.pi))))
        return FourierModeSpec(degree=degree, modes=modes)

    def form(self, degree: int, amplitude: float = 1.0) -> KForm:
        if degree > self.grid.n:
            return KForm.zeros(self.grid, degree)
        return sample(self.mode_spec(degree, amplitude=amplitude), self.grid)

    def scalar(self, amplitude: float = 1.0) -> KForm:
        return self.form(0, amplitude)

    def vector(self, amplitude: float = 1.0) -> VectorField:
        components = np.stack([self.form(0, amplitude).values for _ in range(self.grid.n)])
        return VectorField(grid=self.grid, components=components)

    def sym(self, amplitude: float = 1.0) -> SymTensor2:
        packed = np.stack([self.form(0, amplitude).values for _ in range(self.grid.n * (self.grid.n + 1) // 2)])
        return SymTensor2.from_packed(self.grid, packed)

    def metric(self, perturbation: float = 0.2) -> SymTensor2:
        """Flat metric plus a small random symmetric perturbation, positive definite."""
        return SymTensor2.flat(self.grid) + self.sym(perturbation / self.grid.n)

    def exact_section(self, amplitude: float = 1.0) -> ExactSection:
        return ExactSection(u=self.vector(amplitude), alpha=self.form(1, amplitude))

    def odd_section(self, amplitude: float = 1.0) -> OddSection:
        return OddSection(u=self.vector(amplitude), f=self.scalar(amplitude), alpha=self.form(1, amplitude))
