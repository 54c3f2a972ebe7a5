from typing import Any, ClassVar, Dict, List, Optional

from pydantic import BaseModel, root_validator

from src.calculus.exterior import mode_spec_of, sample
from src.errors import DegreeError, GridMismatchError
from src.models.affine import AffineDiffeo
from src.models.courant_models import SectionKind
from src.models.fields import KForm, VectorField
from src.models.grid_models import FourierModeSpec, TorusGrid


class GroupElement(BaseModel):
    """
    Element (φ, B) of Diff ⋉ Ω², or φ ⋉ (B, A) of Diff ⋉ Ω^{2+1} when A is present.
    - phi: AffineDiffeo - underlying diffeomorphism.
    - B: KForm - 2-form.
    - A: Optional[KForm] - 1-form, odd case only.
    """
    phi: AffineDiffeo
    B: KForm
    A: Optional[KForm] = None

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def shared_grid(cls, values):
        grid = values["phi"].grid
        B, A = values["B"], values.get("A")
        if B.grid != grid or (A is not None and A.grid != grid):
            raise GridMismatchError("group element components on different grids")
        if B.degree != 2 or (A is not None and A.degree != 1):
            raise DegreeError("group element needs a 2-form B and an optional 1-form A")
        return values

    @property
    def grid(self) -> TorusGrid:
        return self.phi.grid

    @property
    def kind(self) -> str:
        return SectionKind.odd if self.A is not None else SectionKind.exact

    @classmethod
    def identity(cls, grid: TorusGrid, kind: str = SectionKind.exact) -> "GroupElement":
        A = KForm.zeros(grid, 1) if kind == SectionKind.odd else None
        return cls(phi=AffineDiffeo.identity(grid), B=KForm.zeros(grid, 2), A=A)

    @classmethod
    def b_field(cls, B: KForm, A: Optional[KForm] = None) -> "GroupElement":
        return cls(phi=AffineDiffeo.identity(B.grid), B=B, A=A)

    @classmethod
    def diffeo(cls, phi: AffineDiffeo, kind: str = SectionKind.exact) -> "GroupElement":
        A = KForm.zeros(phi.grid, 1) if kind == SectionKind.odd else None
        return cls(phi=phi, B=KForm.zeros(phi.grid, 2), A=A)

    def to_json_dict(self) -> Dict[str, Any]:
        data = {"matrix": self.phi.A, "translation": self.phi.shift, "B": mode_spec_of(self.B).dict()}
        if self.A is not None:
            data["A"] = mode_spec_of(self.A).dict()
        return data

    @classmethod
    def from_json_dict(cls, grid: TorusGrid, data: Dict[str, Any]) -> "GroupElement":
        phi = AffineDiffeo(grid=grid, A=data["matrix"], shift=data["translation"])
        A = sample(FourierModeSpec(**data["A"]), grid) if "A" in data else None
        return cls(phi=phi, B=sample(FourierModeSpec(**data["B"]), grid), A=A)


class Derivation(BaseModel):
    """
    Infinitesimal symmetry (u, b) of gdiff_H, or (u, (b, a)) of gdiff_{H,F} when a is present.
    - u: VectorField - generating vector field.
    - b: KForm - 2-form.
    - a: Optional[KForm] - 1-form, odd case only.
    """
    u: VectorField
    b: KForm
    a: Optional[KForm] = None

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def shared_grid(cls, values):
        grid = values["u"].grid
        b, a = values["b"], values.get("a")
        if b.grid != grid or (a is not None and a.grid != grid):
            raise GridMismatchError("derivation components on different grids")
        if b.degree != 2 or (a is not None and a.degree != 1):
            raise DegreeError("derivation needs a 2-form b and an optional 1-form a")
        return values

    @property
    def grid(self) -> TorusGrid:
        return self.u.grid

    @property
    def kind(self) -> str:
        return SectionKind.odd if self.a is not None else SectionKind.exact

    @classmethod
    def pure_form(cls, b: KForm, a: Optional[KForm] = None) -> "Derivation":
        return cls(u=VectorField.zeros(b.grid), b=b, a=a)

    def __add__(self, other: "Derivation") -> "Derivation":
        a = None if self.a is None else self.a + other.a
        return Derivation(u=self.u + other.u, b=self.b + other.b, a=a)

    def __sub__(self, other: "Derivation") -> "Derivation":
        a = None if self.a is None else self.a - other.a
        return Derivation(u=self.u - other.u, b=self.b - other.b, a=a)

    def __mul__(self, factor: float) -> "Derivation":
        a = None if self.a is None else factor * self.a
        return Derivation(u=factor * self.u, b=factor * self.b, a=a)

    __rmul__ = __mul__

    def norm(self) -> float:
        total = self.u.norm() ** 2 + self.b.norm() ** 2
        if self.a is not None:
            total += self.a.norm() ** 2
        return float(total ** 0.5)


class ExactnessDefect(BaseModel):
    """
    Harmonic pairings I(κ(D)) of a derivation.
    - kind: str - "exact" or "odd".
    - two_form_part: List[float] - pairings with the harmonic 2-forms (b₂ entries).
    - one_form_part: List[float] - pairings with the harmonic 1-forms (b₁ entries, odd case only).
    """
    kind: str
    two_form_part: List[float]
    one_form_part: List[float] = []

    tolerance: ClassVar[float] = 1e-9

    @property
    def values(self) -> List[float]:
        return list(self.two_form_part) + list(self.one_form_part)

    def norm(self) -> float:
        return float(sum(v * v for v in self.values) ** 0.5)

    def is_exact(self, tolerance: Optional[float] = None) -> bool:
        return self.norm() <= (self.tolerance if tolerance is None else tolerance)
