from typing import ClassVar, Optional, Union

from pydantic import BaseModel, root_validator

from src.calculus.exterior import closure_norm
from src.errors import DegreeError, GridMismatchError, KindMismatchError, TwistValidationError
from src.models.fields import KForm, VectorField
from src.models.grid_models import TorusGrid


class SectionKind:
    exact = "exact"
    odd = "odd"


class ExactSection(BaseModel):
    """
    Section u + α of TM + T*M.
    - u: VectorField - anchor component.
    - alpha: KForm - 1-form component.
    """
    u: VectorField
    alpha: KForm

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    kind: ClassVar[str] = SectionKind.exact

    @root_validator(skip_on_failure=True)
    def shared_grid(cls, values):
        if values["u"].grid != values["alpha"].grid:
            raise GridMismatchError("section components on different grids")
        if values["alpha"].degree != 1:
            raise DegreeError(f"form component must be a 1-form, got degree {values['alpha'].degree}")
        return values

    @property
    def grid(self) -> TorusGrid:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "ExactSection":
        return cls(u=VectorField.zeros(grid), alpha=KForm.zeros(grid, 1))

    @classmethod
    def from_form(cls, alpha: KForm) -> "ExactSection":
        return cls(u=VectorField.zeros(alpha.grid), alpha=alpha)

    @classmethod
    def from_vector(cls, u: VectorField) -> "ExactSection":
        return cls(u=u, alpha=KForm.zeros(u.grid, 1))

    def _check(self, other):
        if getattr(other, "kind", None) != self.kind:
            raise KindMismatchError(f"cannot combine an {self.kind} section with {type(other).__name__}")

    def __add__(self, other: "ExactSection") -> "ExactSection":
        self._check(other)
        return ExactSection(u=self.u + other.u, alpha=self.alpha + other.alpha)

    def __sub__(self, other: "ExactSection") -> "ExactSection":
        self._check(other)
        return ExactSection(u=self.u - other.u, alpha=self.alpha - other.alpha)

    def __neg__(self) -> "ExactSection":
        return ExactSection(u=-self.u, alpha=-self.alpha)

    def __mul__(self, factor: float) -> "ExactSection":
        return ExactSection(u=factor * self.u, alpha=factor * self.alpha)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float((self.u.norm() ** 2 + self.alpha.norm() ** 2) ** 0.5)


class OddSection(BaseModel):
    """
    Section u + f + α of TM + 1 + T*M.
    - u: VectorField - anchor component.
    - f: KForm - scalar (degree-0) component.
    - alpha: KForm - 1-form component.
    """
    u: VectorField
    f: KForm
    alpha: KForm

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    kind: ClassVar[str] = SectionKind.odd

    @root_validator(skip_on_failure=True)
    def shared_grid(cls, values):
        grid = values["u"].grid
        if values["f"].grid != grid or values["alpha"].grid != grid:
            raise GridMismatchError("section components on different grids")
        if values["f"].degree != 0 or values["alpha"].degree != 1:
            raise DegreeError("odd section needs a scalar and a 1-form component")
        return values

    @property
    def grid(self) -> TorusGrid:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "OddSection":
        return cls(u=VectorField.zeros(grid), f=KForm.zeros(grid, 0), alpha=KForm.zeros(grid, 1))

    @classmethod
    def from_form(cls, alpha: KForm) -> "OddSection":
        return cls(u=VectorField.zeros(alpha.grid), f=KForm.zeros(alpha.grid, 0), alpha=alpha)

    @classmethod
    def from_vector(cls, u: VectorField) -> "OddSection":
        return cls(u=u, f=KForm.zeros(u.grid, 0), alpha=KForm.zeros(u.grid, 1))

    def _check(self, other):
        if getattr(other, "kind", None) != self.kind:
            raise KindMismatchError(f"cannot combine an {self.kind} section with {type(other).__name__}")

    def __add__(self, other: "OddSection") -> "OddSection":
        self._check(other)
        return OddSection(u=self.u + other.u, f=self.f + other.f, alpha=self.alpha + other.alpha)

    def __sub__(self, other: "OddSection") -> "OddSection":
        self._check(other)
        return OddSection(u=self.u - other.u, f=self.f - other.f, alpha=self.alpha - other.alpha)

    def __neg__(self) -> "OddSection":
        return OddSection(u=-self.u, f=-self.f, alpha=-self.alpha)

    def __mul__(self, factor: float) -> "OddSection":
        return OddSection(u=factor * self.u, f=factor * self.f, alpha=factor * self.alpha)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float((self.u.norm() ** 2 + self.f.norm() ** 2 + self.alpha.norm() ** 2) ** 0.5)


Section = Union[ExactSection, OddSection]


class TwistData(BaseModel):
    """
    Twisting forms of a Courant algebroid.
    - kind: str - "exact" for (TM+T*M)_H, "odd" for (TM+1+T*M)_{H,F}.
    - H: KForm - 3-form (the zero 3-form on T²).
    - F: Optional[KForm] - 2-form, present iff kind is "odd".
    Construction checks dH = 0 in the exact case and dF = 0, dH + F∧F = 0 in the odd case.
    On T² and T³ every 3-form is closed and F∧F vanishes, so only dF = 0 can fail.
    """
    grid: TorusGrid
    kind: str = SectionKind.exact
    H: KForm
    F: Optional[KForm] = None

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    closure_tolerance: ClassVar[float] = 1e-10

    @root_validator(skip_on_failure=True)
    def closed_twist(cls, values):
        grid, kind, H, F = values["grid"], values["kind"], values["H"], values.get("F")
        if kind not in (SectionKind.exact, SectionKind.odd):
            raise ValueError(f"unknown twist kind {kind!r}")
        if H.grid != grid or H.degree != 3:
            raise TwistValidationError("H must be a 3-form on the twist grid")
        scale = max(1.0, H.norm())
        if closure_norm(H) > cls.closure_tolerance * scale:
            raise TwistValidationError(f"violated invariant dH = 0 (‖dH‖={closure_norm(H):.3e})")
        if kind == SectionKind.exact:
            if F is not None:
                raise KindMismatchError("exact twist data carries no F")
            return values
        if F is None or F.grid != grid or F.degree != 2:
            raise TwistValidationError("odd twist data needs a 2-form F on the twist grid")
        residual = closure_norm(F)
        if residual > cls.closure_tolerance * max(1.0, F.norm()):
            raise TwistValidationError(f"violated invariant dF = 0 (‖dF‖={residual:.3e})")
        return values

    @classmethod
    def exact(cls, grid: TorusGrid, H: Optional[KForm] = None) -> "TwistData":
        return cls(grid=grid, kind=SectionKind.exact, H=H if H is not None else KForm.zeros(grid, 3))

    @classmethod
    def odd(cls, grid: TorusGrid, H: Optional[KForm] = None, F: Optional[KForm] = None) -> "TwistData":
        return cls(grid=grid, kind=SectionKind.odd,
                   H=H if H is not None else KForm.zeros(grid, 3),
                   F=F if F is not None else KForm.zeros(grid, 2))

    @classmethod
    def unchecked(cls, grid: TorusGrid, kind: str, H: KForm, F: Optional[KForm] = None) -> "TwistData":
        """Bypasses closure validation. Only for negative controls."""
        return cls.construct(grid=grid, kind=kind, H=H, F=F)

    @property
    def is_odd(self) -> bool:
        return self.kind == SectionKind.odd
