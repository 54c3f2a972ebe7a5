from typing import List, Literal, Optional

from pydantic import BaseModel, PositiveFloat, conint, root_validator, validator

from src.calculus.exterior import sample
from src.models.courant_models import SectionKind, TwistData
from src.models.fields import KForm
from src.models.grid_models import FourierModeSpec, TorusGrid, make_grid

SUITES = ("courant-axioms", "hodge", "derivations", "group", "slice", "strata")


class _Strict(BaseModel):
    class Config:
        extra = "forbid"


def sample_or_zero(spec: Optional[FourierModeSpec], grid: TorusGrid, degree: int) -> KForm:
    if spec is None or not spec.modes or degree > grid.n:
        return KForm.zeros(grid, degree)
    return sample(spec, grid)


def _check_spec(spec: Optional[FourierModeSpec], degree: int, name: str, n: int, bandwidth: int):
    if spec is None:
        return
    if spec.degree != degree:
        raise ValueError(f"{name} must have degree {degree}, got {spec.degree}")
    if spec.modes and degree > n:
        raise ValueError(f"{name} has modes but a {degree}-form vanishes on T^{n}")
    for mode in spec.modes:
        if len(mode.wavevector) != n or any(abs(k) > bandwidth for k in mode.wavevector):
            raise ValueError(f"{name} wavevector {mode.wavevector} outside the band |k| <= {bandwidth} of T^{n}")
        if len(mode.component) != degree or any(index >= n for index in mode.component):
            raise ValueError(f"{name} component {mode.component} is not a {degree}-index on T^{n}")


class TolerancesConfig(_Strict):
    """
    Acceptance thresholds.
    - identity: float - algebraic identities (group laws, derivations, complex residuals).
    - matrix: float - dense matrix regime (projectors, decompositions).
    - rank_factor: float - numerical rank threshold relative to the largest singular value.
    - axiom: float - Courant axiom residuals.
    - hodge: float - Hodge reassembly and Green identities.
    - orthogonality: float - pairwise orthogonality of Hodge components.
    - negative_control: float - residual a broken twist must exceed.
    """
    identity: PositiveFloat = 1e-8
    matrix: PositiveFloat = 1e-7
    rank_factor: PositiveFloat = 1e-8
    axiom: PositiveFloat = 1e-7
    hodge: PositiveFloat = 1e-9
    orthogonality: PositiveFloat = 1e-10
    negative_control: PositiveFloat = 1e-3

    def scaled(self, factor: float) -> "TolerancesConfig":
        """All acceptance thresholds times factor; rank threshold and negative control unchanged."""
        if factor <= 0:
            raise ValueError(f"tolerance scale must be positive, got {factor}")
        return self.copy(update={name: getattr(self, name) * factor
                                 for name in ("identity", "matrix", "axiom", "hodge", "orthogonality")})


class TwistConfig(_Strict):
    """
    - kind: str - "exact" or "odd".
    - H: FourierModeSpec - 3-form, zero when absent.
    - F: FourierModeSpec - 2-form of the odd twist, zero when absent.
    """
    kind: Literal["exact", "odd"] = SectionKind.exact
    H: Optional[FourierModeSpec] = None
    F: Optional[FourierModeSpec] = None

    @root_validator(skip_on_failure=True)
    def kind_matches_forms(cls, values):
        if values["kind"] == SectionKind.exact and values.get("F") is not None:
            raise ValueError("an exact twist carries no F")
        return values

    def build(self, grid: TorusGrid) -> TwistData:
        H = sample_or_zero(self.H, grid, 3)
        if self.kind == SectionKind.exact:
            return TwistData.exact(grid, H=H)
        return TwistData.odd(grid, H=H, F=sample_or_zero(self.F, grid, 2))


class MetricConfig(_Strict):
    """
    Metrics of the Hodge suite: the flat metric plus `samples` seeded perturbations.
    """
    perturbation: PositiveFloat = 0.2
    samples: conint(ge=0) = 1

    @validator("perturbation")
    def keeps_positivity(cls, v):
        if v >= 0.5:
            raise ValueError(f"perturbation {v} can break positivity, keep it below 0.5")
        return v


class GenMetricConfig(_Strict):
    """
    Base point of the group, slice and strata suites: g is flat plus a seeded perturbation of
    the given size, ω and γ are the configured mode specs.
    """
    perturbation: float = 0.0
    omega: Optional[FourierModeSpec] = None
    gamma: Optional[FourierModeSpec] = None

    @validator("perturbation")
    def keeps_positivity(cls, v):
        if not 0.0 <= v < 0.5:
            raise ValueError(f"perturbation {v} outside [0, 0.5)")
        return v


class DerivationConfig(_Strict):
    """
    Configured derivation ι_e(s) + (harmonic complement) with s a seeded random section.
    - two_form_coefficients: List[float] - coordinates of h₂ in the flat harmonic 2-form basis.
    - one_form_coefficients: List[float] - coordinates of h₁ (odd case).
    """
    section_amplitude: PositiveFloat = 0.5
    two_form_coefficients: List[float] = []
    one_form_coefficients: List[float] = []
    samples: conint(ge=1) = 5


class SamplingConfig(_Strict):
    """Sample counts of the randomized suites."""
    courant_triples: conint(ge=1) = 5
    random_twists: conint(ge=0) = 1
    hodge_forms: conint(ge=1) = 2
    group_pairs: conint(ge=1) = 5
    slice_probes: conint(ge=1) = 3


class StrataConfig(_Strict):
    """
    - translation_step: int - grid steps between candidate translations.
    - samples: int - random generalized metrics added to the bundled family.
    - conjugators: int - random (ψ, C) pairs for the conjugation identity.
    """
    translation_step: conint(ge=1) = 4
    samples: conint(ge=0) = 2
    conjugators: conint(ge=1) = 3
    max_pool: conint(ge=1) = 20000


class OutputConfig(_Strict):
    directory: str = "reports"
    format: Literal["json", "csv"] = "json"


class RunConfig(_Strict):
    """
    One batch run of the verification suites.
    - n, N: grid of the pointwise suites; N_mat: resolution of the dense matrix regime.
    - twist: exact twist; odd_twist: enables the odd twin of every suite.
    Twists are validated on both grids, so a non-closed F is rejected here.
    """
    schema_version: Literal[1] = 1
    n: conint(ge=2, le=3) = 3
    N: conint(ge=8) = 12
    N_mat: conint(ge=8, le=8) = 8
    seed: conint(ge=0) = 0
    suites: List[str] = list(SUITES)
    twist: TwistConfig = TwistConfig()
    odd_twist: Optional[TwistConfig] = None
    metric: MetricConfig = MetricConfig()
    genmetric: GenMetricConfig = GenMetricConfig()
    derivation: DerivationConfig = DerivationConfig()
    sampling: SamplingConfig = SamplingConfig()
    strata: StrataConfig = StrataConfig()
    tolerances: TolerancesConfig = TolerancesConfig()
    output: OutputConfig = OutputConfig()

    @validator("suites", each_item=True)
    def known_suite(cls, v):
        if v not in SUITES:
            raise ValueError(f"unknown suite {v!r}, expected one of {list(SUITES)}")
        return v

    @root_validator(skip_on_failure=True)
    def twists_are_valid(cls, values):
        n, N, N_mat = values["n"], values["N"], values["N_mat"]
        twist, odd_twist = values["twist"], values.get("odd_twist")
        if twist.kind != SectionKind.exact:
            raise ValueError("twist must be exact, configure the odd twist under odd_twist")
        if odd_twist is not None and odd_twist.kind != SectionKind.odd:
            raise ValueError("odd_twist must have kind 'odd'")
        bandwidth = N_mat // 2 - 1
        for name, config in (("twist", twist), ("odd_twist", odd_twist)):
            if config is None:
                continue
            _check_spec(config.H, 3, f"{name}.H", n, bandwidth)
            _check_spec(config.F, 2, f"{name}.F", n, bandwidth)
            # TwistValidationError is a ValueError and names the violated closure condition
            config.build(make_grid(n, N))
            config.build(make_grid(n, N_mat))
        genmetric = values["genmetric"]
        _check_spec(genmetric.omega, 2, "genmetric.omega", n, bandwidth)
        _check_spec(genmetric.gamma, 1, "genmetric.gamma", n, bandwidth)
        return values

    @property
    def grid(self) -> TorusGrid:
        return make_grid(self.n, self.N)

    @property
    def matrix_grid(self) -> TorusGrid:
        return make_grid(self.n, self.N_mat)
