from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


def relative_residual(difference: float, *scales: float) -> float:
    """Residual relative to the largest operand norm, floored at one."""
    return float(difference) / max([1.0] + [float(s) for s in scales])


class CheckResult(BaseModel):
    """
    One numerical identity evaluated by a suite.
    - check_id: str - stable identifier, e.g. "courant.exact.C1".
    - anchor: str - the identity or statement being certified.
    - residual: float - measured relative residual.
    - tolerance: float - acceptance threshold.
    - passed: bool - residual within tolerance (informational checks always pass), "pass" in files.
    - informational: bool - diagnostic only, never fails a run.
    """
    check_id: str
    anchor: str
    residual: float
    tolerance: float
    passed: bool = Field(..., alias="pass")
    informational: bool = False

    class Config:
        allow_population_by_field_name = True

    @classmethod
    def evaluate(cls, check_id: str, anchor: str, residual: float, tolerance: float,
                 informational: bool = False, expect_above: bool = False) -> "CheckResult":
        within = residual > tolerance if expect_above else residual <= tolerance
        return cls(check_id=check_id, anchor=anchor, residual=float(residual), tolerance=float(tolerance),
                   passed=bool(within or informational), informational=informational)


class AxiomEntry(BaseModel):
    axiom: str
    residual: float
    tolerance: float
    passed: bool = Field(..., alias="pass")
    informational: bool = False

    class Config:
        allow_population_by_field_name = True


class AxiomReport(BaseModel):
    """
    Courant axiom residuals on one triple of sections.
    - kind: str - "exact" or "odd".
    - entries: List[AxiomEntry] - C1..C5 plus the two readings of the polarized C3.
    """
    kind: str
    entries: List[AxiomEntry]

    def entry(self, axiom: str) -> AxiomEntry:
        return next(entry for entry in self.entries if entry.axiom == axiom)

    @property
    def all_passed(self) -> bool:
        return all(entry.passed for entry in self.entries if not entry.informational)


class SuiteReport(BaseModel):
    """
    Result of one verification suite.
    - suite: str - suite name.
    - checks: List[CheckResult] - evaluated identities, in execution order.
    - details: Dict - suite specific summaries (dimensions, group orders, labels).
    - wall_time: float - seconds spent; logged but left out of written reports.
    """
    suite: str
    checks: List[CheckResult] = []
    details: Dict[str, Any] = {}
    wall_time: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def add(self, check: CheckResult):
        self.checks.append(check)

    def extend(self, checks: List[CheckResult]):
        self.checks.extend(checks)

    def to_json_dict(self) -> Dict[str, Any]:
        """File form of the report: checks under their "pass" alias and no wall time."""
        return {"suite": self.suite,
                "pass": self.passed,
                "checks": [check.dict(by_alias=True) for check in self.checks],
                "details": self.details}
