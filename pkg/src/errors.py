class GridMismatchError(ValueError):
    """Operands live on different torus grids."""


class DegreeError(ValueError):
    """Form degree outside 0..n, or an operation applied to the wrong degree."""


class KindMismatchError(ValueError):
    """Exact and odd objects mixed in one operation."""


class TwistValidationError(ValueError):
    """Twist data violates its closure condition."""


class NotADerivationError(ValueError):
    """Input to a derivation operation fails the derivation condition."""


class NotAGroupError(ValueError):
    """A finite set of group elements is not closed under the product."""


class SubbundleError(ValueError):
    """A frame does not span a positive maximal subbundle of graph type."""


class ConvergenceError(RuntimeError):
    """An iterative solve stopped above its residual target."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class ResourceGuardError(RuntimeError):
    """A requested size exceeds the configured memory or enumeration guard."""


class CohomologyObstructionError(RuntimeError):
    """A closed form expected to be exact has a harmonic component."""


class ConditioningError(RuntimeError):
    """A pseudo-inverse is too ill-conditioned to be trusted."""
