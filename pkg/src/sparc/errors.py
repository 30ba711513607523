"""Exception types raised across the package."""


class SparcError(Exception):
    """Base class; `kind` is the machine-readable tag used by the CLI."""

    kind = "error"


class InvalidSpec(SparcError, ValueError):
    kind = "invalid_spec"


class DegenerateLikelihood(SparcError, FloatingPointError):
    """The observation has zero likelihood under the effective channel."""

    kind = "degenerate_likelihood"


class QuadratureError(SparcError, ArithmeticError):
    kind = "quadrature_nonconvergence"


class MonteCarloError(SparcError, ArithmeticError):
    kind = "mc_budget"


class MaxIterError(SparcError, RuntimeError):
    """Iteration budget exhausted; `last` holds the final iterate."""

    kind = "max_iter"

    def __init__(self, msg, last=None):
        super().__init__(msg)
        self.last = last


class BracketError(SparcError, RuntimeError):
    kind = "bracket_not_found"


class DivergenceError(SparcError, FloatingPointError):
    kind = "divergence"


class DimensionError(SparcError, ValueError):
    kind = "dimension_mismatch"


class FitError(SparcError, ArithmeticError):
    kind = "fit_failure"
