"""Exception hierarchy shared by all modules."""


class InhomDiffError(Exception):
    """Base class for package errors."""


class RangeError(InhomDiffError, ValueError):
    """Argument lies outside the tabulated range."""


class NumericError(InhomDiffError, ArithmeticError):
    """Quadrature failed to converge or produced non-finite values."""


class InvalidAssumptionError(InhomDiffError):
    """A structural assumption (e.g. monotonicity of V_rho) fails on the grid."""


class RegimeError(InhomDiffError):
    """The requested quantity does not exist in the current parameter regime."""


class InvalidSpecError(InhomDiffError, ValueError):
    """Contradictory or inadmissible problem parameters."""


class StiffnessError(InhomDiffError):
    """Explicit time step collapsed."""


class SchemeFailureError(InhomDiffError):
    """Negative undershoot beyond rounding level."""


class FitError(InhomDiffError, ValueError):
    """Not enough usable data for a regression."""


class InvalidExperimentError(InhomDiffError):
    """Experiment preconditions are violated."""
