class InvalidParams(ValueError):
    """Parameters or numeric arguments outside their domain."""


class DegenerateState(ValueError):
    """State where a vector field is singular (v <= 0 for the profile ODE)."""


class UnsupportedPoint(ValueError):
    """Critical point with no linearization in the finite chart."""


class OutsideSupport(ValueError):
    """Series evaluated beyond the interface it describes."""


class InvalidBracket(ValueError):
    """Bisection endpoints do not classify as required."""


class WindowTooShort(ValueError):
    """Fit window holds too few trajectory samples."""
