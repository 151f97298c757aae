"""Exception hierarchy shared across the package."""


class SupermarketError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SupermarketError):
    """Malformed input: bad parameters, bad spec strings, bad matrices."""


class DomainError(SupermarketError):
    """Integration domain is empty or inverted."""


class NonConvergence(SupermarketError):
    """Quadrature could not meet the requested tolerance within budget."""


class Instability(SupermarketError):
    """ODE state left the unit box; the step size is too large."""


class SingularSystem(SupermarketError):
    """Generator matrix is reducible or otherwise not solvable."""


class InvalidRepresentation(ValidationError):
    """Vector/matrix pair is not a valid phase-type representation."""


class ZeroSurvival(SupermarketError):
    """Hazard requested at a point where the survival function is zero."""


class InfiniteMoment(SupermarketError):
    """Requested moment does not exist for these parameters."""


class Unsupported(SupermarketError):
    """Operation is not defined for this distribution family."""


class Unstable(SupermarketError):
    """Offered load rho = lambda/mu is not below one."""


class NoClosedForm(SupermarketError):
    """No closed-form expression exists for this family."""


class ZeroGap(SupermarketError):
    """State coincides with the fixed point at some level."""


class DegenerateRatio(SupermarketError):
    """A ratio in the weight recursion vanished (e.g. empty start at t=0)."""


class NegativeGap(SupermarketError):
    """State exceeds the fixed point at some level."""


class InsufficientPoints(SupermarketError):
    """Too few samples inside the requested fitting window."""
