"""Power-of-d-choices load balancing toolkit.

Closed-form doubly exponential tail families for general service laws,
phase-type constructions, truncated mean-field dynamics with convergence
diagnostics, and a discrete-event simulator that serves as the empirical
oracle for all of it.
"""

from . import convergence, distributions, fixedpoint, meanfield, metrics, numerics, phasetype, simulator, tables
from .distributions import parse_distribution
from .fixedpoint import FixedPointFamily, classical_tail, theta

__version__ = "0.1.0"

__all__ = [
    "numerics",
    "distributions",
    "phasetype",
    "fixedpoint",
    "meanfield",
    "convergence",
    "metrics",
    "simulator",
    "tables",
    "parse_distribution",
    "FixedPointFamily",
    "classical_tail",
    "theta",
    "__version__",
]
