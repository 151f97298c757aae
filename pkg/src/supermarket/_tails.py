"""Log-space evaluation of the doubly exponential tail family.

The tail mass at level k is theta^A(k) * rho^B(k) with
A(k) = (d^(k-1) - 1)/(d - 1) and B(k) = (d^k - 1)/(d - 1); both exponents
are evaluated with exact integer arithmetic and the d = 1 limit A -> k-1,
B -> k taken explicitly.  Values are assembled in log space because the
masses underflow past level seven or so for moderate loads.
"""

from __future__ import annotations

import math

__all__ = ["tail_exponents", "tail_value", "log_tail_value"]


def tail_exponents(d: int, k: int) -> tuple[float, float]:
    """(A, B) for level k: theta-exponent and rho-exponent."""
    if k < 0:
        raise ValueError("level must be non-negative")
    if k == 0:
        return 0.0, 0.0
    if d == 1:
        return float(k - 1), float(k)
    a = (d ** (k - 1) - 1) // (d - 1)
    b = (d ** k - 1) // (d - 1)
    return float(a), float(b)


def log_tail_value(theta: float, rho: float, d: int, k: int) -> float:
    """log of the level-k tail mass; -inf when the mass is exactly zero."""
    if k == 0:
        return 0.0
    a, b = tail_exponents(d, k)
    if rho == 0.0:
        return -math.inf
    if theta == 0.0 and a > 0.0:
        return -math.inf
    la = a * math.log(theta) if a > 0.0 else 0.0
    return la + b * math.log(rho)


def tail_value(theta: float, rho: float, d: int, k: int) -> float:
    lv = log_tail_value(theta, rho, d, k)
    if lv == -math.inf:
        return 0.0
    try:
        return math.exp(lv)
    except OverflowError:
        return math.inf
