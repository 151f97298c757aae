"""Numerical kernels: adaptive quadrature, RK4 stepping, small dense linear algebra.

Everything here is a pure function of its inputs and safe to call from
multiple threads.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, Instability, InvalidRepresentation, NonConvergence, SingularSystem

__all__ = [
    "QuadratureSpec",
    "Trajectory",
    "integrate",
    "solve_ode",
    "stationary_vector",
    "survival_ph",
    "expm_action",
]

# 15-point Gauss-Kronrod rule on [-1, 1] with the embedded 7-point Gauss rule.
_GK_NODES = np.array([
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000,
])
_GK_WK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728,
])
_GK_WG = np.array([0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469])


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and domain hints for the adaptive integrator.

    split_points mark locations where the integrand (or a derivative) is
    singular; the domain is cut there before any panel is laid down.  The
    tail_* fields control how the semi-infinite part is walked: panels of
    geometrically growing width are appended until ``tail_quiet_panels``
    consecutive panels contribute less than the absolute tolerance.
    """

    relative_tolerance: float = 1e-10
    absolute_tolerance: float = 1e-14
    split_points: tuple[float, ...] = ()
    tail_initial_width: float = 1.0
    tail_growth: float = 2.0
    tail_quiet_panels: int = 3
    max_panels: int = 4000

    def __post_init__(self):
        if not (self.relative_tolerance > 0.0 and self.absolute_tolerance > 0.0):
            raise DomainError("tolerances must be positive")
        pts = tuple(float(p) for p in self.split_points)
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise DomainError("split_points must be strictly increasing")
        object.__setattr__(self, "split_points", pts)
        if self.tail_growth <= 1.0 or self.tail_initial_width <= 0.0:
            raise DomainError("tail extension must grow")


@dataclass(frozen=True)
class Trajectory:
    """Time grid plus one state vector per grid point."""

    times: np.ndarray
    states: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=float)
        if len(t) != len(s):
            raise ValueError("times and states must have equal length")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        if s.size and (s.min() < -1e-12 or s.max() > 1.0 + 1e-12):
            raise ValueError("state entries must lie in [0, 1]")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    def state_at(self, t: float) -> np.ndarray:
        """State at the grid point closest to t."""
        return self.states[int(np.argmin(np.abs(self.times - t)))]


def _panel(f, a, b):
    # Gauss-Kronrod 15(7) on [a, b]; returns (value, error estimate)
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    fv = np.empty(15)
    for i, x in enumerate(_GK_NODES):
        fv[2 * i] = f(c + h * x)
        if i < 7:
            fv[2 * i + 1] = f(c - h * x)
    k15 = _GK_WK[7] * fv[14]
    g7 = _GK_WG[3] * fv[14]
    for i in range(7):
        k15 += _GK_WK[i] * (fv[2 * i] + fv[2 * i + 1])
        if i % 2 == 1:
            g7 += _GK_WG[i // 2] * (fv[2 * i] + fv[2 * i + 1])
    err = (200.0 * abs(k15 - g7)) ** 1.5 if k15 != g7 else 0.0
    return h * k15, h * min(err, abs(k15 - g7) * 200.0)


def integrate(f, lower: float, upper: float, spec: QuadratureSpec | None = None) -> float:
    """Integrate f over [lower, upper], upper may be math.inf.

    Finite sections are refined by adaptive bisection of Gauss-Kronrod
    panels, worst error first.  An infinite upper limit is handled by
    geometric extension panels; the integrand must eventually decrease for
    the quiet-tail stopping rule to certify the truncation.

    Raises NonConvergence if the panel budget is exhausted before the error
    estimate drops below max(rtol * |value|, atol), and DomainError for an
    empty domain.
    """
    spec = spec or QuadratureSpec()
    lower = float(lower)
    if not upper > lower:
        raise DomainError(f"empty integration domain [{lower}, {upper}]")

    cuts = [p for p in spec.split_points if lower < p < upper]
    edges = [lower] + cuts
    finite_end = upper
    infinite = math.isinf(upper)
    if infinite:
        finite_end = edges[-1] + spec.tail_initial_width
    edges.append(finite_end)

    # worst-error-first queue of finite panels
    total, total_err = 0.0, 0.0
    heap: list[tuple[float, float, float, float, float]] = []
    n_panels = 0

    def push(a, b):
        nonlocal total, total_err, n_panels
        v, e = _panel(f, a, b)
        total += v
        total_err += e
        n_panels += 1
        heapq.heappush(heap, (-e, a, b, v, e))

    for a, b in zip(edges, edges[1:]):
        push(a, b)

    def refine(tol_fn):
        nonlocal total, total_err, n_panels
        while heap and total_err > tol_fn():
            if n_panels > spec.max_panels:
                raise NonConvergence(
                    f"quadrature did not converge within {spec.max_panels} panels "
                    f"(error estimate {total_err:.3e})"
                )
            neg_e, a, b, v, e = heapq.heappop(heap)
            if e <= 0.0 or b - a < 1e-15 * max(1.0, abs(a)):
                continue  # cannot refine further; keep its error in the budget
            total -= v
            total_err -= e
            m = 0.5 * (a + b)
            push(a, m)
            push(m, b)

    tol = lambda: max(spec.relative_tolerance * abs(total), spec.absolute_tolerance)
    refine(tol)

    if infinite:
        a = finite_end
        w = spec.tail_initial_width
        quiet = 0
        while quiet < spec.tail_quiet_panels:
            if n_panels > spec.max_panels:
                raise NonConvergence("tail extension exhausted the panel budget")
            b = a + w
            push(a, b)
            refine(tol)
            contribution = abs(_panel(f, a, b)[0])
            quiet = quiet + 1 if contribution < spec.absolute_tolerance else 0
            a = b
            w *= spec.tail_growth
        refine(tol)

    if total_err > tol():
        raise NonConvergence(f"quadrature error estimate {total_err:.3e} above tolerance")
    return total


def solve_ode(fieldfn, y0, t_end: float, step: float) -> Trajectory:
    """Classical fixed-step RK4 for states living in the unit box.

    States are clamped back to [0, 1] when the overshoot is below 1e-9;
    larger excursions raise Instability (the step is too large for the
    field).
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    y = np.array(y0, dtype=float)
    n_steps = max(1, int(round(t_end / step)))
    times = np.empty(n_steps + 1)
    states = np.empty((n_steps + 1, y.size))
    times[0] = 0.0
    states[0] = y
    t = 0.0
    for i in range(1, n_steps + 1):
        k1 = np.asarray(fieldfn(y))
        k2 = np.asarray(fieldfn(y + 0.5 * step * k1))
        k3 = np.asarray(fieldfn(y + 0.5 * step * k2))
        k4 = np.asarray(fieldfn(y + step * k3))
        y = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        lo, hi = y.min(), y.max()
        if lo < -1e-9 or hi > 1.0 + 1e-9:
            raise Instability(f"state left [0,1] at t={t + step:.6g} (min={lo:.3e}, max={hi:.3e})")
        np.clip(y, 0.0, 1.0, out=y)
        t += step
        times[i] = t
        states[i] = y
    return Trajectory(times, states, {"method": "rk4", "step": step, "t_end": t_end})


def stationary_vector(Q) -> np.ndarray:
    """Stationary probability row vector of an irreducible generator Q.

    Solves omega Q = 0 with the normalization omega e = 1 replacing one
    equation of the dense linear system.  Raises SingularSystem when Q is
    reducible or malformed.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise SingularSystem("generator must be square")
    m = Q.shape[0]
    if np.max(np.abs(Q.sum(axis=1))) > 1e-10 * max(1.0, np.max(np.abs(Q))):
        raise SingularSystem("generator rows must sum to zero")
    off = Q - np.diag(np.diag(Q))
    if np.min(off) < 0.0:
        raise SingularSystem("off-diagonal rates must be non-negative")
    A = Q.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    try:
        omega = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"generator not solvable: {exc}") from exc
    if np.min(omega) <= 0.0:
        raise SingularSystem("generator appears reducible (non-positive stationary entries)")
    if np.max(np.abs(omega @ Q)) > 1e-12 * max(1.0, np.max(np.abs(Q))):
        raise SingularSystem("stationary residual too large; generator likely reducible")
    return omega


def _uniformized_terms(T, x):
    # uniformization setup: substochastic P = I + T/q, Poisson rate q*x
    q = float(np.max(-np.diag(T)))
    if q <= 0.0:
        raise InvalidRepresentation("subgenerator diagonal must be negative")
    P = np.eye(T.shape[0]) + T / q
    return P, q * x


def expm_action(alpha, T, x: float) -> np.ndarray:
    """Row vector alpha * exp(T x) by uniformization.

    Poisson-weighted powers of the substochastic matrix I + T/q keep every
    intermediate quantity inside [0, 1].  Large q*x is reduced by matrix
    squaring, which preserves substochasticity.
    """
    alpha = np.asarray(alpha, dtype=float)
    T = np.asarray(T, dtype=float)
    if x < 0.0:
        raise ValueError("x must be non-negative")
    if x == 0.0:
        return alpha.copy()
    P, rate = _uniformized_terms(T, x)
    n_square = 0
    while rate > 64.0:
        rate *= 0.5
        n_square += 1
    # Poisson-weighted sum of vector-matrix products (or matrix products
    # when squaring is needed afterwards).
    acc: np.ndarray
    if n_square == 0:
        term = alpha.copy()
        acc = term * math.exp(-rate)
        w = math.exp(-rate)
        k = 1
        while True:
            term = term @ P
            w *= rate / k
            acc = acc + w * term
            # remaining Poisson mass bounds the truncation error
            if w < 1e-16 and k > rate:
                break
            k += 1
            if k > 10000:
                break
        return acc
    M = np.eye(T.shape[0]) * math.exp(-rate)
    term = np.eye(T.shape[0])
    w = math.exp(-rate)
    k = 1
    while True:
        term = term @ P
        w *= rate / k
        M = M + w * term
        if w < 1e-16 and k > rate:
            break
        k += 1
        if k > 10000:
            break
    for _ in range(n_square):
        M = M @ M
    return alpha @ M


def survival_ph(alpha, T, x: float) -> float:
    """P(service > x) for a phase-type law: alpha * exp(T x) * e in [0, 1]."""
    v = expm_action(alpha, T, x)
    s = float(v.sum())
    return min(1.0, max(0.0, s))
