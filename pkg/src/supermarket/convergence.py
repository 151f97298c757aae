"""Convergence diagnostics: weighted potential, weight recursion, decay fit.

The potential is the weighted sum of per-level gaps between the fixed
point and the current profile.  The weight recursion takes the per-level
ratios c_k (d-th power mass over gap) and d_k (service flow over gap) at a
chosen time; both are exposed separately because the ratios vary in time
and freezing them is a caller decision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRatio, InsufficientPoints, NegativeGap, ValidationError, ZeroGap
from .numerics import Trajectory

__all__ = [
    "WeightSequence",
    "ratios",
    "weights",
    "potential",
    "phi_series",
    "fit_decay",
    "lipschitz_estimate",
]

_GAP_TOL = 1e-9  # slack before a negative gap is treated as an error


@dataclass(frozen=True)
class WeightSequence:
    """Positive level weights with w_1 = 1 and strict growth."""

    delta: float
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if self.delta <= 0.0:
            raise ValidationError("delta must be positive")
        if w.size == 0 or w[0] != 1.0:
            raise ValidationError("weights must start at w_1 = 1")
        if w.size > 1 and np.min(np.diff(w)) <= 0.0:
            raise ValidationError("weights must be strictly increasing")
        object.__setattr__(self, "weights", w)


def ratios(state, fixed_point, mu: float, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-level gap ratios (c_k, d_k) for the scalar exponential system.

    c_k divides the d-th power of the level fraction by the gap to the
    fixed point, d_k the service flow by the same gap.  Requires the state
    to sit strictly below the fixed point wherever the numerators are
    positive; raises ZeroGap otherwise.
    """
    u = np.asarray(state, dtype=float)[1:]       # drop the pinned level 0
    pi = np.asarray(fixed_point, dtype=float)[1:]
    gap = pi - u
    touching = gap <= 1e-14
    occupied = u > 1e-14
    if np.any(touching & occupied):
        k = int(np.argmax(touching & occupied)) + 1
        raise ZeroGap(f"state touches the fixed point at level {k}")
    # levels where both the state and the fixed point vanish carry no mass
    safe_gap = np.where(touching, 1.0, gap)
    c = np.where(touching, 0.0, (u ** d) / safe_gap)
    dk = np.where(touching, 0.0, (mu * u) / safe_gap)
    return c, dk


def weights(delta: float, lam: float, c, d_ratios) -> WeightSequence:
    """Weight recursion driven by the gap ratios.

    w_1 = 1, w_2 = 1 + delta/(lam c_1) and for k >= 3
    w_k = w_{k-1} + (delta w_{k-1} + (w_{k-1} - w_{k-2}) d_{k-1}) / (lam c_{k-1}).
    """
    c = np.asarray(c, dtype=float)
    d_ratios = np.asarray(d_ratios, dtype=float)
    if delta <= 0.0 or lam <= 0.0:
        raise ValidationError("delta and lam must be positive")
    if c.size != d_ratios.size:
        raise ValidationError("c and d ratio lists must have equal length")
    if np.any(c <= 0.0):
        k = int(np.argmax(c <= 0.0)) + 1
        raise DegenerateRatio(f"c_{k} vanishes; evaluate the ratios at t > 0")
    K = c.size + 1
    w = np.empty(K)
    w[0] = 1.0
    if K > 1:
        w[1] = 1.0 + delta / (lam * c[0])
    for k in range(2, K):
        w[k] = w[k - 1] + (delta * w[k - 1] + (w[k - 1] - w[k - 2]) * d_ratios[k - 1]) / (lam * c[k - 1])
    return WeightSequence(delta=delta, weights=w)


def potential(state, fixed_point, w=None) -> float:
    """Weighted gap sum; zero exactly at the fixed point.

    w defaults to all-ones.  States above the fixed point beyond a small
    truncation slack raise NegativeGap.
    """
    u = np.asarray(state, dtype=float)[1:]
    pi = np.asarray(fixed_point, dtype=float)[1:]
    gap = pi - u
    if np.min(gap) < -_GAP_TOL:
        k = int(np.argmin(gap)) + 1
        raise NegativeGap(f"state exceeds the fixed point at level {k} by {-np.min(gap):.3e}")
    gap = np.clip(gap, 0.0, None)
    wv = np.ones_like(gap) if w is None else np.asarray(
        w.weights if isinstance(w, WeightSequence) else w, dtype=float)
    if wv.size < gap.size:
        raise ValidationError("weight vector shorter than the level count")
    return float(np.dot(wv[: gap.size], gap))


def phi_series(trajectory: Trajectory, fixed_point, w=None) -> np.ndarray:
    """Potential evaluated at every trajectory time point."""
    return np.array([potential(s, fixed_point, w) for s in trajectory.states])


def fit_decay(trajectory: Trajectory, fixed_point, window: tuple[float, float],
              w=None) -> tuple[float, float, float]:
    """Least-squares exponential fit of the potential on a time window.

    Returns (c0, delta_fit, r_squared) from the line through
    (t, log potential); delta_fit is minus the slope.
    """
    t_lo, t_hi = window
    phi = phi_series(trajectory, fixed_point, w)
    mask = (trajectory.times >= t_lo) & (trajectory.times <= t_hi) & (phi > 0.0)
    if int(mask.sum()) < 10:
        raise InsufficientPoints(f"only {int(mask.sum())} usable samples in [{t_lo}, {t_hi}]")
    t = trajectory.times[mask]
    y = np.log(phi[mask])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return float(np.exp(intercept)), float(-slope), r2


def lipschitz_estimate(drift, samples) -> float:
    """Empirical lower bound on the drift's Lipschitz constant.

    Takes pairs of states, returns the largest sup-norm difference
    quotient; identical pairs contribute nothing.
    """
    best = 0.0
    for y, z in samples:
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        dyz = float(np.max(np.abs(y - z)))
        if dyz == 0.0:
            continue
        dF = float(np.max(np.abs(np.asarray(drift(y)) - np.asarray(drift(z)))))
        best = max(best, dF / dyz)
    return best
