"""Phase-type representation algebra and the three fixed-point constructions.

A phase-type law is the absorption time of a finite Markov chain with
initial probability row vector alpha and subgenerator T; the exit-rate
column is T0 = -T e.  Three different routes to the key tail parameter and
the associated doubly exponential level family are implemented:

1. quadrature of the d-th power of the scaled survival function,
2. the Hadamard d-power of the stationary vector of T + T0 alpha,
3. the reciprocal of the Hadamard d-th-root mass of alpha.

The three families are genuinely different for two or more phases; see
``fixed_point_residuals`` for substituting any of them back into the
stationary balance equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from ._tails import log_tail_value, tail_value
from .errors import InvalidRepresentation, Unstable
from .numerics import QuadratureSpec, integrate, stationary_vector, survival_ph

__all__ = [
    "PHRepresentation",
    "PHFixedPoint",
    "erlang_representation",
    "hadamard_power",
    "theta_ph",
    "fixed_point_ph",
    "residual_matrices",
    "fixed_point_residuals",
    "load_ph",
    "parse_ph",
]


@dataclass(frozen=True)
class PHRepresentation:
    """Validated (alpha, T) pair of order m."""

    alpha: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        T = np.atleast_2d(np.asarray(self.T, dtype=float))
        m = alpha.size
        if T.shape != (m, m):
            raise InvalidRepresentation(f"T must be {m}x{m}, got {T.shape}")
        if np.min(alpha) < 0.0 or abs(alpha.sum() - 1.0) > 1e-12:
            raise InvalidRepresentation("alpha must be a probability vector")
        if np.max(np.diag(T)) >= 0.0:
            raise InvalidRepresentation("diagonal of T must be negative")
        off = T - np.diag(np.diag(T))
        if np.min(off) < -1e-15:
            raise InvalidRepresentation("off-diagonal of T must be non-negative")
        rowsum = T.sum(axis=1)
        if np.max(rowsum) > 1e-12:
            raise InvalidRepresentation("row sums of T must be non-positive")
        if np.min(rowsum) > -1e-12:
            raise InvalidRepresentation("T must have an exit somewhere (strict row-sum deficit)")
        try:
            mean = -float(alpha @ np.linalg.solve(T, np.ones(m)))
        except np.linalg.LinAlgError as exc:
            raise InvalidRepresentation("T must be invertible") from exc
        if not mean > 0.0:
            raise InvalidRepresentation("mean must be positive")
        generator = T + np.outer(-T @ np.ones(m), alpha)
        adjacency = (np.abs(generator) > 0.0).astype(np.int8)
        n_comp, _ = connected_components(adjacency, directed=True, connection="strong")
        if n_comp != 1:
            raise InvalidRepresentation("T + T0 alpha must be irreducible")
        alpha.setflags(write=False)
        T.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "T", T)

    @property
    def order(self) -> int:
        return self.alpha.size

    @cached_property
    def T0(self) -> np.ndarray:
        """Exit-rate column -T e."""
        return -self.T @ np.ones(self.order)

    @cached_property
    def mean(self) -> float:
        return -float(self.alpha @ np.linalg.solve(self.T, np.ones(self.order)))

    @property
    def mu(self) -> float:
        """Service rate, the reciprocal mean."""
        return 1.0 / self.mean

    @cached_property
    def omega(self) -> np.ndarray:
        """Stationary vector of the phase process T + T0 alpha."""
        return stationary_vector(self.T + np.outer(self.T0, self.alpha))

    def survival(self, x: float) -> float:
        return survival_ph(self.alpha, self.T, x)

    def second_moment(self) -> float:
        sol = np.linalg.solve(self.T, np.linalg.solve(self.T, np.ones(self.order)))
        return 2.0 * float(self.alpha @ sol)


def erlang_representation(m: int, eta: float = 1.0) -> PHRepresentation:
    """m-phase Erlang chain: start in phase 1, rate eta hops to absorption."""
    if m < 1 or eta <= 0.0:
        raise InvalidRepresentation("need m >= 1 phases and a positive rate")
    alpha = np.zeros(m)
    alpha[0] = 1.0
    T = -eta * np.eye(m)
    for i in range(m - 1):
        T[i, i + 1] = eta
    return PHRepresentation(alpha, T)


def hadamard_power(v, p: float) -> np.ndarray:
    """Entrywise power; exact zeros stay exact zeros for fractional p."""
    v = np.asarray(v, dtype=float)
    if p <= 0.0:
        raise ValueError("power must be positive")
    if np.min(v) < 0.0:
        raise ValueError("entries must be non-negative")
    out = np.zeros_like(v)
    nz = v > 0.0
    out[nz] = v[nz] ** p
    return out


def theta_ph(rep: PHRepresentation, d: int, method: int) -> float:
    """Key tail parameter by one of the three routes."""
    if d < 1:
        raise ValueError("d must be at least 1")
    if method == 1:
        mu = rep.mu
        f = lambda x: (mu * survival_ph(rep.alpha, rep.T, x)) ** d
        # survival decays like exp(min exit rate * x); keep tail panels modest
        spec = QuadratureSpec(tail_initial_width=max(1.0, rep.mean))
        return integrate(f, 0.0, math.inf, spec)
    if method == 2:
        return float(np.sum(hadamard_power(rep.omega, d)))
    if method == 3:
        return 1.0 / float(np.sum(hadamard_power(rep.alpha, 1.0 / d)))
    raise ValueError(f"method must be 1, 2 or 3, got {method}")


@dataclass(frozen=True)
class PHFixedPoint:
    """Level family produced by one of the three constructions.

    ``masses`` holds the x-integrated (phase-summed) level masses for
    levels 1..K.  Methods 2 and 3 also carry the per-phase row vectors in
    ``levels``; method 1 instead pairs the masses with the density factor
    mu * survival(x).
    """

    method: int
    theta: float
    rho: float
    d: int
    masses: np.ndarray
    levels: dict[int, np.ndarray] | None
    rep: PHRepresentation

    @property
    def pi0(self) -> float:
        return 1.0

    def density_factor(self, x: float) -> float:
        """mu * survival(x), the x-profile shared by every level (method 1)."""
        return self.rep.mu * self.rep.survival(x)


def _level_mass(theta: float, rho: float, d: int, method: int, k: int) -> float:
    if method == 3:
        # mass is (theta*rho)^B(k) * sum(alpha^{1/d}) = (theta*rho)^B(k) / theta
        return tail_value(1.0, theta * rho, d, k) / theta
    return tail_value(theta, rho, d, k)


def _default_K(theta: float, rho: float, d: int, method: int, cap: int = 64) -> int:
    """Smallest level whose mass drops below 1e-15, capped."""
    for k in range(1, cap + 1):
        if _level_mass(theta, rho, d, method, k) < 1e-15:
            return k
    return cap


def fixed_point_ph(rep: PHRepresentation, lam: float, d: int, method: int,
                   K: int | None = None) -> PHFixedPoint:
    """Levels 1..K of the chosen doubly exponential family.

    Raises Unstable unless rho = lam / mu < 1.
    """
    mu = rep.mu
    rho = lam / mu
    if rho >= 1.0:
        raise Unstable(f"rho = {rho:.6g} >= 1")
    theta = theta_ph(rep, d, method)
    if K is None:
        K = _default_K(theta, rho, d, method)
    if method == 1:
        masses = np.array([tail_value(theta, rho, d, k) for k in range(1, K + 1)])
        return PHFixedPoint(1, theta, rho, d, masses, None, rep)
    if method == 2:
        omega = rep.omega
        levels = {k: tail_value(theta, rho, d, k) * omega for k in range(1, K + 1)}
    elif method == 3:
        a_root = hadamard_power(rep.alpha, 1.0 / d)
        levels = {}
        for k in range(1, K + 1):
            # (theta*rho)^B(k) with B the rho-exponent of the tail family
            lv = log_tail_value(1.0, theta * rho, d, k)
            levels[k] = (math.exp(lv) if lv > -math.inf else 0.0) * a_root
    else:
        raise ValueError(f"method must be 1, 2 or 3, got {method}")
    masses = np.array([levels[k].sum() for k in range(1, K + 1)])
    return PHFixedPoint(method, theta, rho, d, masses, levels, rep)


def residual_matrices(rep: PHRepresentation, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """(R, V) with V = lam (-T)^(-1) and R = lam (-I + e alpha)(-T)^(-1).

    These drive the level recursion pi_k = pi_{k-1}^(.d) V + pi_k^(.d) R;
    vectors proportional to the d-th root of alpha annihilate R.
    """
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    m = rep.order
    neg_T_inv = np.linalg.inv(-rep.T)
    V = lam * neg_T_inv
    R = lam * (-np.eye(m) + np.outer(np.ones(m), rep.alpha)) @ neg_T_inv
    return R, V


def fixed_point_residuals(rep: PHRepresentation, lam: float, d: int,
                          levels: dict[int, np.ndarray], form: str = "vector") -> dict:
    """Substitute a level family into the stationary balance equations.

    form="vector" evaluates the full per-phase equations; form="projected"
    sums each equation over phases first (the scalar level-mass balance).
    Returns the throughput equation residual and the sup-norm residual for
    levels 1..K-1 (level K needs the unavailable level K+1).
    """
    if form not in ("vector", "projected"):
        raise ValueError("form must be 'vector' or 'projected'")
    alpha, T, T0 = rep.alpha, rep.T, rep.T0
    K = max(levels)
    eq_throughput = float(levels[1] @ T0) - lam
    out = np.empty(K - 1)
    for k in range(1, K):
        pk, pk1 = levels[k], levels[k + 1]
        prev_pow = alpha if k == 1 else hadamard_power(levels[k - 1], d)
        r = lam * prev_pow - lam * hadamard_power(pk, d) + pk @ T + float(pk1 @ T0) * alpha
        out[k - 1] = abs(float(r.sum())) if form == "projected" else float(np.max(np.abs(r)))
    return {"throughput": eq_throughput, "levels": out}


def parse_ph(text: str) -> PHRepresentation:
    """Parse the small text format: first line alpha, then the m rows of T."""
    rows = [line.split() for line in text.strip().splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if len(rows) < 2:
        raise InvalidRepresentation("need one alpha line and at least one T row")
    try:
        alpha = np.array([float(v) for v in rows[0]])
        T = np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError as exc:
        raise InvalidRepresentation(f"non-numeric entry: {exc}") from exc
    m = alpha.size
    if len(rows) - 1 != m:
        raise InvalidRepresentation(f"alpha has {m} entries but {len(rows) - 1} T rows follow")
    if any(len(row) != m for row in rows[1:]):
        raise InvalidRepresentation("every T row must match the order of alpha")
    return PHRepresentation(alpha, T)


def load_ph(path) -> PHRepresentation:
    return parse_ph(Path(path).read_text())
