"""Truncated mean-field dynamics of the d-choices system.

Two systems are integrated:

* the scalar system for exponential service, one tail fraction per level,
  du_k/dt = lam (u_{k-1}^d - u_k^d) - mu (u_k - u_{k+1});
* the phase-type vector system, one row of per-phase fractions per level,
  dS_k/dt = lam (S_{k-1}^(.d) - S_k^(.d)) + S_k T + S_{k+1} T0 alpha,
  with the level-1 inflow lam * alpha (level zero is pinned at one).

Both truncate by zeroing level K+1; the doubly exponential decay makes the
cap error negligible when K is chosen from the tail family.  General
service laws are not integrated as a transport PDE; they are covered by
the closed-form family and by the simulator, with the phase-type system as
the dense dynamic surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._tails import tail_value
from .errors import ValidationError
from .numerics import Trajectory, solve_ode
from .phasetype import PHRepresentation, hadamard_power

__all__ = [
    "MeanFieldConfig",
    "DriftSpec",
    "drift_exponential",
    "drift_ph",
    "integrate_meanfield",
    "drift_decomposition",
    "classical_fixed_point",
    "ph_level_masses",
]


def classical_fixed_point(rho: float, d: int, K: int) -> np.ndarray:
    """Equilibrium tail vector (u_0=1, u_1, ..., u_K) of the scalar system."""
    return np.array([tail_value(1.0, rho, d, k) for k in range(K + 1)])


def drift_exponential(u: np.ndarray, lam: float, mu: float, d: int) -> np.ndarray:
    """Right-hand side of the scalar system; index 0 is pinned (derivative 0)."""
    u = np.asarray(u, dtype=float)
    up = u ** d
    du = np.zeros_like(u)
    shifted = np.append(u[2:], 0.0)  # closure: level K+1 is empty
    du[1:] = lam * (up[:-1] - up[1:]) - mu * (u[1:] - shifted)
    return du


def drift_ph(S: np.ndarray, lam: float, rep: PHRepresentation, d: int) -> np.ndarray:
    """Right-hand side of the phase-type vector system, rows are levels 1..K."""
    S = np.asarray(S, dtype=float)
    K, m = S.shape
    if m != rep.order:
        raise ValidationError(f"state has {m} phases, representation has {rep.order}")
    alpha, T, T0 = rep.alpha, rep.T, rep.T0
    powers = S ** d
    dS = np.empty_like(S)
    for k in range(K):
        inflow = lam * alpha if k == 0 else lam * powers[k - 1]
        exit_flow = S[k + 1] @ T0 if k + 1 < K else 0.0
        dS[k] = inflow - lam * powers[k] + S[k] @ T + exit_flow * alpha
    return dS


@dataclass(frozen=True)
class MeanFieldConfig:
    """One integration run of either system."""

    system: str                      # "exp" or "ph"
    lam: float
    d: int
    K: int
    t_end: float
    step: float
    mu: float | None = None          # exponential system
    rep: PHRepresentation | None = None  # phase-type system
    initial: object = "empty"        # "empty" | "fixed-point" | array

    def __post_init__(self):
        if self.system not in ("exp", "ph"):
            raise ValidationError("system must be 'exp' or 'ph'")
        if self.system == "exp" and (self.mu is None or self.mu <= 0.0):
            raise ValidationError("exponential system needs mu > 0")
        if self.system == "ph" and self.rep is None:
            raise ValidationError("phase-type system needs a representation")
        if self.K < 1 or self.step <= 0.0 or self.t_end <= 0.0:
            raise ValidationError("need K >= 1, step > 0, t_end > 0")


def _initial_state(config: MeanFieldConfig) -> np.ndarray:
    if isinstance(config.initial, str):
        if config.initial == "empty":
            if config.system == "exp":
                u = np.zeros(config.K + 1)
                u[0] = 1.0
                return u
            return np.zeros((config.K, config.rep.order))
        if config.initial == "fixed-point":
            if config.system == "exp":
                return classical_fixed_point(config.lam / config.mu, config.d, config.K)
            raise ValidationError("no closed-form start for the phase-type system; pass an array")
        raise ValidationError(f"unknown initial state {config.initial!r}")
    arr = np.asarray(config.initial, dtype=float)
    expected = (config.K + 1,) if config.system == "exp" else (config.K, config.rep.order)
    if arr.shape != expected:
        raise ValidationError(f"initial state must have shape {expected}, got {arr.shape}")
    return arr.copy()


def integrate_meanfield(config: MeanFieldConfig) -> Trajectory:
    """Integrate the configured system; states are flattened per time point.

    The level-ordering invariant (1 >= u_1 >= u_2 >= ... >= 0) is asserted
    at every output time, with a small tolerance for clamping noise.
    """
    y0 = _initial_state(config)
    if config.system == "exp":
        field = lambda u: drift_exponential(u, config.lam, config.mu, config.d)
        traj = solve_ode(field, y0, config.t_end, config.step)
        levels = traj.states
    else:
        K, m = config.K, config.rep.order
        field = lambda y: drift_ph(y.reshape(K, m), config.lam, config.rep, config.d).ravel()
        traj = solve_ode(field, y0.ravel(), config.t_end, config.step)
        levels = np.concatenate(
            [np.ones((len(traj.times), 1)), traj.states.reshape(len(traj.times), K, m).sum(axis=2)],
            axis=1,
        )
    gaps = np.diff(levels, axis=1)
    if np.max(gaps) > 1e-9:
        t_bad = traj.times[int(np.argmax(np.max(gaps, axis=1)))]
        raise ValidationError(f"level ordering violated at t={t_bad:.6g}")
    meta = dict(traj.metadata)
    meta.update(system=config.system, lam=config.lam, d=config.d, K=config.K)
    if config.system == "ph":
        meta.update(order=config.rep.order)
    return Trajectory(traj.times, traj.states, meta)


def ph_level_masses(traj: Trajectory, K: int, m: int) -> np.ndarray:
    """Per-level masses (time, K) from a flattened phase-type trajectory."""
    return traj.states.reshape(len(traj.times), K, m).sum(axis=2)


@dataclass(frozen=True)
class DriftSpec:
    """Arrival/service split of the drift, unit jump sizes.

    Index 0 carries the level-zero pair (arrival part -lam, service part
    the level-1 completion flow); rows 1..K reproduce the system drift as
    a * beta_a + b * beta_b.
    """

    beta_a: np.ndarray
    beta_b: np.ndarray
    a: float = 1.0
    b: float = 1.0

    def combined(self) -> np.ndarray:
        return self.a * self.beta_a + self.b * self.beta_b


def drift_decomposition(state, lam: float, d: int, mu: float | None = None,
                        rep: PHRepresentation | None = None) -> DriftSpec:
    """Split the drift into arrival and service parts, per level."""
    if (mu is None) == (rep is None):
        raise ValidationError("pass exactly one of mu (exponential) or rep (phase type)")
    if mu is not None:
        u = np.asarray(state, dtype=float)
        up = u ** d
        shifted = np.append(u[2:], 0.0)
        beta_a = np.empty_like(u)
        beta_b = np.empty_like(u)
        beta_a[0] = -lam
        beta_b[0] = mu * u[1] if u.size > 1 else 0.0
        beta_a[1:] = lam * (up[:-1] - up[1:])
        beta_b[1:] = -mu * (u[1:] - shifted)
        return DriftSpec(beta_a=beta_a, beta_b=beta_b)
    S = np.asarray(state, dtype=float)
    K, m = S.shape
    alpha, T, T0 = rep.alpha, rep.T, rep.T0
    powers = np.array([hadamard_power(S[k], d) for k in range(K)])
    beta_a = np.empty((K + 1, m))
    beta_b = np.empty((K + 1, m))
    beta_a[0] = -lam * alpha
    beta_b[0] = float(S[0] @ T0) * alpha if K >= 1 else 0.0
    for k in range(K):
        inflow = lam * alpha if k == 0 else lam * powers[k - 1]
        beta_a[k + 1] = inflow - lam * powers[k]
        exit_flow = float(S[k + 1] @ T0) if k + 1 < K else 0.0
        beta_b[k + 1] = S[k] @ T + exit_flow * alpha
    return DriftSpec(beta_a=beta_a, beta_b=beta_b)
