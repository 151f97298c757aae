"""Key tail parameter and the doubly exponential level family for general service.

The tail parameter is the integral of the d-th power of the mean-scaled
survival function; equivalently the ratio of the integral of the d-th
survival power to the d-th power of the mean.  Level masses decay like
theta^A(k) * rho^B(k) with doubly exponential exponents and are always
assembled in log space.

``mode="generic"`` (the definition, by quadrature) is authoritative;
family-specific closed forms and the printed Erlang table formula are
verification modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._tails import log_tail_value, tail_exponents, tail_value
from .distributions import Erlang, Exponential, PowerLaw, ServiceDistribution, Weibull
from .errors import NoClosedForm, Unstable, Unsupported, ValidationError
from .numerics import integrate

__all__ = [
    "theta",
    "theta_tilde",
    "erlang_paper_table_theta",
    "FixedPointFamily",
    "classical_tail",
    "scalar_residuals",
]


def theta_tilde(dist: ServiceDistribution, d: int) -> float:
    """Integral of the d-th power of the survival function (time units)."""
    if d < 1:
        raise ValidationError("d must be at least 1")
    spec = dist.quadrature_spec()
    return integrate(lambda x: dist.survival(x) ** d, 0.0, math.inf, spec)


def erlang_paper_table_theta(m: int, eta: float, d: int) -> float:
    """The printed Erlang table formula: prefactor (eta/m)^d against the
    survival series truncated at k = m inclusive (one term more than the
    standard Erlang of m phases)."""
    if m < 1 or d < 1 or eta <= 0.0:
        raise ValidationError("need m >= 1, d >= 1 and eta > 0")
    table_dist = Erlang(m=m, eta=eta, convention="paper-table")
    integral = integrate(lambda x: table_dist.survival(x) ** d, 0.0, math.inf,
                         table_dist.quadrature_spec())
    return (eta / m) ** d * integral


def theta(dist: ServiceDistribution, d: int, mode: str = "generic") -> float:
    """Tail parameter of the d-choices fixed point for this service law.

    generic     quadrature of the defining ratio (works for every family)
    closed-form family-specific formula (exponential, Weibull, power law)
    paper-table the printed Erlang-table formula (Erlang only)
    """
    if d < 1:
        raise ValidationError("d must be at least 1")
    if mode == "generic":
        if d == 1:
            return 1.0
        tt = theta_tilde(dist, d)
        return tt / dist.mean() ** d
    if mode == "closed-form":
        if isinstance(dist, Exponential):
            return dist.mu ** (d - 1) / d
        if isinstance(dist, Weibull):
            g = math.gamma(1.0 + 1.0 / dist.tau)
            return dist.mu ** (d - 1) / (d ** (1.0 / dist.tau) * g ** (d - 1))
        if isinstance(dist, PowerLaw):
            # from the elementary integral of (mu+x)^(-alpha d); the source
            # text instead asserts mu^(d-1), which does not follow
            a = dist.alpha
            return dist.mu ** (1.0 - d) * (a - 1.0) ** d / (a * d - 1.0)
        raise NoClosedForm(f"no closed form for {type(dist).__name__}")
    if mode == "paper-table":
        if not isinstance(dist, Erlang):
            raise Unsupported("paper-table mode applies to Erlang only")
        return erlang_paper_table_theta(dist.m, dist.eta, d)
    raise ValidationError(f"unknown theta mode {mode!r}")


@dataclass(frozen=True)
class FixedPointFamily:
    """Doubly exponential level family for one (lam, d, service law) triple."""

    lam: float
    d: int
    dist: ServiceDistribution
    mu: float
    rho: float
    theta: float
    theta_tilde: float

    @classmethod
    def build(cls, lam: float, d: int, dist: ServiceDistribution,
              mode: str = "generic", theta_override: float | None = None) -> "FixedPointFamily":
        """Validate stability and attach the tail parameter.

        theta_override substitutes an externally chosen tail parameter
        (e.g. 1 for the classical family) without recomputing quadrature.
        """
        if d < 1:
            raise ValidationError("d must be at least 1")
        mean = dist.mean()
        mu = 1.0 / mean
        rho = lam / mu
        if not 0.0 < rho < 1.0:
            raise Unstable(f"need 0 < rho < 1, got rho = {rho:.6g}")
        th = float(theta_override) if theta_override is not None else theta(dist, d, mode)
        if not (th > 0.0 and math.isfinite(th)):
            raise ValidationError(f"tail parameter must be finite positive, got {th}")
        return cls(lam=lam, d=d, dist=dist, mu=mu, rho=rho,
                   theta=th, theta_tilde=th / mu ** d)

    def tail(self, k: int) -> float:
        """Level-k tail mass; 1 at level zero, log-space below."""
        return tail_value(self.theta, self.rho, self.d, k)

    def log10_tail(self, k: int) -> float:
        return log_tail_value(self.theta, self.rho, self.d, k) / math.log(10.0)

    def density(self, k: int, x: float) -> float:
        """Level-k density at age x: tail mass times mu * survival(x)."""
        if k < 1:
            raise ValidationError("density is defined for levels k >= 1")
        return self.tail(k) * self.mu * self.dist.survival(x)

    def product_form(self, k: int):
        """Split the level-k density into arrival and service factors.

        Returns (arrival_factor, service_factor) with the arrival factor
        lam^B(k) a pure number and service_factor(x) carrying the
        theta_tilde power and the survival profile; their product equals
        density(k, x).
        """
        if k < 1:
            raise ValidationError("product form is defined for levels k >= 1")
        a, b = tail_exponents(self.d, k)
        arrival = math.exp(b * math.log(self.lam)) if self.lam > 0.0 else 0.0
        tt = self.theta_tilde

        def service_factor(x: float) -> float:
            scale = math.exp(a * math.log(tt)) if a > 0.0 else 1.0
            return scale * self.dist.survival(x)

        return arrival, service_factor

    def upper_bound(self, k: int) -> float:
        """rho^A(k) * lam^(d^k) / mu, the coarse level-k bound."""
        if k < 1:
            raise ValidationError("upper bound is defined for levels k >= 1")
        a, _ = tail_exponents(self.d, k)
        if self.lam == 0.0:
            return 0.0
        log_v = a * math.log(self.rho) + float(self.d) ** k * math.log(self.lam) - math.log(self.mu)
        try:
            return math.exp(log_v)
        except OverflowError:
            return math.inf

    def truncation_level(self, eps: float, cap: int = 64) -> int:
        """Smallest K with tail(K) < eps, capped."""
        if not 0.0 < eps < 1.0:
            raise ValidationError("eps must lie in (0, 1)")
        for k in range(1, cap + 1):
            if self.tail(k) < eps:
                return k
        return cap


def classical_tail(rho: float, d: int, k: int) -> float:
    """Tail of the unit-parameter family rho^((d^k - 1)/(d - 1)).

    This is the equilibrium of the classical mean-field system (and the
    value the simulator reproduces for exponential service).
    """
    return tail_value(1.0, rho, d, k)


def scalar_residuals(fp: FixedPointFamily, K: int) -> dict:
    """Substitute the family into the x-integrated stationary equations.

    Returns the level-1 throughput residual and the balance residuals for
    levels 1..K-1 (the level-K equation needs level K+1).  The family
    satisfies these identically, so the residuals measure only rounding.
    """
    lam, mu, th, d = fp.lam, fp.mu, fp.theta, fp.d
    u = [fp.tail(k) for k in range(0, K + 2)]
    res = np.empty(K - 1)
    throughput = mu * u[1] - lam
    for k in range(1, K):
        inflow = lam * 1.0 if k == 1 else lam * th * u[k - 1] ** d
        res[k - 1] = inflow - lam * th * u[k] ** d - mu * u[k] + mu * u[k + 1]
    return {"throughput": throughput, "levels": res}
