"""Service-time distribution families.

Each family exposes the survival function, hazard rate, first two moments
and inverse-transform sampling.  Families are immutable values; everything
is evaluated from closed forms except where noted.

Two quirks inherited from the model source are handled explicitly:

* the power law survival (mu + x)^(-alpha) equals one at zero only when
  mu = 1; for mu > 1 the law has an atom at zero and for mu < 1 the
  formula exceeds one near zero and is kept evaluation-only;
* the almost-exponential survival exp(-x (ln x)^(-alpha)) vanishes from
  both sides at x = 1 and is not globally monotone, so the family is
  evaluation-only (no sampling) and restricted to even integer exponents
  below x = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import InfiniteMoment, Unsupported, ValidationError, ZeroSurvival
from .numerics import QuadratureSpec, integrate
from .phasetype import PHRepresentation, erlang_representation, load_ph
from .numerics import expm_action

__all__ = [
    "ServiceDistribution",
    "Exponential",
    "Erlang",
    "Weibull",
    "PowerLaw",
    "AlmostExponential",
    "PhaseTypeService",
    "parse_distribution",
]


class ServiceDistribution:
    """Common fixtures for the concrete families."""

    samplable = True

    def survival(self, x: float) -> float:
        raise NotImplementedError

    def density(self, x: float) -> float:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def second_moment(self) -> float:
        raise NotImplementedError

    def hazard(self, x: float) -> float:
        s = self.survival(x)
        if s <= 0.0:
            raise ZeroSurvival(f"survival vanishes at x={x!r}")
        return self.density(x) / s

    def sample(self, u: float) -> float:
        """Inverse survival at u in (0,1); only for closed-form families."""
        raise Unsupported(f"{type(self).__name__} has no closed-form inverse; use sample_stream")

    def sample_stream(self, draw) -> float:
        """Sample consuming uniforms from draw(); deterministic given the stream."""
        return self.sample(draw())

    def quadrature_spec(self) -> QuadratureSpec:
        """Hints for integrating this family's survival function."""
        return QuadratureSpec(tail_initial_width=max(1.0, self.mean()))

    def describe(self) -> str:
        raise NotImplementedError


def _check_u(u: float):
    if not 0.0 < u < 1.0:
        raise ValidationError(f"uniform draw must lie in (0,1), got {u}")


@dataclass(frozen=True)
class Exponential(ServiceDistribution):
    mu: float

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValidationError("rate mu must be positive")

    def survival(self, x):
        return math.exp(-self.mu * x)

    def density(self, x):
        return self.mu * math.exp(-self.mu * x)

    def mean(self):
        return 1.0 / self.mu

    def second_moment(self):
        return 2.0 / self.mu ** 2

    def hazard(self, x):
        return self.mu

    def sample(self, u):
        _check_u(u)
        return -math.log(u) / self.mu

    def describe(self):
        return f"exponential:mu={self.mu:.17g}"


@dataclass(frozen=True)
class Erlang(ServiceDistribution):
    """Sum of exponential phases.

    convention="standard" sums m phases of rate eta (survival truncates the
    Poisson series at m-1, mean m/eta).  convention="paper-table" keeps one
    extra series term, i.e. m+1 phases; it exists solely to reproduce the
    printed Erlang tail-parameter table, whose formula uses that variant.
    """

    m: int
    eta: float
    convention: str = "standard"

    def __post_init__(self):
        if self.m < 1 or self.eta <= 0.0:
            raise ValidationError("need m >= 1 and eta > 0")
        if self.convention not in ("standard", "paper-table"):
            raise ValidationError(f"unknown Erlang convention {self.convention!r}")

    @property
    def phases(self) -> int:
        return self.m if self.convention == "standard" else self.m + 1

    def survival(self, x):
        if x < 0.0:
            return 1.0
        z = self.eta * x
        term, acc = 1.0, 1.0
        for k in range(1, self.phases):
            term *= z / k
            acc += term
        return math.exp(-z) * acc

    def density(self, x):
        if x < 0.0:
            return 0.0
        p = self.phases
        z = self.eta * x
        return self.eta * z ** (p - 1) * math.exp(-z) / math.factorial(p - 1)

    def mean(self):
        return self.phases / self.eta

    def second_moment(self):
        p = self.phases
        return p * (p + 1) / self.eta ** 2

    def sample_stream(self, draw):
        total = 0.0
        for _ in range(self.phases):
            u = draw()
            _check_u(u)
            total += -math.log(u) / self.eta
        return total

    def as_representation(self) -> PHRepresentation:
        return erlang_representation(self.phases, self.eta)

    def describe(self):
        base = f"erlang:m={self.m},eta={self.eta:.17g}"
        return base if self.convention == "standard" else base + ",convention=paper-table"


@dataclass(frozen=True)
class Weibull(ServiceDistribution):
    """Survival exp(-(mu x)^tau); heavy-tailed for tau < 1."""

    tau: float
    mu: float

    def __post_init__(self):
        if self.tau <= 0.0 or self.mu <= 0.0:
            raise ValidationError("need tau > 0 and mu > 0")

    def survival(self, x):
        return math.exp(-((self.mu * x) ** self.tau))

    def density(self, x):
        if x <= 0.0:
            return math.inf if self.tau < 1.0 else (self.mu if self.tau == 1.0 else 0.0)
        z = self.mu * x
        return self.tau * self.mu * z ** (self.tau - 1.0) * math.exp(-(z ** self.tau))

    def mean(self):
        return math.gamma(1.0 + 1.0 / self.tau) / self.mu

    def second_moment(self):
        return math.gamma(1.0 + 2.0 / self.tau) / self.mu ** 2

    def hazard(self, x):
        if x <= 0.0 and self.tau < 1.0:
            return math.inf
        return self.tau * self.mu * (self.mu * x) ** (self.tau - 1.0)

    def sample(self, u):
        _check_u(u)
        return (-math.log(u)) ** (1.0 / self.tau) / self.mu

    def describe(self):
        return f"weibull:tau={self.tau:.17g},mu={self.mu:.17g}"


@dataclass(frozen=True)
class PowerLaw(ServiceDistribution):
    """Survival (mu + x)^(-alpha) taken literally; finite mean needs alpha > 1.

    Sampling requires mu >= 1 (for mu > 1 the law has an atom at zero of
    size 1 - mu^(-alpha), matching the survival's jump).
    """

    mu: float
    alpha: float

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValidationError("shift mu must be positive")
        if self.alpha <= 1.0:
            raise ValidationError("need alpha > 1 for a finite mean")

    def survival(self, x):
        return (self.mu + x) ** (-self.alpha)

    def density(self, x):
        return self.alpha * (self.mu + x) ** (-self.alpha - 1.0)

    def mean(self):
        return self.mu ** (1.0 - self.alpha) / (self.alpha - 1.0)

    def second_moment(self):
        if self.alpha <= 2.0:
            raise InfiniteMoment(f"second moment infinite for alpha={self.alpha} <= 2")
        return 2.0 * self.mu ** (2.0 - self.alpha) / ((self.alpha - 1.0) * (self.alpha - 2.0))

    def hazard(self, x):
        return self.alpha / (self.mu + x)

    def sample(self, u):
        _check_u(u)
        if self.mu < 1.0:
            raise Unsupported("power law with mu < 1 is evaluation-only (survival exceeds 1 at 0)")
        x = u ** (-1.0 / self.alpha) - self.mu
        return max(0.0, x)

    def describe(self):
        return f"powerlaw:mu={self.mu:.17g},alpha={self.alpha:.17g}"


@lru_cache(maxsize=None)
def _almost_exp_integrals(alpha: float, power: int) -> float:
    dist = AlmostExponential(alpha)
    spec = QuadratureSpec(split_points=(1.0,), tail_initial_width=4.0)
    if power == 1:
        return integrate(dist.survival, 0.0, math.inf, spec)
    return integrate(lambda x: x * dist.survival(x), 0.0, math.inf, spec)


@dataclass(frozen=True)
class AlmostExponential(ServiceDistribution):
    """Survival exp(-x (ln x)^(-alpha)), evaluated literally.

    The formula is singular (value zero, exploding derivatives) at x = 1
    and must be integrated with a split there.  Below x = 1 the factor
    (ln x)^(-alpha) needs an even integer alpha to stay real.  Moments come
    from quadrature; sampling is not offered.
    """

    alpha: float
    samplable = False

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValidationError("exponent alpha must be positive")

    def _exponent_factor(self, x):
        lx = math.log(x)
        if lx > 0.0:
            return lx ** (-self.alpha)
        if self.alpha == int(self.alpha) and int(self.alpha) % 2 == 0:
            return abs(lx) ** (-self.alpha)
        raise Unsupported("below x=1 the survival is real only for even integer alpha")

    def survival(self, x):
        if x <= 0.0:
            return 1.0
        if x == 1.0:
            return 0.0
        return math.exp(-x * self._exponent_factor(x))

    def density(self, x):
        if x <= 0.0 or x == 1.0:
            return 0.0
        lx = math.log(x)
        fac = self._exponent_factor(x)
        return self.survival(x) * fac * (1.0 - self.alpha / lx)

    def mean(self):
        return _almost_exp_integrals(self.alpha, 1)

    def second_moment(self):
        return 2.0 * _almost_exp_integrals(self.alpha, 2)

    def quadrature_spec(self):
        return QuadratureSpec(split_points=(1.0,), tail_initial_width=4.0)

    def sample(self, u):
        raise Unsupported("almost-exponential is evaluation-only")

    def sample_stream(self, draw):
        raise Unsupported("almost-exponential is evaluation-only")

    def describe(self):
        return f"almost-exponential:alpha={self.alpha:.17g}"


@dataclass(frozen=True)
class PhaseTypeService(ServiceDistribution):
    rep: PHRepresentation
    source: str = field(default="", compare=False)

    def survival(self, x):
        return self.rep.survival(x)

    def density(self, x):
        v = expm_action(self.rep.alpha, self.rep.T, x)
        return max(0.0, float(v @ self.rep.T0))

    def mean(self):
        return self.rep.mean

    def second_moment(self):
        return self.rep.second_moment()

    def sample_stream(self, draw):
        alpha, T, T0 = self.rep.alpha, self.rep.T, self.rep.T0
        u = draw()
        _check_u(u)
        phase = _pick_index(alpha, u)
        total = 0.0
        while True:
            rate = -T[phase, phase]
            u = draw()
            _check_u(u)
            total += -math.log(u) / rate
            u = draw()
            _check_u(u)
            # exit with probability T0[phase]/rate, else hop to phase j
            target = u * rate
            acc = T0[phase]
            if target < acc:
                return total
            for j in range(self.rep.order):
                if j == phase:
                    continue
                acc += T[phase, j]
                if target < acc:
                    phase = j
                    break
            else:
                return total  # rounding fell off the end: treat as exit

    def quadrature_spec(self):
        return QuadratureSpec(tail_initial_width=max(1.0, self.mean()))

    def describe(self):
        return self.source or f"ph:order={self.rep.order}"


def _pick_index(probs, u: float) -> int:
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


_FAMILIES = {
    "exponential": ({"mu"}, set()),
    "erlang": ({"m", "eta"}, {"convention"}),
    "weibull": ({"tau", "mu"}, set()),
    "powerlaw": ({"mu", "alpha"}, set()),
    "almost-exponential": ({"alpha"}, set()),
    "ph": ({"file"}, set()),
}


def parse_distribution(text: str) -> ServiceDistribution:
    """Parse 'family:key=value,key=value' strings, e.g. 'weibull:tau=0.5,mu=5'."""
    text = text.strip()
    if ":" not in text:
        raise ValidationError(f"distribution spec needs 'family:params', got {text!r}")
    family, _, params = text.partition(":")
    family = family.strip().lower()
    if family not in _FAMILIES:
        raise ValidationError(f"unknown family {family!r}; choose from {sorted(_FAMILIES)}")
    required, optional = _FAMILIES[family]
    kv: dict[str, str] = {}
    for item in params.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ValidationError(f"malformed parameter {item!r} (expected key=value)")
        key, _, value = item.partition("=")
        key = key.strip()
        if key in kv:
            raise ValidationError(f"duplicate parameter {key!r}")
        kv[key] = value.strip()
    missing = required - kv.keys()
    extra = kv.keys() - required - optional
    if missing:
        raise ValidationError(f"{family} is missing parameters {sorted(missing)}")
    if extra:
        raise ValidationError(f"{family} got unknown parameters {sorted(extra)}")

    def fnum(key):
        try:
            return float(kv[key])
        except ValueError as exc:
            raise ValidationError(f"parameter {key}={kv[key]!r} is not a number") from exc

    if family == "exponential":
        return Exponential(mu=fnum("mu"))
    if family == "erlang":
        try:
            m = int(kv["m"])
        except ValueError as exc:
            raise ValidationError(f"m={kv['m']!r} is not an integer") from exc
        return Erlang(m=m, eta=fnum("eta"), convention=kv.get("convention", "standard"))
    if family == "weibull":
        return Weibull(tau=fnum("tau"), mu=fnum("mu"))
    if family == "powerlaw":
        return PowerLaw(mu=fnum("mu"), alpha=fnum("alpha"))
    if family == "almost-exponential":
        return AlmostExponential(alpha=fnum("alpha"))
    return PhaseTypeService(rep=load_ph(kv["file"]), source=text)
