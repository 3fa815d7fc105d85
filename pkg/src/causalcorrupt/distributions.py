"""Parameter distributions usable as exogenous noise in mechanisms.

All sampling is driven by an explicit numpy Generator so draws are
reproducible from derived seeds. Invalid parameters are rejected at
construction; sampling never fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDistributionError

_WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class Uniform:
    """Continuous uniform on [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise InvalidDistributionError(f"uniform bounds must be finite, got ({self.lo}, {self.hi})")
        if self.lo > self.hi:
            raise InvalidDistributionError(f"uniform requires lo <= hi, got ({self.lo}, {self.hi})")

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.lo, self.hi))

    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class HalfNormal:
    """|z| where z ~ Normal(0, scale^2). Mean is scale * sqrt(2/pi)."""

    scale: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.scale) and self.scale >= 0):
            raise InvalidDistributionError(f"halfnormal scale must be >= 0, got {self.scale}")

    def sample(self, rng: np.random.Generator) -> float:
        return abs(float(rng.normal(0.0, self.scale)))

    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def mean(self) -> float:
        return self.scale * math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class Normal:
    mean_: float
    sd: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean_) and math.isfinite(self.sd)):
            raise InvalidDistributionError(f"normal parameters must be finite, got ({self.mean_}, {self.sd})")
        if self.sd < 0:
            raise InvalidDistributionError(f"normal sd must be >= 0, got {self.sd}")

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.normal(self.mean_, self.sd))

    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def mean(self) -> float:
        return self.mean_


@dataclass(frozen=True)
class DiscreteUniform:
    """Equal-probability draw from a finite ordered set of reals."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) == 0:
            raise InvalidDistributionError("discrete uniform requires at least one value")
        if any(not math.isfinite(v) for v in self.values):
            raise InvalidDistributionError("discrete uniform values must be finite")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def sample(self, rng: np.random.Generator) -> float:
        return self.values[int(rng.integers(0, len(self.values)))]

    def support(self) -> tuple[float, float]:
        return (min(self.values), max(self.values))

    def mean(self) -> float:
        return sum(self.values) / len(self.values)


@dataclass(frozen=True)
class PointMass:
    """Degenerate distribution. Sampling returns value without consuming randomness."""

    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise InvalidDistributionError(f"point mass must be finite, got {self.value}")

    def sample(self, rng: np.random.Generator) -> float:
        return self.value

    def support(self) -> tuple[float, float]:
        return (self.value, self.value)

    def mean(self) -> float:
        return self.value


@dataclass(frozen=True)
class Mixture:
    """Weighted mixture of component distributions.

    Weights must be nonnegative and sum to 1 within 1e-9.
    """

    components: tuple[tuple[float, "Distribution"], ...] = field()

    def __post_init__(self) -> None:
        comps = tuple((float(w), d) for w, d in self.components)
        if len(comps) == 0:
            raise InvalidDistributionError("mixture requires at least one component")
        if any(w < 0 for w, _ in comps):
            raise InvalidDistributionError("mixture weights must be nonnegative")
        total = sum(w for w, _ in comps)
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise InvalidDistributionError(f"mixture weights must sum to 1 within {_WEIGHT_TOL}, got {total!r}")
        object.__setattr__(self, "components", comps)

    def sample(self, rng: np.random.Generator) -> float:
        u = float(rng.random())
        acc = 0.0
        for weight, dist in self.components:
            acc += weight
            if u < acc:
                return dist.sample(rng)
        # Weight rounding can leave u just above the accumulated total.
        return self.components[-1][1].sample(rng)

    def support(self) -> tuple[float, float]:
        los, his = zip(*(d.support() for _, d in self.components))
        return (min(los), max(his))

    def mean(self) -> float:
        return sum(w * d.mean() for w, d in self.components)


Distribution = Uniform | HalfNormal | Normal | DiscreteUniform | PointMass | Mixture


def sample_dist(dist: Distribution, rng: np.random.Generator) -> float:
    """Draw one value from dist using rng."""
    return dist.sample(rng)
