"""Market configuration: availability, demand and price bounds."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import stats

from pricemix.errors import InvalidConfigError

PROB_TOL = 1e-12

SELLERS = (1, 2)


def opponent(k: int) -> int:
    """Return the id of the other seller."""
    if k not in SELLERS:
        raise ValueError(f"seller id must be 1 or 2, got {k}")
    return 3 - k


@dataclass(frozen=True)
class AvailabilityDistribution:
    """Probability of each availability level 0..m for one seller."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)

        if len(probs) < 2:
            raise InvalidConfigError("availability needs levels 0..m with m >= 1")
        if any(not np.isfinite(p) or p < 0.0 or p > 1.0 for p in probs):
            raise InvalidConfigError(f"availability probabilities must lie in [0, 1]: {probs}")
        if abs(sum(probs) - 1.0) > PROB_TOL:
            raise InvalidConfigError(f"availability probabilities sum to {sum(probs)!r}, not 1")
        if probs[0] <= 0.0:
            raise InvalidConfigError("zero availability must have positive probability")

    @classmethod
    def binomial(cls, m: int, r: float) -> AvailabilityDistribution:
        """Binomial availability: m units, each available with probability r."""
        pmf = stats.binom.pmf(np.arange(m + 1), m, r)
        return cls(tuple(pmf / pmf.sum()))

    @classmethod
    def uniform(cls, m: int) -> AvailabilityDistribution:
        return cls(tuple([1.0 / (m + 1)] * (m + 1)))

    @property
    def m(self) -> int:
        """Maximum availability."""
        return len(self.probs) - 1

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(self.m + 1), self.probs))

    @property
    def is_deterministic(self) -> bool:
        return any(p == 1.0 for p in self.probs)

    def prob(self, level: int) -> float:
        """Probability of availability `level` (zero outside 0..m)."""
        if 0 <= level <= self.m:
            return self.probs[level]
        return 0.0

    @property
    def top(self) -> int:
        """Largest level drawn with positive probability."""
        return max(i for i, p in enumerate(self.probs) if p > 0.0)

    def trimmed(self) -> AvailabilityDistribution:
        """Drop levels above the largest one drawn, keeping at least 0..1."""
        keep = max(self.top, 1)
        if keep == self.m:
            return self
        return AvailabilityDistribution(self.probs[: keep + 1])

    def pooled(self, d: int) -> AvailabilityDistribution:
        """Pool the mass of levels >= d at level d."""
        if d >= self.m:
            return self
        head = self.probs[:d]
        return AvailabilityDistribution((*head, float(sum(self.probs[d:]))))

    def is_close(self, other: AvailabilityDistribution, tol: float = PROB_TOL) -> bool:
        return self.m == other.m and all(
            abs(a - b) <= tol for a, b in zip(self.probs, other.probs, strict=True)
        )


@dataclass(frozen=True)
class DeterministicDemand:
    """Demand of exactly d units per round."""

    d: int

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 1:
            raise InvalidConfigError(f"demand must be an integer >= 1, got {self.d}")
        object.__setattr__(self, "d", int(self.d))

    @property
    def atoms(self) -> tuple[tuple[int, float], ...]:
        return ((self.d, 1.0),)

    @property
    def floor(self) -> int:
        return self.d

    @property
    def mean(self) -> float:
        return float(self.d)


@dataclass(frozen=True)
class RandomDemand:
    """Demand drawn from a finite distribution {d: r_d}."""

    weights: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        items = self.weights.items() if isinstance(self.weights, dict) else self.weights
        weights = tuple(sorted((int(d), float(r)) for d, r in items))
        object.__setattr__(self, "weights", weights)

        if not weights:
            raise InvalidConfigError("random demand needs at least one atom")
        if len({d for d, _ in weights}) != len(weights):
            raise InvalidConfigError("random demand lists a demand value twice")
        if any(d < 0 for d, _ in weights):
            raise InvalidConfigError("demand values must be >= 0")
        if any(r < 0.0 or r > 1.0 for _, r in weights):
            raise InvalidConfigError("demand probabilities must lie in [0, 1]")
        if abs(sum(r for _, r in weights) - 1.0) > PROB_TOL:
            raise InvalidConfigError("demand probabilities must sum to 1")
        if not any(d > 0 and r > 0.0 for d, r in weights):
            raise InvalidConfigError("random demand needs a positive demand atom")

    @property
    def atoms(self) -> tuple[tuple[int, float], ...]:
        return tuple((d, r) for d, r in self.weights if r > 0.0)

    @property
    def floor(self) -> int:
        """Smallest positive demand with positive probability."""
        return min(d for d, r in self.weights if d > 0 and r > 0.0)

    @property
    def mean(self) -> float:
        return float(sum(d * r for d, r in self.weights))


DemandModel = Union[DeterministicDemand, RandomDemand]


@dataclass(frozen=True)
class MarketConfig:
    """A two-seller market with a price cap and a per-unit transaction cost."""

    demand: DemandModel
    v: float
    c: float
    sellers: tuple[AvailabilityDistribution, AvailabilityDistribution] = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "v", float(self.v))
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "sellers", tuple(self.sellers))

        if len(self.sellers) != 2:
            raise InvalidConfigError("a market has exactly two sellers")
        if not (np.isfinite(self.v) and np.isfinite(self.c)):
            raise InvalidConfigError("v and c must be finite")
        if self.c < 0.0:
            raise InvalidConfigError(f"cost must be >= 0, got {self.c}")
        if self.v <= self.c:
            raise InvalidConfigError(f"price cap v={self.v} must exceed cost c={self.c}")
        if all(s.is_deterministic for s in self.sellers):
            raise InvalidConfigError("at least one seller must have uncertain availability")

    @classmethod
    def symmetric(
        cls, demand: DemandModel | int, v: float, c: float, availability: AvailabilityDistribution
    ) -> MarketConfig:
        if isinstance(demand, int):
            demand = DeterministicDemand(demand)
        return cls(demand=demand, v=v, c=c, sellers=(availability, availability))

    @property
    def d(self) -> int:
        """Demand used for the equilibrium structure (d̲ for random demand)."""
        return self.demand.floor

    @property
    def scale(self) -> float:
        """Margin at the cap, v - c."""
        return self.v - self.c

    @property
    def is_random_demand(self) -> bool:
        return isinstance(self.demand, RandomDemand)

    def seller(self, k: int) -> AvailabilityDistribution:
        opponent(k)
        return self.sellers[k - 1]

    def m(self, k: int) -> int:
        return self.seller(k).m

    @property
    def max_m(self) -> int:
        return max(s.m for s in self.sellers)

    def e(self, k: int) -> int:
        """Guaranteed-sale level (d - m_opponent)^+."""
        return max(self.d - self.m(opponent(k)), 0)

    @property
    def is_monopoly(self) -> bool:
        """Total availability never exceeds demand, so nobody competes."""
        return self.sellers[0].top + self.sellers[1].top <= self.d

    @property
    def is_symmetric(self) -> bool:
        return self.sellers[0].is_close(self.sellers[1])

    @property
    def needs_aggregation(self) -> bool:
        return self.d < self.max_m

    def pooled(self) -> MarketConfig:
        """The market with both sellers' availability pooled at level d."""
        if not self.needs_aggregation:
            return self
        if self.is_random_demand:
            raise InvalidConfigError(
                "random demand below the maximum availability cannot be pooled"
            )
        return MarketConfig(
            demand=self.demand,
            v=self.v,
            c=self.c,
            sellers=(self.sellers[0].pooled(self.d), self.sellers[1].pooled(self.d)),
        )

    def trimmed(self) -> MarketConfig:
        """The market without availability levels that are never drawn at the top."""
        sellers = (self.sellers[0].trimmed(), self.sellers[1].trimmed())
        if sellers == self.sellers:
            return self
        return MarketConfig(demand=self.demand, v=self.v, c=self.c, sellers=sellers)

    def effective(self) -> MarketConfig:
        """The market the equilibrium structure is solved on: trimmed, then pooled."""
        return self.trimmed().pooled()

    def swapped(self) -> MarketConfig:
        """The same market with the seller labels exchanged."""
        return MarketConfig(
            demand=self.demand, v=self.v, c=self.c, sellers=(self.sellers[1], self.sellers[0])
        )
