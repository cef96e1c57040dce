"""Symmetric n-seller heuristic and its best-response gap.

Every seller uses the duopoly structure: levels up to floor(d/n) price at
v and the remaining levels mix on ordered, disjoint intervals below v. For
more than two sellers the equal-utility condition is a polynomial in the
level CDF, so the CDFs are tabulated numerically.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize

from pricemix.errors import EnumerationLimitError, InvalidConfigError
from pricemix.market import AvailabilityDistribution, MarketConfig
from pricemix.strategy import GridSegment, LevelStrategy, PriceStrategy
from pricemix.verification import CAP_EPSILON, MIN_GRID, support_points

logger = logging.getLogger(__name__)

ENUMERATION_CAP = 10_000_000
CDF_XTOL = 1e-12


@dataclass(frozen=True)
class OligopolyConfig:
    """n identical sellers facing a deterministic demand of d units."""

    n: int
    availability: AvailabilityDistribution
    d: int
    v: float
    c: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "v", float(self.v))
        object.__setattr__(self, "c", float(self.c))
        if int(self.n) != self.n or self.n < 2:
            raise InvalidConfigError(f"an oligopoly needs n >= 2 sellers, got {self.n}")
        if int(self.d) != self.d or self.d < 1:
            raise InvalidConfigError(f"demand must be an integer >= 1, got {self.d}")
        if self.c < 0.0 or self.v <= self.c:
            raise InvalidConfigError(f"need v > c >= 0, got v={self.v}, c={self.c}")
        if self.availability.is_deterministic:
            raise InvalidConfigError("sellers must have uncertain availability")

    @classmethod
    def with_default_demand(
        cls, n: int, availability: AvailabilityDistribution, v: float, c: float
    ) -> OligopolyConfig:
        """Use d = max(n, m)."""
        return cls(n=n, availability=availability, d=max(n, availability.m), v=v, c=c)

    @property
    def m(self) -> int:
        return self.availability.m

    @property
    def scale(self) -> float:
        return self.v - self.c

    @property
    def threshold(self) -> int:
        return self.d // self.n

    @property
    def is_monopoly(self) -> bool:
        return self.n * self.m <= self.d

    @property
    def enumeration_size(self) -> int:
        return (self.m + 1) ** (self.n - 1)

    def duopoly(self) -> MarketConfig:
        """The equivalent two-seller market; only defined for n = 2."""
        if self.n != 2:
            raise InvalidConfigError(f"market with {self.n} sellers is not a duopoly")
        return MarketConfig.symmetric(self.d, self.v, self.c, self.availability)


@dataclass(frozen=True)
class OligopolyProfile:
    """Heuristic strategy shared by all sellers."""

    config: OligopolyConfig
    threshold: int
    strategy: PriceStrategy
    utilities: tuple[float, ...]

    @property
    def p_tilde(self) -> float:
        return self.strategy.levels[-1].lo

    @property
    def expected_profit(self) -> float:
        return float(np.dot(self.config.availability.probs[1:], self.utilities))


@dataclass(frozen=True)
class OligopolyGap:
    """Best response of one deviating seller at one availability level."""

    level: int
    proposed_utility: float
    best_response_utility: float
    best_response_price: float

    @property
    def relative_difference(self) -> float:
        gap = self.best_response_utility - self.proposed_utility
        if self.proposed_utility <= 0.0:
            return 0.0 if gap <= 0.0 else float("inf")
        return gap / self.proposed_utility


def _check_cap(ocfg: OligopolyConfig, cap: int) -> None:
    if ocfg.enumeration_size > cap:
        raise EnumerationLimitError(
            f"{ocfg.n - 1} opponents with {ocfg.m + 1} availability levels give "
            f"{ocfg.enumeration_size} combinations, cap is {cap}"
        )


def _sale_table(units: int, d: int, size: int) -> NDArray[np.float64]:
    """Expected units sold for S units strictly below and T units tied."""
    s = np.arange(size)[:, None]
    t = np.arange(size)[None, :]
    residual = np.maximum(d - s, 0)
    return np.where(units + t <= residual, float(units), units * residual / (units + t))


def opponent_state_pmf(
    ocfg: OligopolyConfig,
    x: NDArray[np.float64],
    strategy: PriceStrategy,
    limit: str = "exact",
) -> NDArray[np.float64]:
    """Joint pmf of (units priced below x, units tied at x) over the n - 1 opponents.

    Opponents are independent, so the joint law is the (n-1)-fold convolution
    of one opponent's law. Shape (len(x), S, T).
    """
    avail = ocfg.availability
    size = (ocfg.n - 1) * ocfg.m + 1
    below = np.zeros((x.size, ocfg.m + 1))
    tied = np.zeros((x.size, ocfg.m + 1))
    for a in range(1, ocfg.m + 1):
        level = strategy.level(a)
        below[:, a] = avail.probs[a] * level.cdf_left(x)
        if limit == "exact" and level.atom > 0.0:
            tied[:, a] = avail.probs[a] * level.atom * (x == level.atom_price)
    above = 1.0 - below.sum(axis=1) - tied.sum(axis=1)

    pmf = np.zeros((x.size, size, size))
    pmf[:, 0, 0] = 1.0
    for _ in range(ocfg.n - 1):
        nxt = above[:, None, None] * pmf
        for a in range(1, ocfg.m + 1):
            nxt[:, a:, :] += below[:, a, None, None] * pmf[:, :-a, :]
            nxt[:, :, a:] += tied[:, a, None, None] * pmf[:, :, :-a]
        pmf = nxt
    return pmf


def expected_units_sold_n(
    ocfg: OligopolyConfig,
    units: int,
    x: ArrayLike,
    strategy: PriceStrategy,
    limit: str = "exact",
    cap: int = ENUMERATION_CAP,
) -> NDArray[np.float64] | float:
    """Expected units sold by one seller at price(s) x against n - 1 opponents.

    A seller facing S cheaper units and T tied units gets the residual
    demand R = (d - S)^+, shared proportionally with the tied units.

    Raises:
        EnumerationLimitError: (m+1)^(n-1) exceeds cap
    """
    _check_cap(ocfg, cap)
    if not 1 <= units <= ocfg.m:
        raise ValueError(f"availability {units} outside 1..{ocfg.m}")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > ocfg.v):
        raise ValueError(f"prices must lie in [0, {ocfg.v}]")
    flat = np.atleast_1d(arr).ravel()
    pmf = opponent_state_pmf(ocfg, flat, strategy, limit)
    table = _sale_table(units, ocfg.d, pmf.shape[1])
    sold = np.einsum("xst,st->x", pmf, table)
    return float(sold[0]) if arr.ndim == 0 else sold.reshape(arr.shape)


def expected_utility_n(
    ocfg: OligopolyConfig,
    units: int,
    x: ArrayLike,
    strategy: PriceStrategy,
    limit: str = "exact",
    cap: int = ENUMERATION_CAP,
) -> NDArray[np.float64] | float:
    arr = np.asarray(x, dtype=float)
    sold = np.asarray(expected_units_sold_n(ocfg, units, arr, strategy, limit, cap))
    out = (arr - ocfg.c) * sold
    return float(out) if arr.ndim == 0 else out


def _level_sale(ocfg: OligopolyConfig, level: int, phi: float) -> float:
    """Expected sale of `level` units when same-level opponents are below with probability phi."""
    probs = ocfg.availability.probs
    one = np.zeros(ocfg.m + 1)
    one[level + 1 :] = probs[level + 1 :]
    one[level] = probs[level] * phi
    one[0] = 1.0 - one[1:].sum()
    dist = np.array([1.0])
    for _ in range(ocfg.n - 1):
        dist = np.convolve(dist, one)
    s = np.arange(dist.size)
    return float(np.dot(dist, np.minimum(level, np.maximum(ocfg.d - s, 0))))


def _level_cdf(
    ocfg: OligopolyConfig, level: int, lo: float, hi: float, utility: float, points: int
) -> GridSegment:
    xs = np.linspace(lo, hi, points)
    ps = np.empty(points)
    ps[0], ps[-1] = 0.0, 1.0
    for j in range(1, points - 1):
        margin = xs[j] - ocfg.c

        def excess(phi: float, margin: float = margin) -> float:
            return margin * _level_sale(ocfg, level, phi) - utility

        f0, f1 = excess(0.0), excess(1.0)
        if f0 <= 0.0:
            ps[j] = 0.0
        elif f1 >= 0.0:
            ps[j] = 1.0
        else:
            ps[j] = optimize.brentq(excess, 0.0, 1.0, xtol=CDF_XTOL)
    return GridSegment(xs=tuple(xs), ps=tuple(np.maximum.accumulate(ps)), c=ocfg.c)


def _monopoly(ocfg: OligopolyConfig) -> OligopolyProfile:
    return OligopolyProfile(
        config=ocfg,
        threshold=ocfg.m,
        strategy=PriceStrategy.all_at(ocfg.v, ocfg.m),
        utilities=tuple(ocfg.scale * i for i in range(1, ocfg.m + 1)),
    )


def build_heuristic(ocfg: OligopolyConfig, cdf_points: int = 513) -> OligopolyProfile:
    """Build the symmetric heuristic profile.

    Args:
        ocfg: Oligopoly configuration with d >= m
        cdf_points: Grid points per mixing level CDF

    Raises:
        InvalidConfigError: d < m
    """
    if ocfg.is_monopoly:
        logger.info("no competition: n*m = %d <= d = %d", ocfg.n * ocfg.m, ocfg.d)
        return _monopoly(ocfg)
    if ocfg.d < ocfg.m:
        raise InvalidConfigError(f"heuristic needs d >= m, got d={ocfg.d}, m={ocfg.m}")

    threshold = ocfg.threshold
    levels = [LevelStrategy.at_price(ocfg.v) for _ in range(threshold)]
    mixing_utilities = []
    top = ocfg.v
    for i in range(threshold + 1, ocfg.m + 1):
        utility = (top - ocfg.c) * _level_sale(ocfg, i, 1.0)
        low = ocfg.c + utility / _level_sale(ocfg, i, 0.0)
        levels.append(LevelStrategy(pieces=(_level_cdf(ocfg, i, low, top, utility, cdf_points),)))
        mixing_utilities.append(utility)
        logger.debug("n=%d level %d: support [%.6f, %.6f]", ocfg.n, i, low, top)
        top = low

    strategy = PriceStrategy(tuple(levels))
    capped = [
        float(expected_utility_n(ocfg, i, ocfg.v, strategy, limit="left"))
        for i in range(1, threshold + 1)
    ]
    return OligopolyProfile(
        config=ocfg,
        threshold=threshold,
        strategy=strategy,
        utilities=tuple(capped + mixing_utilities),
    )


def _payoff(
    ocfg: OligopolyConfig,
    units: int,
    x: NDArray[np.float64],
    strategy: PriceStrategy,
    cap: int,
) -> NDArray[np.float64]:
    values = np.array(expected_utility_n(ocfg, units, x, strategy, cap=cap), dtype=float)
    at_cap = x >= ocfg.v
    if at_cap.any():
        values[at_cap] = expected_utility_n(ocfg, units, x[at_cap], strategy, limit="left", cap=cap)
    return values


def heuristic_gap(
    ocfg: OligopolyConfig,
    profile: OligopolyProfile,
    grid_size: int = 10_000,
    cap: int = ENUMERATION_CAP,
) -> list[OligopolyGap]:
    """Relative best-response improvement per level for one deviating seller.

    Utilities are compared the way `certify` compares them: the proposed
    utility is the worst value over the level's support, a price of v is
    valued by its left limit.

    Raises:
        ValueError: grid_size below 1000
        EnumerationLimitError: (m+1)^(n-1) exceeds cap
    """
    if grid_size < MIN_GRID:
        raise ValueError(f"grid_size must be at least {MIN_GRID}, got {grid_size}")
    _check_cap(ocfg, cap)
    grid = ocfg.c + ocfg.scale * np.arange(grid_size + 1) / grid_size
    extra = [*profile.strategy.breakpoints(), ocfg.v - ocfg.scale * CAP_EPSILON, ocfg.v]
    candidates = np.unique(np.clip(np.concatenate([grid, extra]), 0.0, ocfg.v))

    gaps = []
    for i in range(1, ocfg.m + 1):
        values = _payoff(ocfg, i, candidates, profile.strategy, cap)
        best = int(np.argmax(values))
        own_points = support_points(profile.strategy.level(i), grid)
        own = float(np.min(_payoff(ocfg, i, own_points, profile.strategy, cap)))
        gaps.append(
            OligopolyGap(
                level=i,
                proposed_utility=own,
                best_response_utility=float(values[best]),
                best_response_price=float(candidates[best]),
            )
        )
    logger.info(
        "n=%d: max relative difference %.3e", ocfg.n, max(g.relative_difference for g in gaps)
    )
    return gaps
