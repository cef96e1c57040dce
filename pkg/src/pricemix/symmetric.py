"""Closed-form symmetric equilibrium for identical sellers."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from pricemix.errors import InvalidConfigError, NumericalError
from pricemix.market import AvailabilityDistribution, MarketConfig, RandomDemand
from pricemix.payoff import full_sale, undercut_loss
from pricemix.strategy import CdfSegment, LevelStrategy, PriceStrategy, StrategyProfile

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AggregatedAvailability:
    """Availability with the mass of levels >= d pooled at level d.

    Levels at or above d earn the same utility, so only their pooled
    strategy is identified; every pooled level reuses it.
    """

    original: AvailabilityDistribution
    effective: AvailabilityDistribution
    d: int

    @property
    def m(self) -> int:
        return self.effective.m


def aggregate_for_small_demand(avail: AvailabilityDistribution, d: int) -> AggregatedAvailability:
    """Pool availability mass above the demand.

    Raises:
        InvalidConfigError: If d < 1, or d >= m so there is nothing to pool
    """
    if d < 1:
        raise InvalidConfigError(f"demand must be >= 1, got {d}")
    if d >= avail.m:
        raise InvalidConfigError(f"demand {d} covers availability {avail.m}; nothing to pool")
    return AggregatedAvailability(original=avail, effective=avail.pooled(d), d=d)


@dataclass(frozen=True)
class SymmetricNE:
    """Symmetric equilibrium: levels up to the threshold price at v, the rest mix.

    `segments` holds one CDF per mixing level, threshold+1 first, each sitting
    directly below the previous one. A level that is never drawn has no
    segment (None) and sits at the boundary above it.
    """

    config: MarketConfig
    threshold: int
    segments: tuple[CdfSegment | None, ...]
    utilities: tuple[float, ...]
    aggregation: AggregatedAvailability | None = None

    @property
    def lows(self) -> tuple[float, ...]:
        """Lowest price of each mixing level, threshold+1 first."""
        out = []
        top = self.config.v
        for seg in self.segments:
            top = top if seg is None else seg.lo
            out.append(top)
        return tuple(out)

    @property
    def boundaries(self) -> tuple[float, ...]:
        """Support boundaries in increasing order, ending at v."""
        return tuple(sorted({*self.lows, self.config.v}))

    @property
    def p_tilde(self) -> float:
        return self.lows[-1] if self.segments else self.config.v

    @property
    def expected_profit(self) -> float:
        """Expected profit of one seller before its availability is drawn."""
        probs = self.config.seller(1).probs[1:]
        return float(np.dot(probs, self.utilities))

    def level_strategy(self, i: int) -> LevelStrategy:
        if i <= self.threshold:
            return LevelStrategy.at_price(self.config.v)
        index = min(i, self.threshold + len(self.segments)) - self.threshold - 1
        seg = self.segments[index]
        if seg is None:
            return LevelStrategy.at_price(self.lows[index])
        return LevelStrategy(pieces=(seg,))

    def strategy(self) -> PriceStrategy:
        m = self.config.m(1)
        return PriceStrategy(tuple(self.level_strategy(i) for i in range(1, m + 1)))

    def profile(self) -> StrategyProfile:
        strategy = self.strategy()
        return StrategyProfile(
            strategies=(strategy, strategy),
            thresholds=(self.threshold, self.threshold),
            p_tilde=self.p_tilde,
        )


def _mixing_segments(
    cfg: MarketConfig, threshold: int
) -> tuple[list[CdfSegment | None], list[float]]:
    """Build segments for levels threshold+1..m, each below the previous one.

    A level with zero probability puts no mass against the opponent, so its
    interval has zero width; it is priced at the boundary above.
    """
    avail = cfg.seller(1)
    segments: list[CdfSegment | None] = []
    utilities: list[float] = []
    top = cfg.v
    for i in range(threshold + 1, avail.m + 1):
        alpha = full_sale(cfg, i) - sum(
            avail.prob(g) * undercut_loss(cfg, i, g) for g in range(i + 1, avail.m + 1)
        )
        if avail.prob(i) == 0.0:
            segments.append(None)
            utilities.append((top - cfg.c) * alpha)
            logger.debug("level %d is never drawn; priced at %.6f", i, top)
            continue
        gamma = avail.prob(i) * undercut_loss(cfg, i, i)
        if gamma <= 0.0:
            raise NumericalError(f"level {i} has no competitive weight (q={avail.prob(i)})")
        if alpha - gamma <= 0.0:
            raise NumericalError(f"level {i} margin term is not positive", residual=alpha - gamma)

        utility = (top - cfg.c) * (alpha - gamma)
        low = cfg.c + utility / alpha
        segments.append(CdfSegment(lo=low, hi=top, alpha=alpha, beta=utility, gamma=gamma, c=cfg.c))
        utilities.append(utility)
        logger.debug("level %d: support [%.6f, %.6f], utility %.6f", i, low, top, utility)
        top = low
    return segments, utilities


def _monopoly(cfg: MarketConfig) -> SymmetricNE:
    m = cfg.m(1)
    return SymmetricNE(
        config=cfg,
        threshold=m,
        segments=(),
        utilities=tuple(full_sale(cfg, i) * cfg.scale for i in range(1, m + 1)),
    )


def solve_symmetric(cfg: MarketConfig) -> SymmetricNE:
    """Solve the symmetric equilibrium of a market with identical sellers.

    Levels above the largest one ever drawn are dropped and demand below the
    availability is handled by pooling the top levels; both reuse the last
    solved level's strategy. Random demand uses its smallest positive atom
    for the structure.

    Raises:
        InvalidConfigError: Sellers differ, or random demand needs pooling
        NumericalError: A mixing level's margin term is not positive
    """
    if not cfg.is_symmetric:
        raise InvalidConfigError("sellers have different availability; use solve-asym")
    if cfg.is_monopoly:
        logger.info("no competition: m1 + m2 <= %d, all levels at v", cfg.d)
        return _monopoly(cfg)

    aggregation = None
    work = cfg.trimmed()
    if work is not cfg:
        logger.info("availability above level %d is never drawn", work.m(1))
    if work.needs_aggregation:
        aggregation = aggregate_for_small_demand(work.seller(1), cfg.d)
        work = work.pooled()
        logger.info("pooled availability above d=%d", cfg.d)

    threshold = work.d // 2
    segments, mixing_utilities = _mixing_segments(work, threshold)

    # At v every mixing opponent level is below and ties at v ration nothing.
    avail = work.seller(1)
    mixing = range(threshold + 1, avail.m + 1)
    utilities = [
        work.scale
        * (full_sale(work, i) - sum(avail.prob(g) * undercut_loss(work, i, g) for g in mixing))
        for i in range(1, threshold + 1)
    ]
    utilities += mixing_utilities
    utilities += [utilities[-1]] * (cfg.m(1) - work.m(1))

    ne = SymmetricNE(
        config=cfg,
        threshold=threshold,
        segments=tuple(segments),
        utilities=tuple(utilities),
        aggregation=aggregation,
    )
    logger.info("symmetric equilibrium: threshold %d, p_tilde %.6f", threshold, ne.p_tilde)
    return ne


def solve_symmetric_random_demand(cfg: MarketConfig) -> SymmetricNE:
    """Symmetric equilibrium under random demand.

    The equal-utility coefficients are demand-weighted but independent of the
    price, so each level keeps the closed-form segment.
    """
    if not isinstance(cfg.demand, RandomDemand):
        raise InvalidConfigError("random-demand solver needs demand_weights")
    return solve_symmetric(cfg)
