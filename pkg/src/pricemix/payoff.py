"""Exact evaluators for expected units sold, expected utility and the utility gap A.

A seller with u units at price x sells min(u, d) when the opponent prices
above x, min(u, (d - g)^+) when an opponent with g units undercuts, and the
proportional share u*d/(u + g) of a rationed tie. Random demand averages over
the demand atoms.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pricemix.market import MarketConfig, opponent
from pricemix.strategy import PriceStrategy

Limit = Literal["exact", "left"]


def tie_share(own: int, other: int, d: int) -> float:
    """Units sold by a seller offering `own` when tied with one offering `other`."""
    if own + other <= d:
        return float(own)
    return own * d / (own + other)


@lru_cache(maxsize=4096)
def full_sale(cfg: MarketConfig, level: int) -> float:
    """Expected units sold when every competing unit is priced above."""
    return sum(r * min(level, d) for d, r in cfg.demand.atoms)


@lru_cache(maxsize=4096)
def undercut_loss(cfg: MarketConfig, level: int, g: int) -> float:
    """Expected units lost when an opponent with g units prices below."""
    return sum(r * (min(level, d) - min(level, max(d - g, 0))) for d, r in cfg.demand.atoms)


@lru_cache(maxsize=4096)
def tie_loss(cfg: MarketConfig, level: int, g: int) -> float:
    """Expected units lost when an opponent with g units ties at the same price."""
    return sum(r * (min(level, d) - tie_share(level, g, d)) for d, r in cfg.demand.atoms)


def _check_args(
    cfg: MarketConfig, k: int, units: int, x: NDArray[np.float64], opp: PriceStrategy
) -> None:
    if not 1 <= units <= cfg.m(k):
        raise ValueError(f"availability {units} outside 1..{cfg.m(k)} for seller {k}")
    if opp.m != cfg.m(opponent(k)):
        raise ValueError(
            f"opponent strategy covers {opp.m} levels, market has {cfg.m(opponent(k))}"
        )
    if np.any(x < 0.0) or np.any(x > cfg.v):
        raise ValueError(f"prices must lie in [0, {cfg.v}]")


def _finish(out: NDArray[np.float64], x: NDArray[np.float64]) -> NDArray[np.float64] | float:
    return float(out) if x.ndim == 0 else out


def expected_units_sold(
    cfg: MarketConfig,
    k: int,
    units: int,
    x: ArrayLike,
    opponent_strategy: PriceStrategy,
    limit: Limit = "exact",
) -> NDArray[np.float64] | float:
    """Expected units sold by seller k offering `units` at price(s) x.

    Args:
        cfg: Market configuration
        k: Seller id (1 or 2)
        units: Own availability, 1..m_k
        x: Price or array of prices in [0, v]
        opponent_strategy: The other seller's strategy
        limit: "exact" splits ties at opponent atoms proportionally;
            "left" evaluates the limit from below, where atoms at x are above

    Returns:
        A float for scalar x, otherwise an array shaped like x
    """
    x = np.asarray(x, dtype=float)
    _check_args(cfg, k, units, x, opponent_strategy)
    avail = cfg.seller(opponent(k))

    lost = np.zeros(x.shape)
    for g in range(1, avail.m + 1):
        q = avail.probs[g]
        if q == 0.0:
            continue
        level = opponent_strategy.level(g)
        loss = undercut_loss(cfg, units, g)
        if loss != 0.0:
            lost = lost + q * loss * level.cdf_left(x)
        if limit == "exact" and level.atom > 0.0:
            tied = tie_loss(cfg, units, g)
            if tied != 0.0:
                lost = lost + q * tied * level.atom * (x == level.atom_price)
    return _finish(full_sale(cfg, units) - lost, x)


def expected_utility(
    cfg: MarketConfig,
    k: int,
    units: int,
    x: ArrayLike,
    opponent_strategy: PriceStrategy,
    limit: Limit = "exact",
) -> NDArray[np.float64] | float:
    """Expected utility (x - c) * B(x)."""
    x = np.asarray(x, dtype=float)
    sold = np.asarray(expected_units_sold(cfg, k, units, x, opponent_strategy, limit))
    return _finish((x - cfg.c) * sold, x)


def utility_gap(
    cfg: MarketConfig,
    k: int,
    high: int,
    low: int,
    x: ArrayLike,
    opponent_strategy: PriceStrategy,
    limit: Limit = "exact",
) -> NDArray[np.float64] | float:
    """Per-unit utility difference A(x) = (x - c) * (B_high(x)/high - B_low(x)/low).

    Raises:
        ValueError: unless 1 <= low < high
    """
    if not 1 <= low < high:
        raise ValueError(f"utility gap needs 1 <= low < high, got high={high}, low={low}")
    x = np.asarray(x, dtype=float)
    b_high = np.asarray(expected_units_sold(cfg, k, high, x, opponent_strategy, limit))
    b_low = np.asarray(expected_units_sold(cfg, k, low, x, opponent_strategy, limit))
    return _finish((x - cfg.c) * (b_high / high - b_low / low), x)
