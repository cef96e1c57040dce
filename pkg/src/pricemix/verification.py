"""Independent checks of equilibrium profiles.

`certify` searches for a profitable unilateral deviation on a price grid
augmented with every support breakpoint, v and a point just below v.
`check_equilibrium_structure` tests the structural properties every
equilibrium must have, and `check_monotone_A` samples the per-unit utility
gap that drives the threshold structure.

Ties at the cap: a seller whose mass at v is rationed by a tie can secure
the limit utility by pricing just below v. Unless `strict` is set, a price
of exactly v is therefore valued by lim_{x -> v-} u(x), and the tie loss is
reported separately as `cap_tie_shortfall`. In strict mode a level's own
utility at v uses the tie only when the level puts mass on v.

Levels drawn with probability zero never move the opponent's payoff, so the
structure checks skip them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from pricemix.errors import InvalidStrategyError
from pricemix.market import AvailabilityDistribution, MarketConfig, opponent
from pricemix.payoff import expected_utility, utility_gap
from pricemix.strategy import ENDPOINT_TOL, LevelStrategy, PriceStrategy, StrategyProfile

logger = logging.getLogger(__name__)

CAP_EPSILON = 1e-7
EQUAL_UTILITY_TOL = 1e-8
MIN_GRID = 1000


@dataclass(frozen=True)
class LevelGap:
    """Best-response comparison for one (seller, availability level)."""

    seller: int
    level: int
    equilibrium_utility: float
    best_response_utility: float
    best_response_price: float
    gap: float
    relative_gap: float
    cap_tie_shortfall: float = 0.0
    probability: float = 1.0

    @property
    def drawn(self) -> bool:
        return self.probability > 0.0


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class StructureReport:
    """Outcome of the structural equilibrium checks, one entry per property."""

    checks: tuple[PropertyCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[PropertyCheck]:
        return [c for c in self.checks if not c.passed]

    def check(self, name: str) -> PropertyCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True)
class EquilibriumCertificate:
    """Best-response gaps of a profile plus its structure report."""

    levels: tuple[LevelGap, ...]
    tol: float
    grid_size: int
    scale: float
    strict: bool
    expected_profit: tuple[float, float]
    structure: StructureReport | None = None

    @property
    def max_gap(self) -> float:
        return max(g.gap for g in self.levels if g.drawn)

    @property
    def passed(self) -> bool:
        return all(g.gap <= self.tol * self.scale for g in self.levels if g.drawn)

    def level(self, k: int, i: int) -> LevelGap:
        for g in self.levels:
            if (g.seller, g.level) == (k, i):
                return g
        raise KeyError((k, i))


@dataclass(frozen=True)
class MonotonicityViolation:
    seller: int
    high: int
    low: int
    price: float
    increase: float


@dataclass(frozen=True)
class MonotonicityReport:
    """Sampled monotonicity of A over each seller's claimed interval."""

    intervals: tuple[tuple[float, float] | None, tuple[float, float] | None]
    pairs_checked: int
    violations: tuple[MonotonicityViolation, ...]

    @property
    def passed(self) -> bool:
        return not self.violations


def candidate_prices(
    cfg: MarketConfig, grid_size: int, breakpoints: list[float]
) -> NDArray[np.float64]:
    """Regular grid on [c, v] plus breakpoints, v and v - eps."""
    grid = cfg.c + cfg.scale * np.arange(grid_size + 1) / grid_size
    extra = np.array([*breakpoints, cfg.v - cfg.scale * CAP_EPSILON, cfg.v])
    return np.unique(np.clip(np.concatenate([grid, extra]), 0.0, cfg.v))


def support_points(level: LevelStrategy, grid: NDArray[np.float64]) -> NDArray[np.float64]:
    """Breakpoints of a level plus the grid points inside its continuous support."""
    points = [np.array(level.breakpoints())]
    for piece in level.pieces:
        points.append(grid[(grid >= piece.lo) & (grid <= piece.hi)])
    return np.unique(np.concatenate(points))


def payoff(
    cfg: MarketConfig,
    k: int,
    units: int,
    x: NDArray[np.float64],
    opp: PriceStrategy,
    strict: bool = False,
) -> NDArray[np.float64]:
    """Utility at prices x; v is valued by its left limit unless strict."""
    values = np.array(expected_utility(cfg, k, units, x, opp), dtype=float)
    if not strict:
        at_cap = x >= cfg.v
        if at_cap.any():
            values[at_cap] = expected_utility(cfg, k, units, x[at_cap], opp, limit="left")
    return values


def _validate(cfg: MarketConfig, profile: StrategyProfile) -> None:
    for k in (1, 2):
        strategy = profile.strategy(k)
        if strategy.m != cfg.m(k):
            raise InvalidStrategyError(
                f"seller {k} strategy has {strategy.m} levels, market has {cfg.m(k)}"
            )
        for level in strategy.levels:
            if level.lo < 0.0 or level.hi > cfg.v:
                raise InvalidStrategyError(f"seller {k} prices outside [0, {cfg.v}]")


def _cap_shortfall(
    cfg: MarketConfig, k: int, i: int, level: LevelStrategy, opp: PriceStrategy
) -> float:
    if level.atom <= 0.0 or level.atom_price != cfg.v:
        return 0.0
    left = expected_utility(cfg, k, i, cfg.v, opp, limit="left")
    exact = expected_utility(cfg, k, i, cfg.v, opp)
    return float(left - exact)


def certify(
    cfg: MarketConfig,
    profile: StrategyProfile,
    grid_size: int = 10_000,
    tol: float = 1e-6,
    *,
    strict: bool = False,
    check_structure: bool = True,
) -> EquilibriumCertificate:
    """Certify a profile by best-response search.

    A level's own utility is the minimum over its support breakpoints and the
    grid points inside its support, so the gap can only grow when the grid is
    refined to a superset (e.g. doubling grid_size); grids that are not nested
    carry no such ordering. Levels drawn with probability zero are reported
    but do not count towards `passed` or `max_gap`.

    Args:
        cfg: Market configuration
        profile: Strategies of both sellers
        grid_size: Number of regular grid intervals on [c, v], at least 1000
        tol: Allowed gap as a fraction of v - c
        strict: Value a price of exactly v with tie rationing instead of its left limit
        check_structure: Attach the structural property report

    Raises:
        ValueError: grid_size below 1000
        InvalidStrategyError: Profile does not fit the market
    """
    if grid_size < MIN_GRID:
        raise ValueError(f"grid_size must be at least {MIN_GRID}, got {grid_size}")
    _validate(cfg, profile)

    grid = cfg.c + cfg.scale * np.arange(grid_size + 1) / grid_size
    candidates = candidate_prices(cfg, grid_size, profile.breakpoints())
    gaps: list[LevelGap] = []
    profits = [0.0, 0.0]
    for k in (1, 2):
        opp = profile.strategy(opponent(k))
        for i in range(1, cfg.m(k) + 1):
            level = profile.strategy(k).level(i)
            values = payoff(cfg, k, i, candidates, opp, strict)
            best = int(np.argmax(values))
            # v closes a continuous support from the left unless the level has mass there.
            own_strict = strict and level.atom > 0.0 and level.atom_price == cfg.v
            points = support_points(level, grid)
            own = float(np.min(payoff(cfg, k, i, points, opp, own_strict)))
            gap = float(values[best]) - own
            if own > 0.0:
                relative = gap / own
            else:
                relative = 0.0 if gap <= 0.0 else float("inf")
            gaps.append(
                LevelGap(
                    seller=k,
                    level=i,
                    equilibrium_utility=own,
                    best_response_utility=float(values[best]),
                    best_response_price=float(candidates[best]),
                    gap=gap,
                    relative_gap=relative,
                    cap_tie_shortfall=_cap_shortfall(cfg, k, i, level, opp),
                    probability=cfg.seller(k).prob(i),
                )
            )
            profits[k - 1] += cfg.seller(k).probs[i] * own

    certificate = EquilibriumCertificate(
        levels=tuple(gaps),
        tol=tol,
        grid_size=grid_size,
        scale=cfg.scale,
        strict=strict,
        expected_profit=(profits[0], profits[1]),
        structure=check_equilibrium_structure(cfg, profile) if check_structure else None,
    )
    logger.info(
        "certificate: max gap %.3e, %s",
        certificate.max_gap,
        "pass" if certificate.passed else "FAIL",
    )
    return certificate


def observed_threshold(
    strategy: PriceStrategy, v: float, avail: AvailabilityDistribution | None = None
) -> int:
    """Number of leading levels that price at v with probability one.

    With `avail`, levels that are never drawn neither count nor end the run.
    """
    count = 0
    for i, level in enumerate(strategy.levels, start=1):
        if avail is not None and avail.prob(i) == 0.0:
            continue
        if not (level.is_pure and level.atom_price == v):
            break
        count = i
    return count


def _drawn(cfg: MarketConfig, k: int, i: int) -> bool:
    return cfg.seller(k).prob(i) > 0.0


def _reduced(cfg: MarketConfig, profile: StrategyProfile) -> tuple[MarketConfig, StrategyProfile]:
    work = cfg.effective()
    if work is cfg:
        return cfg, profile
    strategies = tuple(
        PriceStrategy(profile.strategy(k).levels[: work.m(k)]) for k in (1, 2)
    )
    thresholds = tuple(min(profile.threshold(k), work.m(k)) for k in (1, 2))
    reduced = StrategyProfile(strategies=strategies, thresholds=thresholds, p_tilde=profile.p_tilde)
    return work, reduced


def _threshold_range(cfg: MarketConfig, thresholds: tuple[int, int]) -> PropertyCheck:
    bad = [
        f"seller {k}: l={thresholds[k - 1]} not in {cfg.e(k)}..{cfg.m(k) - 1}"
        for k in (1, 2)
        if not cfg.e(k) <= thresholds[k - 1] <= cfg.m(k) - 1
    ]
    return PropertyCheck("threshold_range", not bad, "; ".join(bad))


def _threshold_sum(cfg: MarketConfig, thresholds: tuple[int, int]) -> PropertyCheck:
    total = sum(thresholds)
    ok = total in (cfg.d - 1, cfg.d)
    return PropertyCheck("threshold_sum", ok, f"l1 + l2 = {total}, d = {cfg.d}")


def _support_chaining(
    cfg: MarketConfig, profile: StrategyProfile, thresholds: tuple[int, int]
) -> PropertyCheck:
    tol = ENDPOINT_TOL * max(1.0, cfg.v)
    problems = []
    for k in (1, 2):
        strategy = profile.strategy(k)
        upper = cfg.v
        for i in range(thresholds[k - 1] + 1, strategy.m + 1):
            if not _drawn(cfg, k, i):
                continue
            level = strategy.level(i)
            if level.hi > upper + tol:
                problems.append(
                    f"seller {k} levels ({i}, {i - 1}) overlap on [{upper}, {level.hi}]"
                )
            elif level.hi < upper - tol:
                problems.append(
                    f"seller {k} gap between levels {i} and {i - 1}: ({level.hi}, {upper})"
                )
            if level.lo >= upper - tol and not level.is_pure:
                problems.append(f"seller {k} level {i} support is empty below {upper}")
            upper = level.lo
    return PropertyCheck("support_chaining", not problems, "; ".join(problems))


def _continuity(cfg: MarketConfig, profile: StrategyProfile) -> PropertyCheck:
    problems = [
        f"seller {k} level {i} has mass {level.atom} at {level.atom_price}"
        for k in (1, 2)
        for i, level in enumerate(profile.strategy(k).levels, start=1)
        if level.atom > 0.0 and level.atom_price != cfg.v and _drawn(cfg, k, i)
    ]
    return PropertyCheck("continuity_below_v", not problems, "; ".join(problems))


def _single_jump(
    cfg: MarketConfig, profile: StrategyProfile, thresholds: tuple[int, int]
) -> PropertyCheck:
    problems = []
    jumps = []
    for k in (1, 2):
        strategy = profile.strategy(k)
        drawn = [i for i in range(thresholds[k - 1] + 1, strategy.m + 1) if _drawn(cfg, k, i)]
        for i in drawn:
            atom = strategy.level(i).atom
            if i == drawn[0]:
                jumps.append(atom)
                if atom >= 1.0:
                    problems.append(f"seller {k} jump at v has size {atom}")
            elif atom > ENDPOINT_TOL:
                problems.append(f"seller {k} level {i} has a second jump of {atom}")
    if len(jumps) == 2 and min(jumps) > ENDPOINT_TOL:
        problems.append(f"both sellers jump at v: f1={jumps[0]}, f2={jumps[1]}")
    if max(jumps, default=0.0) > ENDPOINT_TOL and sum(thresholds) >= cfg.d:
        problems.append(f"jump at v with l1 + l2 = {sum(thresholds)} rations the tie at v")
    return PropertyCheck("single_jump", not problems, "; ".join(problems))


def _common_lower_bound(cfg: MarketConfig, profile: StrategyProfile) -> PropertyCheck:
    lows = [profile.strategy(k).levels[-1].lo for k in (1, 2)]
    ok = abs(lows[0] - lows[1]) <= ENDPOINT_TOL * max(1.0, cfg.v)
    return PropertyCheck("common_lower_bound", ok, f"lowest prices {lows[0]!r}, {lows[1]!r}")


def _equal_utility(cfg: MarketConfig, profile: StrategyProfile, samples: int) -> PropertyCheck:
    problems = []
    for k in (1, 2):
        opp = profile.strategy(opponent(k))
        for i, level in enumerate(profile.strategy(k).levels, start=1):
            if level.is_pure or not _drawn(cfg, k, i):
                continue
            xs = np.linspace(level.pieces[0].lo, level.pieces[-1].hi, samples)
            values = expected_utility(cfg, k, i, xs, opp, limit="left")
            spread = float(np.max(values) - np.min(values))
            if spread > EQUAL_UTILITY_TOL * cfg.scale:
                problems.append(f"seller {k} level {i} utility varies by {spread:.3e}")
    return PropertyCheck("equal_utility", not problems, "; ".join(problems))


def check_equilibrium_structure(
    cfg: MarketConfig, profile: StrategyProfile, samples: int = 256
) -> StructureReport:
    """Check thresholds, support chaining, continuity, jumps, common bound and indifference.

    Markets with d below the availability are checked on the pooled game.
    """
    if cfg.is_monopoly:
        at_v = all(observed_threshold(profile.strategy(k), cfg.v) == cfg.m(k) for k in (1, 2))
        detail = (
            "no competition: every level at v"
            if at_v
            else "no competition but a level is below v"
        )
        names = (
            "threshold_range",
            "threshold_sum",
            "support_chaining",
            "continuity_below_v",
            "single_jump",
            "common_lower_bound",
            "equal_utility",
        )
        return StructureReport(tuple(PropertyCheck(n, at_v, detail) for n in names))

    work, reduced = _reduced(cfg, profile)
    thresholds = (
        observed_threshold(reduced.strategy(1), cfg.v, work.seller(1)),
        observed_threshold(reduced.strategy(2), cfg.v, work.seller(2)),
    )
    return StructureReport(
        (
            _threshold_range(work, thresholds),
            _threshold_sum(work, thresholds),
            _support_chaining(work, reduced, thresholds),
            _continuity(work, reduced),
            _single_jump(work, reduced, thresholds),
            _common_lower_bound(work, reduced),
            _equal_utility(work, reduced, samples),
        )
    )


def monotone_interval(
    cfg: MarketConfig, profile: StrategyProfile, k: int
) -> tuple[float, float] | None:
    """Interval on which A for seller k is strictly decreasing, if one is claimed.

    When d exceeds the opponent's availability this starts at p_tilde; when
    they are equal it starts at the lower bound of the opponent's second
    highest level.
    """
    o = opponent(k)
    m_o = cfg.m(o)
    if cfg.d > m_o:
        lo = profile.strategy(o).levels[-1].lo
    elif cfg.d == m_o and m_o >= 2:
        lo = profile.strategy(o).level(m_o - 1).lo
    else:
        return None
    return (lo, cfg.v) if lo < cfg.v else None


def check_monotone_A(  # noqa: N802
    cfg: MarketConfig, profile: StrategyProfile, points: int = 100, slack: float = 1e-12
) -> MonotonicityReport:
    """Sample A_{k,high,low} for every high > max(e_k, low) on each claimed interval."""
    work, reduced = _reduced(cfg, profile)
    intervals = (monotone_interval(work, reduced, 1), monotone_interval(work, reduced, 2))
    violations: list[MonotonicityViolation] = []
    pairs = 0
    for k in (1, 2):
        interval = intervals[k - 1]
        if interval is None:
            continue
        xs = np.linspace(interval[0], interval[1], points, endpoint=False)
        opp = reduced.strategy(opponent(k))
        for high in range(max(work.e(k) + 1, 2), work.m(k) + 1):
            for low in range(1, high):
                pairs += 1
                values = np.asarray(utility_gap(work, k, high, low, xs, opp))
                for t in np.flatnonzero(np.diff(values) > -slack):
                    violations.append(
                        MonotonicityViolation(
                            seller=k,
                            high=high,
                            low=low,
                            price=float(xs[t + 1]),
                            increase=float(values[t + 1] - values[t]),
                        )
                    )
    return MonotonicityReport(
        intervals=intervals, pairs_checked=pairs, violations=tuple(violations)
    )
