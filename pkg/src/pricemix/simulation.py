"""Monte-Carlo market simulator used as a second oracle for the evaluators.

Rounds are processed in fixed-size blocks. Each block draws from its own
Philox stream keyed by (seed, block index), so the report does not depend
on how many worker threads process the blocks.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from pricemix.market import MarketConfig, opponent
from pricemix.payoff import expected_units_sold
from pricemix.strategy import PriceStrategy, StrategyProfile

logger = logging.getLogger(__name__)

BLOCK_ROUNDS = 65_536
PROBES_PER_PIECE = 16


@dataclass(frozen=True)
class ProbeResult:
    """Empirical against analytic units sold for one (seller, level, price).

    `samples` counts the rounds in which the seller drew this level; a level
    that never occurs has no data and leaves mean, std_error and z unset.
    """

    seller: int
    level: int
    price: float
    samples: int
    analytic: float
    mean: float | None = None
    std_error: float | None = None
    z: float | None = None

    @property
    def has_data(self) -> bool:
        return self.samples > 0


@dataclass(frozen=True)
class SimulationReport:
    rounds: int
    seed: int
    probes: tuple[ProbeResult, ...]
    mean_units_sold: tuple[float, float]

    @property
    def max_abs_z(self) -> float:
        zs = [abs(p.z) for p in self.probes if p.z is not None]
        return max(zs) if zs else 0.0

    def fraction_within(self, bound: float) -> float:
        """Share of probes with data whose |z| is at most bound."""
        zs = [abs(p.z) for p in self.probes if p.z is not None]
        if not zs:
            return 1.0
        return sum(z <= bound for z in zs) / len(zs)


@dataclass
class _Tally:
    count: NDArray[np.int64]
    total: NDArray[np.float64]
    total_sq: NDArray[np.float64]

    @classmethod
    def empty(cls, size: int) -> _Tally:
        return cls(np.zeros(size, dtype=np.int64), np.zeros(size), np.zeros(size))

    def merge(self, other: _Tally) -> None:
        self.count += other.count
        self.total += other.total
        self.total_sq += other.total_sq


def allocate_sales(
    own_units: NDArray[np.int64],
    own_price: NDArray[np.float64],
    other_units: NDArray[np.int64],
    other_price: NDArray[np.float64],
    demand: NDArray[np.int64],
    rng: np.random.Generator,
) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    """Serve demand from the cheaper seller first and split rationed ties unit by unit.

    A tie with own + other > d hands out the d units by drawing without
    replacement from the pooled offers, so a seller's expected sale is
    own * d / (own + other).
    """
    own_units, other_units, demand = np.broadcast_arrays(
        np.asarray(own_units), np.asarray(other_units), np.asarray(demand)
    )
    own_price, other_price = np.broadcast_arrays(np.asarray(own_price), np.asarray(other_price))

    own_first = np.minimum(own_units, demand)
    other_first = np.minimum(other_units, demand)
    own_sold = np.where(
        own_price < other_price,
        own_first,
        np.minimum(own_units, np.maximum(demand - other_units, 0)),
    )
    other_sold = np.where(
        other_price < own_price,
        other_first,
        np.minimum(other_units, np.maximum(demand - own_units, 0)),
    )

    tie = own_price == other_price
    own_sold = np.where(tie, own_units, own_sold)
    other_sold = np.where(tie, other_units, other_sold)
    rationed = tie & (own_units + other_units > demand) & (demand > 0)
    if rationed.any():
        drawn = rng.hypergeometric(own_units[rationed], other_units[rationed], demand[rationed])
        own_sold = own_sold.copy()
        other_sold = other_sold.copy()
        own_sold[rationed] = drawn
        other_sold[rationed] = demand[rationed] - drawn
    tie_empty = tie & (demand == 0)
    own_sold = np.where(tie_empty, 0, own_sold)
    other_sold = np.where(tie_empty, 0, other_sold)
    return own_sold.astype(np.int64), other_sold.astype(np.int64)


def probe_prices(strategy: PriceStrategy, level: int) -> NDArray[np.float64]:
    """Equally spaced prices on each support piece, endpoints included, plus the atom."""
    lvl = strategy.level(level)
    points = [np.linspace(p.lo, p.hi, PROBES_PER_PIECE + 2) for p in lvl.pieces]
    if lvl.atom > 0.0:
        points.append(np.array([lvl.atom_price]))
    return np.unique(np.concatenate(points))


def _draw_prices(
    strategy: PriceStrategy, units: NDArray[np.int64], u: NDArray[np.float64], v: float
) -> NDArray[np.float64]:
    prices = np.full(units.shape, v)
    for i in range(1, strategy.m + 1):
        mask = units == i
        if mask.any():
            prices[mask] = strategy.level(i).sample(u[mask])
    return prices


def _draw_demand(cfg: MarketConfig, size: int, rng: np.random.Generator) -> NDArray[np.int64]:
    values = np.array([d for d, _ in cfg.demand.atoms], dtype=np.int64)
    weights = np.array([r for _, r in cfg.demand.atoms])
    if len(values) == 1:
        return np.full(size, values[0], dtype=np.int64)
    return rng.choice(values, size=size, p=weights / weights.sum())


@dataclass(frozen=True)
class _Probe:
    seller: int
    level: int
    prices: NDArray[np.float64]
    offset: int


def _run_block(
    cfg: MarketConfig,
    profile: StrategyProfile,
    probes: list[_Probe],
    width: int,
    seed: int,
    block: int,
    size: int,
) -> tuple[_Tally, NDArray[np.int64]]:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))
    units = [
        rng.choice(cfg.m(k) + 1, size=size, p=np.asarray(cfg.seller(k).probs)) for k in (1, 2)
    ]
    demand = _draw_demand(cfg, size, rng)
    prices = [
        _draw_prices(profile.strategy(k), units[k - 1], rng.random(size), cfg.v) for k in (1, 2)
    ]

    sold_1, sold_2 = allocate_sales(units[0], prices[0], units[1], prices[1], demand, rng)
    totals = np.array([sold_1.sum(), sold_2.sum()], dtype=np.int64)

    tally = _Tally.empty(width)
    for probe in probes:
        rows = units[probe.seller - 1] == probe.level
        n = int(rows.sum())
        if n == 0:
            continue
        o = opponent(probe.seller)
        shape = (n, probe.prices.size)
        own_sold, _ = allocate_sales(
            np.full(shape, probe.level),
            np.broadcast_to(probe.prices, shape),
            units[o - 1][rows][:, None],
            prices[o - 1][rows][:, None],
            demand[rows][:, None],
            rng,
        )
        span = slice(probe.offset, probe.offset + probe.prices.size)
        tally.count[span] += n
        tally.total[span] += own_sold.sum(axis=0)
        tally.total_sq[span] += (own_sold.astype(float) ** 2).sum(axis=0)
    return tally, totals


def simulate(
    cfg: MarketConfig,
    profile: StrategyProfile,
    rounds: int,
    seed: int = 0,
    jobs: int = 1,
) -> SimulationReport:
    """Simulate market rounds and compare units sold with the analytic evaluator.

    Args:
        cfg: Market configuration
        profile: Strategies of both sellers
        rounds: Number of simulated rounds, at least 1
        seed: Root seed of the per-block random streams
        jobs: Worker threads; the report is identical for any value

    Raises:
        ValueError: rounds < 1 or jobs < 1
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")

    probes: list[_Probe] = []
    width = 0
    for k in (1, 2):
        for i in range(1, cfg.m(k) + 1):
            prices = probe_prices(profile.strategy(k), i)
            probes.append(_Probe(seller=k, level=i, prices=prices, offset=width))
            width += prices.size

    blocks = [
        (b, min(BLOCK_ROUNDS, rounds - b * BLOCK_ROUNDS))
        for b in range(math.ceil(rounds / BLOCK_ROUNDS))
    ]
    logger.info("simulating %d rounds in %d blocks on %d threads", rounds, len(blocks), jobs)

    def run(item: tuple[int, int]) -> tuple[_Tally, NDArray[np.int64]]:
        return _run_block(cfg, profile, probes, width, seed, *item)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(item) for item in blocks]

    tally = _Tally.empty(width)
    sold = np.zeros(2, dtype=np.int64)
    for block_tally, block_sold in results:
        tally.merge(block_tally)
        sold += block_sold

    out: list[ProbeResult] = []
    for probe in probes:
        opp = profile.strategy(opponent(probe.seller))
        analytic = np.atleast_1d(
            expected_units_sold(cfg, probe.seller, probe.level, probe.prices, opp)
        )
        for j, price in enumerate(probe.prices):
            n = int(tally.count[probe.offset + j])
            if n == 0:
                out.append(
                    ProbeResult(probe.seller, probe.level, float(price), 0, float(analytic[j]))
                )
                continue
            mean = tally.total[probe.offset + j] / n
            var = max(tally.total_sq[probe.offset + j] / n - mean * mean, 0.0)
            se = max(math.sqrt(var / n), 1.0 / (2 * n))
            out.append(
                ProbeResult(
                    seller=probe.seller,
                    level=probe.level,
                    price=float(price),
                    samples=n,
                    analytic=float(analytic[j]),
                    mean=float(mean),
                    std_error=se,
                    z=float((mean - analytic[j]) / se),
                )
            )

    report = SimulationReport(
        rounds=rounds,
        seed=seed,
        probes=tuple(out),
        mean_units_sold=(float(sold[0]) / rounds, float(sold[1]) / rounds),
    )
    logger.info("simulation done: max |z| %.2f", report.max_abs_z)
    return report
