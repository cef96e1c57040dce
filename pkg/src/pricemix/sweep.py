"""Lowest equilibrium price against availability for binomial sellers with d = m."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from pricemix.errors import PricemixError
from pricemix.market import AvailabilityDistribution, MarketConfig
from pricemix.symmetric import solve_symmetric

logger = logging.getLogger(__name__)

DEFAULT_RS = (0.3, 0.5, 0.7)


@dataclass(frozen=True, order=True)
class SweepRow:
    r: float
    m: int
    p_tilde: float


class SweepError(PricemixError):
    """A sweep point failed; `rows` keeps every point that succeeded."""

    def __init__(self, message: str, rows: list[SweepRow]) -> None:
        self.rows = rows
        super().__init__(message)


def sweep_point(r: float, m: int, v: float, c: float) -> SweepRow:
    cfg = MarketConfig.symmetric(m, v, c, AvailabilityDistribution.binomial(m, r))
    return SweepRow(r=r, m=m, p_tilde=solve_symmetric(cfg).p_tilde)


def run_sweep_asymptotic(
    rs: Sequence[float] = DEFAULT_RS,
    m_min: int = 2,
    m_max: int = 40,
    v: float = 10.0,
    c: float = 1.0,
    jobs: int = 1,
) -> list[SweepRow]:
    """Solve the symmetric market for every (r, m) and collect p_tilde.

    Rows come back sorted by (r, m) whatever the number of workers.

    Raises:
        ValueError: Empty m range or r outside (0, 1)
        SweepError: A point failed; carries the rows that did not
    """
    if m_min < 1 or m_max < m_min:
        raise ValueError(f"invalid m range {m_min}..{m_max}")
    if any(not 0.0 < r < 1.0 for r in rs):
        raise ValueError(f"binomial probabilities must lie in (0, 1): {list(rs)}")

    points = [(r, m) for r in rs for m in range(m_min, m_max + 1)]
    logger.info("sweeping %d points on %d threads", len(points), jobs)
    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
        futures = [(p, pool.submit(sweep_point, p[0], p[1], v, c)) for p in points]

    rows: list[SweepRow] = []
    failures: list[str] = []
    for (r, m), future in futures:
        error = future.exception()
        if error is None:
            rows.append(future.result())
        else:
            logger.warning("r=%g, m=%d failed: %s", r, m, error)
            failures.append(f"r={r:g}, m={m}: {error}")
    rows.sort()
    if failures:
        raise SweepError(f"{len(failures)} sweep point(s) failed; first: {failures[0]}", rows)
    return rows


def series(rows: Sequence[SweepRow], r: float) -> dict[int, float]:
    """p_tilde by m for one availability probability."""
    return {row.m: row.p_tilde for row in rows if row.r == r}
