"""Equilibria of general duopolies by enumerating support structures.

A structure hypothesis fixes both thresholds and the order in which the
lower bounds of the mixing levels appear below v. Given a hypothesis, the
equal-utility conditions are walked from v downward: at every breakpoint the
level that ends has CDF zero, which fixes the breakpoint price from the
opponent's indifference, and the opponent's CDF value there follows from
the ending seller's indifference. Tracking y = x - c and w = y * Φ keeps every
quantity affine in the single free jump size at v, so each jump branch is
solved exactly by one affine (least-squares when breakpoints coincide)
equation.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from pricemix.errors import ConvergenceError, InvalidStrategyError, NoHypothesisError
from pricemix.market import MarketConfig, opponent
from pricemix.payoff import expected_utility, full_sale, undercut_loss
from pricemix.strategy import CdfSegment, LevelStrategy, PriceStrategy, StrategyProfile

logger = logging.getLogger(__name__)

BOTH = 0
CONSISTENCY_TOL = 1e-9
RANGE_TOL = 1e-9
RESIDUAL_TOL = 1e-10
ZERO_WIDTH_TOL = 1e-9


@dataclass(frozen=True)
class StructureHypothesis:
    """Thresholds plus the top-down order of the mixing levels' lower bounds.

    `events` lists, from v downward, which seller's level ends at each
    breakpoint above the common bottom p_tilde: 1, 2, or BOTH for a shared
    breakpoint.
    """

    thresholds: tuple[int, int]
    events: tuple[int, ...]

    def m(self, k: int) -> int:
        return self.thresholds[k - 1] + 1 + sum(1 for e in self.events if e in (k, BOTH))

    def describe(self) -> str:
        order = ",".join("=" if e == BOTH else str(e) for e in self.events) or "-"
        return f"l=({self.thresholds[0]},{self.thresholds[1]}) order={order}"


@dataclass(frozen=True)
class SweepInterval:
    """Prices between consecutive breakpoints with both sellers' active levels.

    For seller s, `alphas[s-1] - gammas[s-1] * Φ_opponent(x)` is its expected
    units sold and `utilities[s-1]` its constant utility on the interval.
    An interval with a never-drawn active level is `degenerate` and must have
    zero width.
    """

    lo: float
    hi: float
    levels: tuple[int, int]
    alphas: tuple[float, float]
    gammas: tuple[float, float]
    utilities: tuple[float, float]
    degenerate: bool = False

    def segment(self, k: int, c: float) -> CdfSegment:
        """CDF piece of seller k's active level, pinned by the opponent's indifference."""
        o = opponent(k) - 1
        return CdfSegment(
            lo=self.lo,
            hi=self.hi,
            alpha=self.alphas[o],
            beta=self.utilities[o],
            gamma=self.gammas[o],
            c=c,
        )

    def cdf_bounds(self, k: int, c: float) -> tuple[float, float]:
        o = opponent(k) - 1
        a, g, u = self.alphas[o], self.gammas[o], self.utilities[o]
        return (a - u / (self.lo - c)) / g, (a - u / (self.hi - c)) / g


@dataclass(frozen=True)
class CandidateSolution:
    """Solution of one hypothesis under one jump branch, with validity flags."""

    hypothesis: StructureHypothesis
    jumps: tuple[float, float]
    p_tilde: float
    lower_bounds: dict[tuple[int, int], float]
    cross_values: dict[tuple[int, int, int, int], float]
    utilities: dict[tuple[int, int], float]
    intervals: tuple[SweepInterval, ...]
    residual: float
    flags: dict[str, bool] = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return all(self.flags.values())

    def vector(self) -> np.ndarray:
        bounds = [self.lower_bounds[key] for key in sorted(self.lower_bounds)]
        return np.array([*bounds, *self.jumps])


@dataclass(frozen=True)
class Equilibrium:
    """A certified-ready equilibrium with its provenance."""

    profile: StrategyProfile
    hypothesis: StructureHypothesis | None = None
    solution: CandidateSolution | None = None
    residual: float = 0.0


def _interleavings(n1: int, n2: int) -> Iterator[tuple[int, ...]]:
    if n1 == 0 and n2 == 0:
        yield ()
        return
    if n1 > 0:
        for rest in _interleavings(n1 - 1, n2):
            yield (1, *rest)
    if n2 > 0:
        for rest in _interleavings(n1, n2 - 1):
            yield (2, *rest)
    if n1 > 0 and n2 > 0:
        for rest in _interleavings(n1 - 1, n2 - 1):
            yield (BOTH, *rest)


def enumerate_hypotheses(cfg: MarketConfig) -> list[StructureHypothesis]:
    """All structure hypotheses for the trimmed and pooled market, in a fixed order.

    Raises:
        NoHypothesisError: Monopoly regime, or no thresholds fit the demand
    """
    work = cfg.effective()
    if work.is_monopoly:
        raise NoHypothesisError("m1 + m2 <= d: no competition, both sellers price at v")

    d = work.d
    pairs = [
        (l1, l2)
        for l1, l2 in itertools.product(range(work.e(1), work.m(1)), range(work.e(2), work.m(2)))
        if l1 + l2 in (d - 1, d)
    ]
    hypotheses = [
        StructureHypothesis(thresholds=(l1, l2), events=events)
        for l1, l2 in pairs
        for events in _interleavings(work.m(1) - l1 - 1, work.m(2) - l2 - 1)
    ]
    if not hypotheses:
        raise NoHypothesisError(f"no thresholds satisfy l1 + l2 in {{{d - 1}, {d}}}")
    return hypotheses


def _coefficients(cfg: MarketConfig, k: int, own: int, active: int) -> tuple[float, float]:
    """Units-sold coefficients of seller k at level `own` while the opponent mixes `active`."""
    avail = cfg.seller(opponent(k))
    alpha = full_sale(cfg, own) - sum(
        avail.prob(g) * undercut_loss(cfg, own, g) for g in range(active + 1, avail.m + 1)
    )
    gamma = avail.prob(active) * undercut_loss(cfg, own, active)
    return alpha, gamma


@dataclass
class _Sweep:
    breakpoints: list[float] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    intervals: list[SweepInterval] = field(default_factory=list)
    lower_bounds: dict[tuple[int, int], float] = field(default_factory=dict)
    cross_values: dict[tuple[int, int, int, int], float] = field(default_factory=dict)
    utilities: dict[tuple[int, int], float] = field(default_factory=dict)
    positive: bool = True


def _sweep(cfg: MarketConfig, hyp: StructureHypothesis, jumps: tuple[float, float]) -> _Sweep:
    scale, c = cfg.scale, cfg.c
    levels = [hyp.thresholds[0] + 1, hyp.thresholds[1] + 1]
    coef = [
        _coefficients(cfg, 1, levels[0], levels[1]),
        _coefficients(cfg, 2, levels[1], levels[0]),
    ]
    util = [scale * (coef[s][0] - coef[s][1] * (1.0 - jumps[1 - s])) for s in (0, 1)]
    out = _Sweep()
    y_hi = scale

    def close_interval(y: float) -> None:
        hi = cfg.v if y_hi == scale else c + y_hi
        degenerate = any(cfg.seller(s + 1).prob(levels[s]) == 0.0 for s in (0, 1))
        out.intervals.append(
            SweepInterval(
                lo=c + y,
                hi=hi,
                levels=(levels[0], levels[1]),
                alphas=(coef[0][0], coef[1][0]),
                gammas=(coef[0][1], coef[1][1]),
                utilities=(util[0], util[1]),
                degenerate=degenerate,
            )
        )
        for s in (0, 1):
            out.utilities[(s + 1, levels[s])] = util[s]
            if not degenerate:
                out.positive &= coef[s][0] > 0.0 and coef[s][1] > 0.0 and util[s] > 0.0

    for event in (*hyp.events, None):
        if event in (1, 2):
            s, o = event - 1, 2 - event
            y = util[o] / coef[o][0]
            # A zero gamma means the opponent's active level is never drawn.
            w = (y * coef[s][0] - util[s]) / coef[s][1] if coef[s][1] != 0.0 else 0.0
            close_interval(y)
            out.lower_bounds[(s + 1, levels[s])] = c + y
            out.cross_values[(o + 1, levels[o], s + 1, levels[s])] = w / y if y != 0.0 else np.nan
            levels[s] += 1
            coef[s] = _coefficients(cfg, s + 1, levels[s], levels[o])
            util[s] = y * coef[s][0] - coef[s][1] * w
            coef[o] = _coefficients(cfg, o + 1, levels[o], levels[s])
        else:
            y = util[1] / coef[1][0]
            out.residuals.append((util[0] - y * coef[0][0]) / scale)
            close_interval(y)
            out.lower_bounds[(1, levels[0])] = c + y
            out.lower_bounds[(2, levels[1])] = c + y
            if event == BOTH:
                levels[0] += 1
                levels[1] += 1
                coef = [
                    _coefficients(cfg, 1, levels[0], levels[1]),
                    _coefficients(cfg, 2, levels[1], levels[0]),
                ]
                util = [y * (coef[s][0] - coef[s][1]) for s in (0, 1)]
        out.breakpoints.append(y)
        y_hi = y
    return out


def _flags(
    cfg: MarketConfig,
    hyp: StructureHypothesis,
    sweep: _Sweep,
    jumps: tuple[float, float],
    residual: float,
) -> dict[str, bool]:
    ys = [cfg.scale, *sweep.breakpoints]
    ordered = all(
        abs(a - b) <= ZERO_WIDTH_TOL * cfg.scale if iv.degenerate else a - b > 1e-12 * cfg.scale
        for (a, b), iv in zip(itertools.pairwise(ys), sweep.intervals, strict=True)
    )
    in_range = sweep.positive
    if in_range:
        for interval in sweep.intervals:
            if interval.degenerate:
                continue
            for k in (1, 2):
                lo, hi = interval.cdf_bounds(k, cfg.c)
                in_range &= -RANGE_TOL <= lo <= hi + RANGE_TOL and hi <= 1.0 + RANGE_TOL
    return {
        "jump_in_range": all(0.0 <= f < 1.0 for f in jumps),
        # An atom at v on level l_k+1 ties with the opponent's level l_o at v;
        # unless l_k + 1 + l_o <= d the tie rations and l_o moves just below v.
        "cap_tie_clear": sum(hyp.thresholds) < cfg.d or not any(jumps),
        "bounds_ordered": ordered,
        "above_cost": sweep.breakpoints[-1] > 0.0,
        "cdf_in_range": bool(in_range),
        "consistent": residual <= CONSISTENCY_TOL,
    }


def _branch(
    cfg: MarketConfig, hyp: StructureHypothesis, jumper: int | None
) -> CandidateSolution | None:
    def jumps_for(t: float) -> tuple[float, float]:
        if jumper is None:
            return (0.0, 0.0)
        return (t, 0.0) if jumper == 1 else (0.0, t)

    r0 = np.array(_sweep(cfg, hyp, jumps_for(0.0)).residuals)
    t = 0.0
    if jumper is not None:
        slope = np.array(_sweep(cfg, hyp, jumps_for(1.0)).residuals) - r0
        denom = float(slope @ slope)
        if denom <= 1e-30:
            return None
        t = -float(r0 @ slope) / denom
        if abs(t) <= 1e-12:
            t = 0.0

    jumps = jumps_for(t)
    sweep = _sweep(cfg, hyp, jumps)
    residual = float(np.max(np.abs(sweep.residuals)))
    return CandidateSolution(
        hypothesis=hyp,
        jumps=jumps,
        p_tilde=cfg.c + sweep.breakpoints[-1],
        lower_bounds=sweep.lower_bounds,
        cross_values=sweep.cross_values,
        utilities=sweep.utilities,
        intervals=tuple(sweep.intervals),
        residual=residual,
        flags=_flags(cfg, hyp, sweep, jumps, residual),
    )


def solve_hypothesis(cfg: MarketConfig, hyp: StructureHypothesis) -> list[CandidateSolution]:
    """Solve one hypothesis under every jump branch.

    The branches are: no jump, a jump for seller 1 only, a jump for seller 2
    only. Candidates are returned with validity flags; an empty list or no
    valid candidate means the hypothesis is infeasible.
    """
    work = cfg.effective()
    candidates: list[CandidateSolution] = []
    for jumper in (None, 1, 2):
        candidate = _branch(work, hyp, jumper)
        if candidate is None:
            continue
        if jumper is not None and candidate.jumps == (0.0, 0.0):
            continue
        candidates.append(candidate)
    logger.debug(
        "%s: %d candidate(s), %d valid",
        hyp.describe(),
        len(candidates),
        sum(c.valid for c in candidates),
    )
    return candidates


def _strategy(cfg: MarketConfig, sol: CandidateSolution, k: int, m: int) -> PriceStrategy:
    threshold = sol.hypothesis.thresholds[k - 1]
    levels = [LevelStrategy.at_price(cfg.v) for _ in range(threshold)]
    for i in range(threshold + 1, sol.hypothesis.m(k) + 1):
        pieces = sorted(
            (
                iv.segment(k, cfg.c)
                for iv in sol.intervals
                if iv.levels[k - 1] == i and not iv.degenerate
            ),
            key=lambda seg: seg.lo,
        )
        jump = sol.jumps[k - 1] if i == threshold + 1 else 0.0
        if not pieces and not jump:
            levels.append(LevelStrategy.at_price(min(sol.lower_bounds[(k, i)], cfg.v)))
            continue
        levels.append(
            LevelStrategy(pieces=tuple(pieces), atom=jump, atom_price=cfg.v if jump else None)
        )
    levels += [levels[-1]] * (m - len(levels))
    return PriceStrategy(tuple(levels))


def reconstruct_distributions(cfg: MarketConfig, sol: CandidateSolution) -> StrategyProfile:
    """Build both sellers' strategies from a valid candidate.

    Levels pooled above the demand, and levels above the largest one ever
    drawn, reuse the last solved level's strategy. A never-drawn level inside
    the mixing range sits at its lower bound.

    Raises:
        InvalidStrategyError: The candidate is not valid, or a CDF leaves [0, 1]
    """
    if not sol.valid:
        failed = ", ".join(name for name, ok in sol.flags.items() if not ok)
        raise InvalidStrategyError(f"candidate {sol.hypothesis.describe()} is invalid: {failed}")
    return StrategyProfile(
        strategies=(_strategy(cfg, sol, 1, cfg.m(1)), _strategy(cfg, sol, 2, cfg.m(2))),
        thresholds=sol.hypothesis.thresholds,
        p_tilde=sol.p_tilde,
    )


def equal_utility_residual(
    cfg: MarketConfig, sol: CandidateSolution, profile: StrategyProfile
) -> float:
    """Largest deviation from the solved utilities at the support breakpoints, over (v - c)."""
    worst = 0.0
    for (k, i), utility in sol.utilities.items():
        if cfg.seller(k).prob(i) == 0.0:
            continue
        level = profile.strategy(k).level(i)
        points = np.array(level.breakpoints())
        values = expected_utility(cfg, k, i, points, profile.strategy(opponent(k)), limit="left")
        worst = max(worst, float(np.max(np.abs(values - utility))) / cfg.scale)
    return worst


def _monopoly(cfg: MarketConfig) -> Equilibrium:
    strategies = (PriceStrategy.all_at(cfg.v, cfg.m(1)), PriceStrategy.all_at(cfg.v, cfg.m(2)))
    return Equilibrium(
        profile=StrategyProfile(
            strategies=strategies, thresholds=(cfg.m(1), cfg.m(2)), p_tilde=cfg.v
        )
    )


def _is_duplicate(sol: CandidateSolution, kept: list[Equilibrium], tol: float) -> bool:
    for eq in kept:
        other = eq.solution
        if other is None or other.hypothesis.thresholds != sol.hypothesis.thresholds:
            continue
        if other.lower_bounds.keys() != sol.lower_bounds.keys():
            continue
        if np.max(np.abs(other.vector() - sol.vector())) <= tol:
            return True
    return False


def solve_asymmetric(
    cfg: MarketConfig, jobs: int = 1, dedupe_tol: float = 1e-6
) -> list[Equilibrium]:
    """All equilibria within the enumerated structure class.

    Args:
        cfg: Market configuration (trimmed, then pooled when d < max m)
        jobs: Worker threads for solving hypotheses
        dedupe_tol: Distance below which two solutions count as one, relative to v - c

    Raises:
        ConvergenceError: A valid candidate fails the independent residual check
    """
    if cfg.is_monopoly:
        logger.info("no competition: m1 + m2 <= %d, all levels at v", cfg.d)
        return [_monopoly(cfg)]

    work = cfg.effective()
    hypotheses = enumerate_hypotheses(cfg)
    solve = partial(solve_hypothesis, work)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(solve, hypotheses))
    else:
        results = [solve(h) for h in hypotheses]

    found: list[Equilibrium] = []
    for candidates in results:
        for sol in candidates:
            if not sol.valid or _is_duplicate(sol, found, dedupe_tol * cfg.scale):
                continue
            residual = equal_utility_residual(work, sol, reconstruct_distributions(work, sol))
            if residual > RESIDUAL_TOL:
                raise ConvergenceError(
                    f"equal-utility check failed for {sol.hypothesis.describe()}", residual=residual
                )
            found.append(
                Equilibrium(
                    profile=reconstruct_distributions(cfg, sol),
                    hypothesis=sol.hypothesis,
                    solution=sol,
                    residual=residual,
                )
            )
    logger.info("%d hypotheses, %d equilibria", len(hypotheses), len(found))
    return found
