"""Price strategies: CDF pieces, per-level strategies and two-seller profiles."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Protocol, runtime_checkable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pricemix.errors import InvalidStrategyError

ENDPOINT_TOL = 1e-9


@runtime_checkable
class CdfPiece(Protocol):
    """A continuous, nondecreasing piece of a level CDF on [lo, hi]."""

    lo: float
    hi: float

    def cdf(self, x: NDArray[np.float64]) -> NDArray[np.float64]: ...

    def quantile(self, u: NDArray[np.float64]) -> NDArray[np.float64]: ...


@dataclass(frozen=True)
class CdfSegment:
    """Closed-form piece Φ(x) = (alpha - beta / (x - c)) / gamma on [lo, hi]."""

    lo: float
    hi: float
    alpha: float
    beta: float
    gamma: float
    c: float

    def __post_init__(self) -> None:
        if not self.lo <= self.hi:
            raise InvalidStrategyError(f"segment bounds out of order: [{self.lo}, {self.hi}]")
        if self.lo <= self.c:
            raise InvalidStrategyError(f"segment starts at {self.lo}, not above cost {self.c}")
        if self.gamma <= 0.0 or self.beta < 0.0:
            raise InvalidStrategyError(
                f"segment is not nondecreasing (beta={self.beta}, gamma={self.gamma})"
            )

    def cdf(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return (self.alpha - self.beta / (x - self.c)) / self.gamma

    def quantile(self, u: NDArray[np.float64]) -> NDArray[np.float64]:
        return self.c + self.beta / (self.alpha - self.gamma * u)


@dataclass(frozen=True)
class GridSegment:
    """Numeric piece tabulated on a grid, interpolated linearly in -1/(x - c).

    The equal-utility CDFs are affine in 1/(x - c) for two sellers, so this
    interpolation is exact there and second order otherwise.
    """

    xs: tuple[float, ...]
    ps: tuple[float, ...]
    c: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "xs", tuple(float(x) for x in self.xs))
        object.__setattr__(self, "ps", tuple(float(p) for p in self.ps))
        if len(self.xs) < 2 or len(self.xs) != len(self.ps):
            raise InvalidStrategyError("grid segment needs matching grids of at least 2 points")
        if np.any(np.diff(self.xs) <= 0.0):
            raise InvalidStrategyError("grid segment prices must be strictly increasing")
        if np.any(np.diff(self.ps) < 0.0):
            raise InvalidStrategyError("grid segment CDF values must be nondecreasing")
        if self.xs[0] <= self.c:
            raise InvalidStrategyError(f"segment starts at {self.xs[0]}, not above cost {self.c}")

    @property
    def lo(self) -> float:
        return self.xs[0]

    @property
    def hi(self) -> float:
        return self.xs[-1]

    @cached_property
    def _zs(self) -> NDArray[np.float64]:
        return -1.0 / (np.asarray(self.xs) - self.c)

    def cdf(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.interp(-1.0 / (x - self.c), self._zs, np.asarray(self.ps))

    def quantile(self, u: NDArray[np.float64]) -> NDArray[np.float64]:
        z = np.interp(u, np.asarray(self.ps), self._zs)
        return self.c - 1.0 / z


@dataclass(frozen=True)
class LevelStrategy:
    """Price distribution of one availability level.

    A chain of contiguous continuous pieces plus an optional atom. Atoms below
    the cap are representable so that perturbed profiles can be certified;
    the structure checks in verification flag them.
    """

    pieces: tuple[CdfPiece, ...] = ()
    atom: float = 0.0
    atom_price: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "pieces", tuple(self.pieces))
        if not 0.0 <= self.atom <= 1.0:
            raise InvalidStrategyError(f"atom size must lie in [0, 1], got {self.atom}")
        if self.atom > 0.0 and self.atom_price is None:
            raise InvalidStrategyError("an atom needs a price")
        if not self.pieces:
            if abs(self.atom - 1.0) > ENDPOINT_TOL:
                raise InvalidStrategyError("a level without continuous part must be an atom of 1")
            return
        self._validate_chain()

    def _validate_chain(self) -> None:
        mass = 1.0 - self.atom
        first = self.pieces[0]
        start = float(first.cdf(np.array([first.lo]))[0])
        if abs(start) > ENDPOINT_TOL:
            raise InvalidStrategyError(f"CDF starts at {start} instead of 0 at {first.lo}")

        for prev, nxt in zip(self.pieces, self.pieces[1:]):
            if abs(prev.hi - nxt.lo) > ENDPOINT_TOL:
                raise InvalidStrategyError(f"support has a gap between {prev.hi} and {nxt.lo}")
            left = float(prev.cdf(np.array([prev.hi]))[0])
            right = float(nxt.cdf(np.array([nxt.lo]))[0])
            if abs(left - right) > ENDPOINT_TOL:
                raise InvalidStrategyError(f"CDF jumps from {left} to {right} at {nxt.lo}")

        for piece in self.pieces:
            lo, hi = piece.cdf(np.array([piece.lo, piece.hi]))
            if lo < -ENDPOINT_TOL or hi > mass + ENDPOINT_TOL or hi < lo - ENDPOINT_TOL:
                raise InvalidStrategyError(
                    f"CDF piece on [{piece.lo}, {piece.hi}] leaves [0, {mass}]: {lo}, {hi}"
                )

        last = self.pieces[-1]
        end = float(last.cdf(np.array([last.hi]))[0])
        if abs(end - mass) > ENDPOINT_TOL:
            raise InvalidStrategyError(f"CDF ends at {end}, expected {mass}")

    @classmethod
    def at_price(cls, price: float) -> LevelStrategy:
        """All mass on one price."""
        return cls(pieces=(), atom=1.0, atom_price=float(price))

    @property
    def is_pure(self) -> bool:
        return not self.pieces

    @property
    def continuous_mass(self) -> float:
        return 1.0 - self.atom

    @property
    def lo(self) -> float:
        """Lowest price in the support."""
        return self.pieces[0].lo if self.pieces else float(self.atom_price)

    @property
    def hi(self) -> float:
        """Highest price in the support."""
        top = self.pieces[-1].hi if self.pieces else -np.inf
        if self.atom > 0.0:
            top = max(top, float(self.atom_price))
        return float(top)

    def breakpoints(self) -> list[float]:
        points = [p.lo for p in self.pieces] + [p.hi for p in self.pieces]
        if self.atom > 0.0:
            points.append(float(self.atom_price))
        return sorted(set(points))

    def _continuous(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        out = np.zeros_like(x)
        if not self.pieces:
            return out
        out[x > self.pieces[-1].hi] = self.continuous_mass
        for piece in self.pieces:
            inside = (x >= piece.lo) & (x <= piece.hi)
            if inside.any():
                out[inside] = piece.cdf(x[inside])
        return np.clip(out, 0.0, self.continuous_mass)

    def cdf(self, x: ArrayLike) -> NDArray[np.float64]:
        """P(price <= x)."""
        x = np.asarray(x, dtype=float)
        out = self._continuous(np.atleast_1d(x))
        if self.atom > 0.0:
            out = out + self.atom * (np.atleast_1d(x) >= self.atom_price)
        return out.reshape(x.shape)

    def cdf_left(self, x: ArrayLike) -> NDArray[np.float64]:
        """P(price < x)."""
        x = np.asarray(x, dtype=float)
        out = self._continuous(np.atleast_1d(x))
        if self.atom > 0.0:
            out = out + self.atom * (np.atleast_1d(x) > self.atom_price)
        return out.reshape(x.shape)

    def sample(self, u: ArrayLike) -> NDArray[np.float64]:
        """Inverse-transform prices for uniforms u in [0, 1)."""
        u = np.asarray(u, dtype=float)
        out = np.full(u.shape, np.nan if self.atom_price is None else self.atom_price)
        if not self.pieces:
            return out
        starts = np.array([float(p.cdf(np.array([p.lo]))[0]) for p in self.pieces])
        continuous = u < self.continuous_mass
        which = np.clip(np.searchsorted(starts, u, side="right") - 1, 0, len(self.pieces) - 1)
        for i, piece in enumerate(self.pieces):
            mask = continuous & (which == i)
            if mask.any():
                out[mask] = np.clip(piece.quantile(u[mask]), piece.lo, piece.hi)
        return out


@dataclass(frozen=True)
class PriceStrategy:
    """One seller's strategy: a LevelStrategy per availability level 1..m."""

    levels: tuple[LevelStrategy, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise InvalidStrategyError("a strategy needs at least one availability level")

    @classmethod
    def all_at(cls, price: float, m: int) -> PriceStrategy:
        return cls(tuple(LevelStrategy.at_price(price) for _ in range(m)))

    @property
    def m(self) -> int:
        return len(self.levels)

    def level(self, i: int) -> LevelStrategy:
        if not 1 <= i <= self.m:
            raise ValueError(f"availability level {i} outside 1..{self.m}")
        return self.levels[i - 1]

    def breakpoints(self) -> list[float]:
        return sorted({p for level in self.levels for p in level.breakpoints()})


@dataclass(frozen=True)
class StrategyProfile:
    """Strategies of both sellers with their thresholds and common lower bound."""

    strategies: tuple[PriceStrategy, PriceStrategy]
    thresholds: tuple[int, int]
    p_tilde: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "thresholds", tuple(int(t) for t in self.thresholds))
        if len(self.strategies) != 2 or len(self.thresholds) != 2:
            raise InvalidStrategyError("a profile holds exactly two strategies")
        for strategy, threshold in zip(self.strategies, self.thresholds, strict=True):
            if not 0 <= threshold <= strategy.m:
                raise InvalidStrategyError(f"threshold {threshold} outside 0..{strategy.m}")

    def strategy(self, k: int) -> PriceStrategy:
        return self.strategies[k - 1]

    def threshold(self, k: int) -> int:
        return self.thresholds[k - 1]

    def breakpoints(self) -> list[float]:
        return sorted(set(self.strategies[0].breakpoints()) | set(self.strategies[1].breakpoints()))

    def swapped(self) -> StrategyProfile:
        return StrategyProfile(
            strategies=(self.strategies[1], self.strategies[0]),
            thresholds=(self.thresholds[1], self.thresholds[0]),
            p_tilde=self.p_tilde,
        )

    def jump(self, k: int) -> float:
        """Atom size on the first level above seller k's threshold."""
        strategy, threshold = self.strategy(k), self.threshold(k)
        if threshold >= strategy.m:
            return 0.0
        return strategy.level(threshold + 1).atom
