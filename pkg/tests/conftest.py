"""Shared markets for the test suite."""

from __future__ import annotations

import pytest

from pricemix.market import AvailabilityDistribution, DeterministicDemand, MarketConfig


def duopoly(
    q1: list[float], q2: list[float], d: int = 3, v: float = 10.0, c: float = 1.0
) -> MarketConfig:
    return MarketConfig(
        demand=DeterministicDemand(d),
        v=v,
        c=c,
        sellers=(AvailabilityDistribution(tuple(q1)), AvailabilityDistribution(tuple(q2))),
    )


@pytest.fixture
def fig1_market() -> MarketConfig:
    """Three units each, d = 3, tight margin."""
    return duopoly([0.3, 0.2, 0.2, 0.3], [0.4, 0.2, 0.2, 0.2], d=3, v=10.0, c=6.0)


@pytest.fixture
def unique_market() -> MarketConfig:
    """Asymmetric market with a single equilibrium."""
    return duopoly([0.45, 0.1, 0.4, 0.05], [0.2, 0.2, 0.45, 0.15])


@pytest.fixture
def two_equilibria_market() -> MarketConfig:
    return duopoly([0.05, 0.1, 0.4, 0.45], [0.2, 0.2, 0.4, 0.2])


@pytest.fixture
def binomial_market() -> MarketConfig:
    """Identical B(3, 0.4) sellers, d = 3, v = 10, c = 1."""
    return MarketConfig.symmetric(3, 10.0, 1.0, AvailabilityDistribution.binomial(3, 0.4))


@pytest.fixture
def monopoly_market() -> MarketConfig:
    return MarketConfig.symmetric(4, 10.0, 1.0, AvailabilityDistribution.binomial(2, 0.5))


@pytest.fixture
def make_duopoly():
    """Factory for deterministic-demand duopolies."""
    return duopoly
