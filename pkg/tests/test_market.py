"""Tests for market configuration types."""

from __future__ import annotations

import pytest

from pricemix.errors import InvalidConfigError
from pricemix.market import (
    AvailabilityDistribution,
    DeterministicDemand,
    MarketConfig,
    RandomDemand,
    opponent,
)


class TestAvailabilityDistribution:
    def test_binomial_probabilities(self):
        avail = AvailabilityDistribution.binomial(3, 0.4)
        assert avail.m == 3
        assert avail.probs == pytest.approx([0.216, 0.432, 0.288, 0.064])
        assert avail.mean == pytest.approx(1.2)

    @pytest.mark.parametrize(
        "probs",
        [
            (0.5, 0.6),
            (0.5, -0.1, 0.6),
            (0.0, 1.0),
            (1.0,),
        ],
    )
    def test_rejects_invalid(self, probs):
        with pytest.raises(InvalidConfigError):
            AvailabilityDistribution(probs)

    def test_prob_outside_range_is_zero(self):
        avail = AvailabilityDistribution((0.5, 0.5))
        assert avail.prob(2) == 0.0
        assert avail.prob(-1) == 0.0

    def test_pooled_moves_top_mass(self):
        avail = AvailabilityDistribution.binomial(4, 0.5)
        pooled = avail.pooled(2)
        assert pooled.m == 2
        assert pooled.probs == pytest.approx([1 / 16, 4 / 16, 11 / 16])

    def test_top_ignores_unused_levels(self):
        avail = AvailabilityDistribution((0.5, 0.5, 0.0, 0.0))
        assert avail.top == 1
        assert avail.trimmed().probs == (0.5, 0.5)
        assert AvailabilityDistribution((1.0, 0.0, 0.0)).trimmed().m == 1

    def test_pooled_noop_when_demand_covers(self):
        avail = AvailabilityDistribution.uniform(2)
        assert avail.pooled(3) is avail


class TestDemand:
    def test_deterministic(self):
        demand = DeterministicDemand(3)
        assert demand.atoms == ((3, 1.0),)
        assert demand.floor == 3

    def test_deterministic_rejects_zero(self):
        with pytest.raises(InvalidConfigError):
            DeterministicDemand(0)

    def test_random_floor_ignores_zero_demand(self):
        demand = RandomDemand({0: 0.2, 4: 0.3, 2: 0.5})
        assert demand.weights == ((0, 0.2), (2, 0.5), (4, 0.3))
        assert demand.floor == 2
        assert demand.mean == pytest.approx(2.2)

    def test_random_rejects_bad_weights(self):
        with pytest.raises(InvalidConfigError):
            RandomDemand({2: 0.5, 3: 0.4})
        with pytest.raises(InvalidConfigError):
            RandomDemand({0: 1.0})


class TestMarketConfig:
    def test_rejects_cap_below_cost(self):
        avail = AvailabilityDistribution.uniform(2)
        with pytest.raises(InvalidConfigError, match="must exceed cost"):
            MarketConfig.symmetric(2, 1.0, 1.0, avail)

    def test_rejects_two_deterministic_sellers(self):
        never = AvailabilityDistribution((1.0, 0.0))
        with pytest.raises(InvalidConfigError, match="uncertain availability"):
            MarketConfig.symmetric(2, 10.0, 1.0, never)

    def test_guaranteed_level(self, make_duopoly):
        cfg = make_duopoly([0.5, 0.5], [0.2, 0.3, 0.5], d=3)
        assert cfg.e(1) == 1
        assert cfg.e(2) == 2
        assert cfg.is_monopoly

    def test_swapped_exchanges_sellers(self, unique_market):
        swapped = unique_market.swapped()
        assert swapped.seller(1) == unique_market.seller(2)
        assert swapped.seller(2) == unique_market.seller(1)

    def test_unused_levels_do_not_compete(self, make_duopoly):
        cfg = make_duopoly([0.5, 0.5, 0.0], [0.4, 0.6, 0.0], d=2)
        assert cfg.is_monopoly
        assert cfg.trimmed().m(1) == 1

    def test_effective_trims_before_pooling(self, make_duopoly):
        cfg = make_duopoly([0.3, 0.3, 0.4, 0.0], [0.2, 0.3, 0.5], d=2)
        work = cfg.effective()
        assert (work.m(1), work.m(2)) == (2, 2)
        assert work.seller(1).probs == pytest.approx([0.3, 0.3, 0.4])

    def test_random_demand_uses_floor(self):
        avail = AvailabilityDistribution.binomial(3, 0.4)
        cfg = MarketConfig.symmetric(RandomDemand({3: 0.5, 5: 0.5}), 10.0, 1.0, avail)
        assert cfg.d == 3
        assert cfg.is_random_demand
        assert not cfg.needs_aggregation

    def test_random_demand_cannot_pool(self):
        avail = AvailabilityDistribution.binomial(3, 0.4)
        cfg = MarketConfig.symmetric(RandomDemand({1: 0.5, 3: 0.5}), 10.0, 1.0, avail)
        with pytest.raises(InvalidConfigError, match="cannot be pooled"):
            cfg.pooled()


def test_opponent():
    assert opponent(1) == 2
    assert opponent(2) == 1
    with pytest.raises(ValueError):
        opponent(3)
