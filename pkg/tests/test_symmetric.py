"""Tests for the closed-form symmetric equilibrium."""

from __future__ import annotations

import numpy as np
import pytest

from pricemix.errors import InvalidConfigError
from pricemix.market import AvailabilityDistribution, MarketConfig, RandomDemand
from pricemix.symmetric import (
    aggregate_for_small_demand,
    solve_symmetric,
    solve_symmetric_random_demand,
)
from pricemix.verification import certify


class TestClosedForm:
    def test_binomial_values(self, binomial_market):
        ne = solve_symmetric(binomial_market)
        assert ne.threshold == 1
        assert ne.boundaries == pytest.approx([8.128, 1.0 + 14.256 / 1.872, 10.0])
        assert ne.p_tilde == pytest.approx(8.128)
        assert ne.utilities == pytest.approx([8.424, 14.256, 21.384])

    def test_strategy_layout(self, binomial_market):
        strategy = solve_symmetric(binomial_market).strategy()
        assert strategy.level(1).is_pure
        assert strategy.level(1).atom_price == 10.0
        assert strategy.level(2).hi == 10.0
        assert strategy.level(3).hi == pytest.approx(strategy.level(2).lo)
        for level in (strategy.level(2), strategy.level(3)):
            assert level.cdf(np.array([level.lo, level.hi])) == pytest.approx([0.0, 1.0])

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    def test_threshold_is_half_demand(self, d):
        cfg = MarketConfig.symmetric(d, 10.0, 1.0, AvailabilityDistribution.binomial(d, 0.5))
        ne = solve_symmetric(cfg)
        assert ne.threshold == d // 2
        assert len(ne.segments) == d - d // 2
        assert ne.boundaries[-1] == 10.0
        assert all(a < b for a, b in zip(ne.boundaries, ne.boundaries[1:]))

    def test_expected_profit(self, binomial_market):
        ne = solve_symmetric(binomial_market)
        q = binomial_market.seller(1).probs
        assert ne.expected_profit == pytest.approx(q[1] * 8.424 + q[2] * 14.256 + q[3] * 21.384)

    def test_certifies(self, binomial_market):
        cert = certify(binomial_market, solve_symmetric(binomial_market).profile())
        assert cert.passed
        assert cert.structure.passed

    def test_rejects_asymmetric_market(self, unique_market):
        with pytest.raises(InvalidConfigError, match="solve-asym"):
            solve_symmetric(unique_market)


class TestMonopoly:
    def test_everything_at_cap(self, monopoly_market):
        ne = solve_symmetric(monopoly_market)
        assert ne.threshold == 2
        assert ne.segments == ()
        assert ne.p_tilde == 10.0
        assert ne.utilities == pytest.approx([9.0, 18.0])


class TestAggregation:
    def test_pool_probabilities(self):
        agg = aggregate_for_small_demand(AvailabilityDistribution.binomial(4, 0.5), 2)
        assert agg.m == 2
        assert agg.effective.probs == pytest.approx([1 / 16, 4 / 16, 11 / 16])

    def test_nothing_to_pool(self):
        with pytest.raises(InvalidConfigError, match="nothing to pool"):
            aggregate_for_small_demand(AvailabilityDistribution.binomial(2, 0.5), 2)

    def test_pooled_levels_share_strategy(self):
        cfg = MarketConfig.symmetric(2, 10.0, 1.0, AvailabilityDistribution.binomial(4, 0.5))
        ne = solve_symmetric(cfg)
        assert ne.aggregation is not None
        assert ne.threshold == 1
        strategy = ne.strategy()
        assert strategy.m == 4
        assert strategy.level(3) == strategy.level(2)
        assert strategy.level(4) == strategy.level(2)
        assert ne.utilities[2] == ne.utilities[1] == ne.utilities[3]

    def test_pooled_profile_certifies_on_original_market(self):
        cfg = MarketConfig.symmetric(2, 10.0, 1.0, AvailabilityDistribution.binomial(4, 0.5))
        cert = certify(cfg, solve_symmetric(cfg).profile())
        assert cert.passed
        assert cert.structure.passed


class TestNeverDrawnLevels:
    def test_zero_top_level_is_not_an_error(self):
        cfg = MarketConfig.symmetric(2, 10.0, 6.0, AvailabilityDistribution((0.5, 0.5, 0.0)))
        ne = solve_symmetric(cfg)
        assert ne.threshold == 2
        assert ne.p_tilde == 10.0
        cert = certify(cfg, ne.profile())
        assert cert.passed
        assert cert.structure.passed

    def test_zero_top_level_reuses_last_strategy(self, binomial_market):
        probs = (*binomial_market.seller(1).probs, 0.0)
        cfg = MarketConfig.symmetric(3, 10.0, 1.0, AvailabilityDistribution(probs))
        ne = solve_symmetric(cfg)
        reference = solve_symmetric(binomial_market)
        assert ne.p_tilde == pytest.approx(reference.p_tilde)
        assert ne.strategy().level(4) == ne.strategy().level(3)
        assert certify(cfg, ne.profile()).passed

    def test_zero_level_inside_mixing_range(self):
        cfg = MarketConfig.symmetric(3, 10.0, 1.0, AvailabilityDistribution((0.3, 0.3, 0.0, 0.4)))
        ne = solve_symmetric(cfg)
        assert ne.threshold == 1
        assert ne.segments[0] is None
        assert ne.p_tilde == pytest.approx(6.4)
        assert ne.boundaries == pytest.approx((6.4, 10.0))
        assert ne.utilities == pytest.approx([5.4, 10.8, 16.2])
        level = ne.level_strategy(2)
        assert level.is_pure
        assert level.atom_price == 10.0
        cert = certify(cfg, ne.profile())
        assert cert.passed
        assert cert.structure.passed
        assert not cert.level(1, 2).drawn


class TestRandomDemand:
    def test_single_atom_is_deterministic(self, binomial_market):
        random = MarketConfig.symmetric(
            RandomDemand({3: 1.0}), 10.0, 1.0, binomial_market.seller(1)
        )
        a = solve_symmetric_random_demand(random)
        b = solve_symmetric(binomial_market)
        assert a.threshold == b.threshold
        assert a.segments == b.segments
        assert a.utilities == b.utilities

    def test_spread_demand_certifies(self, binomial_market):
        cfg = MarketConfig.symmetric(
            RandomDemand({3: 0.5, 4: 0.5}), 10.0, 1.0, binomial_market.seller(1)
        )
        ne = solve_symmetric_random_demand(cfg)
        assert ne.threshold == 1
        cert = certify(cfg, ne.profile(), check_structure=False)
        assert cert.passed

    def test_demand_below_availability_rejected(self, binomial_market):
        cfg = MarketConfig.symmetric(
            RandomDemand({1: 0.5, 3: 0.5}), 10.0, 1.0, binomial_market.seller(1)
        )
        with pytest.raises(InvalidConfigError):
            solve_symmetric_random_demand(cfg)

    def test_needs_random_demand(self, binomial_market):
        with pytest.raises(InvalidConfigError):
            solve_symmetric_random_demand(binomial_market)
