"""Tests for the structure-enumeration equilibrium solver."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from pricemix.asymmetric import (
    BOTH,
    StructureHypothesis,
    enumerate_hypotheses,
    reconstruct_distributions,
    solve_asymmetric,
    solve_hypothesis,
)
from pricemix.errors import InvalidStrategyError, NoHypothesisError
from pricemix.market import AvailabilityDistribution, DeterministicDemand, MarketConfig
from pricemix.symmetric import solve_symmetric
from pricemix.verification import certify, check_equilibrium_structure, check_monotone_A


class TestHypotheses:
    def test_thresholds_fit_demand(self, unique_market):
        hypotheses = enumerate_hypotheses(unique_market)
        assert {h.thresholds for h in hypotheses} == {(0, 2), (1, 1), (2, 0), (1, 2), (2, 1)}
        for h in hypotheses:
            assert h.m(1) == 3
            assert h.m(2) == 3

    def test_interleavings_include_shared_breakpoints(self, binomial_market):
        events = {h.events for h in enumerate_hypotheses(binomial_market) if h.thresholds == (1, 1)}
        assert events == {(1, 2), (2, 1), (BOTH,)}

    def test_monopoly_has_no_hypothesis(self, monopoly_market):
        with pytest.raises(NoHypothesisError):
            enumerate_hypotheses(monopoly_market)

    def test_describe(self):
        hyp = StructureHypothesis(thresholds=(1, 1), events=(1, BOTH))
        assert hyp.describe() == "l=(1,1) order=1,="


class TestUniqueEquilibrium:
    def test_single_equilibrium(self, unique_market):
        found = solve_asymmetric(unique_market)
        assert len(found) == 1
        eq = found[0]
        sol = eq.solution
        assert eq.hypothesis.thresholds == (1, 1)
        assert eq.hypothesis.events == (2, 1)
        assert sol.jumps == pytest.approx((0.0, 29 / 63), abs=1e-9)
        assert sol.lower_bounds[(2, 2)] == pytest.approx(61 / 7, abs=1e-9)
        assert sol.lower_bounds[(1, 2)] == pytest.approx(1051 / 133, abs=1e-9)
        assert sol.p_tilde == pytest.approx(529 / 70, abs=1e-9)
        assert sol.cross_values[(1, 2, 2, 2)] == pytest.approx(3 / 8, abs=1e-9)
        assert sol.cross_values[(2, 3, 1, 2)] == pytest.approx(1 / 3, abs=1e-9)

    def test_profile_matches_solution(self, unique_market):
        eq = solve_asymmetric(unique_market)[0]
        profile = eq.profile
        assert profile.thresholds == (1, 1)
        assert profile.jump(2) == pytest.approx(29 / 63)
        boundary = eq.solution.lower_bounds[(1, 2)]
        assert profile.strategy(2).level(3).cdf(boundary) == pytest.approx(1 / 3, abs=1e-9)
        assert profile.strategy(1).level(3).lo == pytest.approx(529 / 70)
        assert profile.strategy(2).level(3).lo == pytest.approx(529 / 70)

    def test_certifies(self, unique_market):
        eq = solve_asymmetric(unique_market)[0]
        cert = certify(unique_market, eq.profile)
        assert cert.passed
        assert cert.structure.passed
        assert eq.residual <= 1e-10

    def test_certifies_with_exact_ties_at_cap(self, unique_market):
        eq = solve_asymmetric(unique_market)[0]
        cert = certify(unique_market, eq.profile, strict=True, check_structure=False)
        assert cert.passed, cert.max_gap

    def test_jump_with_rationed_tie_is_rejected(self, unique_market):
        hyp = StructureHypothesis(thresholds=(1, 2), events=(1,))
        (sol,) = [s for s in solve_hypothesis(unique_market, hyp) if s.jumps[0] > 0.0]
        assert sol.jumps == pytest.approx((0.625, 0.0), abs=1e-9)
        assert sol.lower_bounds[(1, 2)] == pytest.approx(1.0 + 22.95 / 2.85, abs=1e-9)
        assert sol.p_tilde == pytest.approx(8.65, abs=1e-9)
        assert sol.cross_values[(2, 3, 1, 2)] == pytest.approx(1 / 3, abs=1e-9)
        assert [name for name, ok in sol.flags.items() if not ok] == ["cap_tie_clear"]
        with pytest.raises(InvalidStrategyError, match="cap_tie_clear"):
            reconstruct_distributions(unique_market, sol)

    def test_rejected_profile_is_beaten_just_below_cap(self, unique_market):
        hyp = StructureHypothesis(thresholds=(1, 2), events=(1,))
        (sol,) = [s for s in solve_hypothesis(unique_market, hyp) if s.jumps[0] > 0.0]
        sol = replace(sol, flags={})
        profile = reconstruct_distributions(unique_market, sol)
        strict = certify(unique_market, profile, strict=True)
        assert not strict.passed
        assert strict.level(2, 2).best_response_price < unique_market.v
        assert not strict.structure.check("single_jump").passed


class TestTwoEquilibriaMarket:
    def test_single_equilibrium(self, two_equilibria_market):
        found = solve_asymmetric(two_equilibria_market)
        assert len(found) == 1
        eq = found[0]
        sol = eq.solution
        assert eq.hypothesis.thresholds == (1, 1)
        assert eq.hypothesis.events == (1, 2)
        assert sol.jumps == pytest.approx((185 / 196, 0.0), abs=1e-9)
        assert sol.lower_bounds[(1, 2)] == pytest.approx(481 / 49, abs=1e-9)
        assert sol.lower_bounds[(2, 2)] == pytest.approx(346 / 49, abs=1e-9)
        assert sol.p_tilde == pytest.approx(1433 / 245, abs=1e-9)
        assert sol.cross_values[(2, 2, 1, 2)] == pytest.approx(15 / 16, abs=1e-9)
        assert sol.cross_values[(1, 3, 2, 2)] == pytest.approx(4 / 9, abs=1e-9)

    def test_jump_with_rationed_tie_is_rejected(self, two_equilibria_market):
        hyp = StructureHypothesis(thresholds=(2, 1), events=(2,))
        (sol,) = [s for s in solve_hypothesis(two_equilibria_market, hyp) if s.jumps[1] > 0.0]
        assert sol.jumps == pytest.approx((0.0, 0.0625), abs=1e-9)
        assert sol.lower_bounds[(2, 2)] == pytest.approx(7.1875, abs=1e-9)
        assert sol.p_tilde == pytest.approx(5.95, abs=1e-9)
        assert [name for name, ok in sol.flags.items() if not ok] == ["cap_tie_clear"]

    def test_equilibrium_certifies(self, two_equilibria_market):
        (eq,) = solve_asymmetric(two_equilibria_market)
        assert certify(two_equilibria_market, eq.profile).passed
        assert certify(two_equilibria_market, eq.profile, strict=True).passed


class TestTightMargin:
    def test_breakpoints(self, fig1_market):
        found = solve_asymmetric(fig1_market)
        assert len(found) == 1
        eq = found[0]
        sol = eq.solution
        assert eq.hypothesis.thresholds == (1, 1)
        assert eq.hypothesis.events == (1, 2)
        assert sol.jumps[0] == pytest.approx(22 / 29, abs=1e-9)
        assert sol.lower_bounds[(1, 2)] == pytest.approx(6.0 + 112 / 29, abs=1e-9)
        assert sol.lower_bounds[(2, 2)] == pytest.approx(6.0 + 98 / 29, abs=1e-9)
        assert sol.p_tilde == pytest.approx(6.0 + 78.4 / 29, abs=1e-9)

    def test_structure_and_monotonicity(self, fig1_market):
        for eq in solve_asymmetric(fig1_market):
            assert check_equilibrium_structure(fig1_market, eq.profile).passed
            report = check_monotone_A(fig1_market, eq.profile)
            assert report.pairs_checked > 0
            assert report.passed, report.violations[:3]


class TestSymmetricInput:
    def test_finds_symmetric_equilibrium(self, binomial_market):
        expected = solve_symmetric(binomial_market).p_tilde
        found = solve_asymmetric(binomial_market)
        assert any(abs(eq.profile.p_tilde - expected) <= 1e-9 for eq in found)

    def test_jobs_do_not_change_result(self, unique_market):
        serial = solve_asymmetric(unique_market)
        threaded = solve_asymmetric(unique_market, jobs=4)
        assert [eq.solution.vector().tolist() for eq in serial] == [
            eq.solution.vector().tolist() for eq in threaded
        ]

    def test_swapping_sellers_mirrors_equilibria(self, unique_market):
        a = solve_asymmetric(unique_market)
        b = solve_asymmetric(unique_market.swapped())
        assert sorted(eq.profile.p_tilde for eq in a) == pytest.approx(
            sorted(eq.profile.p_tilde for eq in b)
        )


class TestMonopoly:
    def test_all_at_cap(self, monopoly_market):
        (eq,) = solve_asymmetric(monopoly_market)
        assert eq.hypothesis is None
        assert eq.profile.thresholds == (2, 2)
        cert = certify(monopoly_market, eq.profile)
        assert cert.max_gap == 0.0


class TestNeverDrawnLevels:
    def test_unused_top_level_is_trimmed(self, make_duopoly, unique_market):
        cfg = make_duopoly([0.45, 0.1, 0.4, 0.05, 0.0], [0.2, 0.2, 0.45, 0.15])
        (eq,) = solve_asymmetric(cfg)
        (reference,) = solve_asymmetric(unique_market)
        assert eq.solution.vector().tolist() == pytest.approx(reference.solution.vector().tolist())
        assert eq.profile.strategy(1).m == 4
        assert eq.profile.strategy(1).level(4) == eq.profile.strategy(1).level(3)
        cert = certify(cfg, eq.profile)
        assert cert.passed
        assert cert.structure.passed
        assert not cert.level(1, 4).drawn

    def test_zero_top_level_leaves_no_competition(self, make_duopoly):
        cfg = make_duopoly([0.5, 0.5, 0.0], [0.5, 0.5, 0.0], d=2, v=10.0, c=6.0)
        (eq,) = solve_asymmetric(cfg)
        assert eq.hypothesis is None
        assert certify(cfg, eq.profile).passed

    def test_zero_level_inside_mixing_range(self, make_duopoly):
        cfg = make_duopoly([0.3, 0.3, 0.0, 0.4], [0.3, 0.3, 0.0, 0.4])
        found = solve_asymmetric(cfg)
        matches = [eq for eq in found if eq.profile.p_tilde == pytest.approx(6.4, abs=1e-9)]
        assert matches
        profile = matches[0].profile
        assert profile.strategy(1).level(2).is_pure
        assert profile.strategy(1).level(3).hi == pytest.approx(10.0)
        assert certify(cfg, profile).passed


def test_invalid_candidate_cannot_be_reconstructed(unique_market):
    hyp = StructureHypothesis(thresholds=(2, 0), events=(2, 2))
    invalid = [sol for sol in solve_hypothesis(unique_market, hyp) if not sol.valid]
    for sol in invalid:
        with pytest.raises(InvalidStrategyError, match="invalid"):
            reconstruct_distributions(unique_market, sol)


def _random_market(rng: np.random.Generator) -> MarketConfig:
    def availability() -> AvailabilityDistribution:
        m = int(rng.integers(1, 5))
        probs = rng.dirichlet(np.ones(m + 1)) * 0.9 + 0.1 / (m + 1)
        return AvailabilityDistribution(tuple(probs / probs.sum()))

    while True:
        q1, q2 = availability(), availability()
        d = int(rng.integers(max(q1.m, q2.m), min(q1.m + q2.m, 8) + 1))
        if q1.m + q2.m > d:
            c = float(rng.uniform(0.0, 5.0))
            return MarketConfig(demand=DeterministicDemand(d), v=10.0, c=c, sellers=(q1, q2))


@pytest.mark.slow
def test_random_markets_certify():
    rng = np.random.Generator(np.random.Philox(2024))
    for _ in range(100):
        cfg = _random_market(rng)
        found = solve_asymmetric(cfg)
        if cfg.d > cfg.max_m:
            assert found, cfg
        for eq in found:
            cert = certify(cfg, eq.profile)
            assert cert.passed, (cfg, eq.hypothesis, cert.max_gap)
            assert cert.structure.passed, (cfg, cert.structure.failures)
            strict = certify(cfg, eq.profile, strict=True, check_structure=False)
            assert strict.passed, (cfg, eq.hypothesis, strict.max_gap)
