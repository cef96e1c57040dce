"""Tests for the command-line surface."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from pricemix import __version__
from pricemix.cli import EXIT_INVALID, EXIT_UNCERTIFIED, main
from pricemix.serialize import OLIGOPOLY_COLUMNS, dumps_json, profile_to_dict
from pricemix.strategy import PriceStrategy, StrategyProfile

BINOMIAL = """\
d = 3
v = 10
c = 1
q = [0.216, 0.432, 0.288, 0.064]
"""

UNIQUE = """\
d = 3
v = 10
c = 1
q1 = [0.45, 0.1, 0.4, 0.05]
q2 = [0.2, 0.2, 0.45, 0.15]
"""


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def binomial_file(tmp_path) -> Path:
    path = tmp_path / "binomial.txt"
    path.write_text(BINOMIAL)
    return path


def test_version(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


class TestSolveSym:
    def test_writes_certified_profile(self, runner, binomial_file, tmp_path):
        out = tmp_path / "sym.json"
        args = ["solve-sym", "--config", str(binomial_file), "--out", str(out)]
        result = runner.invoke(main, args)
        assert result.exit_code == 0, result.output
        data = json.loads(out.read_text())
        assert data["threshold"] == 1
        assert data["certificate"]["passed"] is True
        assert data["utilities"] == pytest.approx([8.424, 14.256, 21.384])

    def test_rerun_is_byte_identical(self, runner, binomial_file, tmp_path):
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        for out in (first, second):
            args = ["solve-sym", "--config", str(binomial_file), "--out", str(out)]
            assert runner.invoke(main, args).exit_code == 0
        assert first.read_bytes() == second.read_bytes()

    def test_malformed_config(self, runner, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("d = 3\nv 10\n")
        result = runner.invoke(main, ["solve-sym", "--config", str(path), "--out", "-"])
        assert result.exit_code == EXIT_INVALID
        assert "line 2" in result.output

    def test_csv_profile(self, runner, binomial_file):
        args = ["solve-sym", "--config", str(binomial_file), "--format", "csv", "--out", "-"]
        result = runner.invoke(main, args)
        assert result.exit_code == 0
        assert result.output.splitlines()[0].startswith("seller,level,piece,type")


class TestCertify:
    def test_round_trip_through_solver_output(self, runner, binomial_file, tmp_path):
        profile = tmp_path / "sym.json"
        runner.invoke(main, ["solve-sym", "--config", str(binomial_file), "--out", str(profile)])
        cert = tmp_path / "cert.json"
        args = ["certify", "--config", str(binomial_file), "--profile", str(profile)]
        result = runner.invoke(main, [*args, "--out", str(cert)])
        assert result.exit_code == 0, result.output
        assert json.loads(cert.read_text())["passed"] is True

    def test_perturbed_profile_is_rejected(self, runner, binomial_file, tmp_path):
        sym = tmp_path / "sym.json"
        runner.invoke(main, ["solve-sym", "--config", str(binomial_file), "--out", str(sym)])
        data = json.loads(sym.read_text())["profile"]
        for seller in data["sellers"]:
            seller["levels"][0] = {"level": 1, "atom": 1.0, "atom_price": 9.1, "pieces": []}
        path = tmp_path / "perturbed.json"
        path.write_text(json.dumps(data))
        args = ["certify", "--config", str(binomial_file), "--profile", str(path), "--out", "-"]
        result = runner.invoke(main, args)
        assert result.exit_code == EXIT_UNCERTIFIED

    def test_profile_for_another_market(self, runner, binomial_file, tmp_path):
        profile = StrategyProfile(
            strategies=(PriceStrategy.all_at(10.0, 2), PriceStrategy.all_at(10.0, 2)),
            thresholds=(2, 2),
            p_tilde=10.0,
        )
        path = tmp_path / "short.json"
        path.write_text(dumps_json(profile_to_dict(profile)))
        args = ["certify", "--config", str(binomial_file), "--profile", str(path)]
        assert runner.invoke(main, args).exit_code == EXIT_INVALID


def test_solve_asym_unique_market(runner, tmp_path):
    config = tmp_path / "unique.txt"
    config.write_text(UNIQUE)
    out = tmp_path / "asym.json"
    result = runner.invoke(main, ["solve-asym", "--config", str(config), "--out", str(out)])
    assert result.exit_code == 0, result.output
    data = json.loads(out.read_text())
    assert data["count"] == 1
    assert data["equilibria"][0]["hypothesis"]["thresholds"] == [1, 1]


def test_simulate(runner, binomial_file, tmp_path):
    sym = tmp_path / "sym.json"
    runner.invoke(main, ["solve-sym", "--config", str(binomial_file), "--out", str(sym)])
    out = tmp_path / "sim.json"
    args = ["simulate", "--config", str(binomial_file), "--profile", str(sym)]
    result = runner.invoke(main, [*args, "--rounds", "2000", "--seed", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    data = json.loads(out.read_text())
    assert data["rounds"] == 2000
    assert data["seed"] == 1
    assert data["probes"]


def test_sweep_csv(runner):
    args = ["sweep-asymptotic", "--r", "0.5", "--m-min", "2", "--m-max", "5", "--out", "-"]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    lines = result.output.splitlines()
    assert lines[0] == "r,m,p_tilde"
    assert [line.split(",")[1] for line in lines[1:]] == ["2", "3", "4", "5"]


def test_sweep_rejects_bad_probability(runner):
    result = runner.invoke(main, ["sweep-asymptotic", "--r", "1.5", "--out", "-"])
    assert result.exit_code == 2


def test_oligopoly_csv(runner, tmp_path):
    config = tmp_path / "family.txt"
    config.write_text("v = 10\nc = 1\nq = [0.216, 0.432, 0.288, 0.064]\n")
    args = ["oligopoly", "--config", str(config), "--sellers", "2", "--format", "csv"]
    result = runner.invoke(main, [*args, "--out", "-"])
    assert result.exit_code == 0, result.output
    lines = result.output.splitlines()
    assert lines[0] == ",".join(OLIGOPOLY_COLUMNS)
    assert len(lines) == 1 + 3
    assert all(line.startswith("2,3,") for line in lines[1:])
