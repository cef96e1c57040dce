"""CLI entry point for pricemix."""

from __future__ import annotations

import sys
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import Any

import click
from rich.console import Console

from pricemix import __version__
from pricemix.asymmetric import solve_asymmetric
from pricemix.config import Settings, build_oligopoly, load_config, load_market
from pricemix.errors import (
    EnumerationLimitError,
    InvalidConfigError,
    InvalidStrategyError,
    NoHypothesisError,
    NumericalError,
)
from pricemix.log import configure_logging
from pricemix.oligopoly import build_heuristic, heuristic_gap
from pricemix.report import ResultRenderer
from pricemix.serialize import (
    CERTIFICATE_COLUMNS,
    OLIGOPOLY_COLUMNS,
    PROFILE_COLUMNS,
    SIMULATION_COLUMNS,
    SWEEP_COLUMNS,
    certificate_rows,
    certificate_to_dict,
    dumps_csv,
    dumps_json,
    equilibria_to_dict,
    load_profile,
    oligopoly_rows,
    oligopoly_to_dict,
    profile_rows,
    simulation_rows,
    simulation_to_dict,
    symmetric_to_dict,
)
from pricemix.simulation import simulate
from pricemix.sweep import DEFAULT_RS, SweepError, SweepRow, run_sweep_asymptotic
from pricemix.symmetric import solve_symmetric
from pricemix.verification import certify

EXIT_INVALID = 2
EXIT_UNCERTIFIED = 3
EXIT_NUMERIC = 4

console = Console()
err_console = Console(stderr=True)


@contextmanager
def exit_on_error() -> Iterator[None]:
    """Map library errors to exit codes."""
    try:
        yield
    except (InvalidConfigError, InvalidStrategyError) as e:
        err_console.print(f"[red]Error:[/red] {e}", markup=True, highlight=False)
        sys.exit(EXIT_INVALID)
    except (NumericalError, NoHypothesisError, EnumerationLimitError) as e:
        err_console.print(f"[red]Numeric failure:[/red] {e}", markup=True, highlight=False)
        sys.exit(EXIT_NUMERIC)


def _float_list(value: str) -> list[float]:
    try:
        return [float(t) for t in value.split(",") if t.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}") from e


def _int_list(value: str) -> list[int]:
    try:
        return [int(t) for t in value.split(",") if t.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}") from e


def _emit(out: str | None, text: str) -> None:
    if out is None:
        return
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


def _renderer(out: str | None) -> ResultRenderer | None:
    """Tables go to stdout unless stdout carries the artifact."""
    return None if out == "-" else ResultRenderer(console)


def _settings(**overrides: Any) -> Settings:
    values = {k: v for k, v in overrides.items() if v is not None}
    with exit_on_error():
        return replace(Settings.from_env(), **values)


config_option = click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Market file (key = value text or JSON)",
)
profile_option = click.option(
    "--profile",
    "profile_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Profile JSON written by a solve command",
)
index_option = click.option(
    "--index", default=0, show_default=True, type=click.IntRange(min=0), help="Equilibrium to read"
)
out_option = click.option("--out", "-o", help="Write the result to this file ('-' for stdout)")
format_option = click.option(
    "--format",
    "fmt",
    type=click.Choice(["json", "csv"]),
    default="json",
    show_default=True,
    help="Output format",
)
tol_option = click.option(
    "--tol", type=click.FloatRange(min=0.0, min_open=True), help="Gap tolerance relative to v - c"
)
grid_option = click.option("--grid", type=click.IntRange(min=1000), help="Certification grid size")
jobs_option = click.option("--jobs", type=click.IntRange(min=1), help="Worker threads")
strict_option = click.option(
    "--strict", is_flag=True, help="Value a price of exactly v with tie rationing"
)


@click.group()
@click.version_option(version=__version__, prog_name="pricemix")
@click.option("--verbose", "-v", count=True, help="More log output (repeatable)")
def main(verbose: int) -> None:
    """Equilibrium pricing for sellers with random availability."""
    configure_logging(verbose)


@main.command("solve-sym")
@config_option
@out_option
@format_option
@tol_option
@grid_option
@strict_option
def solve_sym(
    config_path: str,
    out: str | None,
    fmt: str,
    tol: float | None,
    grid: int | None,
    strict: bool,
) -> None:
    """Solve the symmetric equilibrium and certify it."""
    settings = _settings(tol=tol, grid=grid)
    with exit_on_error():
        cfg = load_market(config_path)
        ne = solve_symmetric(cfg)
        profile = ne.profile()
        cert = certify(cfg, profile, settings.grid, settings.tol, strict=strict)

    renderer = _renderer(out)
    if renderer:
        renderer.render_market(cfg)
        renderer.render_symmetric(ne)
        renderer.render_certificate(cert)

    if fmt == "csv":
        _emit(out, dumps_csv(PROFILE_COLUMNS, profile_rows(profile)))
    else:
        _emit(out, dumps_json(symmetric_to_dict(ne, cert)))
    sys.exit(0 if cert.passed else EXIT_UNCERTIFIED)


@main.command("solve-asym")
@config_option
@out_option
@format_option
@tol_option
@grid_option
@jobs_option
@strict_option
def solve_asym(
    config_path: str,
    out: str | None,
    fmt: str,
    tol: float | None,
    grid: int | None,
    jobs: int | None,
    strict: bool,
) -> None:
    """Find every equilibrium in the enumerated structures and certify each."""
    settings = _settings(tol=tol, grid=grid, jobs=jobs)
    with exit_on_error():
        cfg = load_market(config_path)
        found = solve_asymmetric(cfg, jobs=settings.jobs)
        if not found:
            raise NoHypothesisError("no structure hypothesis yields an equilibrium")
        certified = [
            (eq, certify(cfg, eq.profile, settings.grid, settings.tol, strict=strict))
            for eq in found
        ]

    renderer = _renderer(out)
    if renderer:
        renderer.render_market(cfg)
        renderer.render_equilibria(found)
        for _, cert in certified:
            renderer.render_certificate(cert)

    if fmt == "csv":
        rows = [
            [n, *row]
            for n, (eq, _) in enumerate(certified, start=1)
            for row in profile_rows(eq.profile)
        ]
        _emit(out, dumps_csv(("equilibrium", *PROFILE_COLUMNS), rows))
    else:
        _emit(out, dumps_json(equilibria_to_dict(cfg, certified)))
    sys.exit(0 if all(cert.passed for _, cert in certified) else EXIT_UNCERTIFIED)


@main.command("certify")
@config_option
@profile_option
@index_option
@out_option
@format_option
@tol_option
@grid_option
@strict_option
def certify_cmd(
    config_path: str,
    profile_path: str,
    index: int,
    out: str | None,
    fmt: str,
    tol: float | None,
    grid: int | None,
    strict: bool,
) -> None:
    """Check a stored profile against every unilateral deviation."""
    settings = _settings(tol=tol, grid=grid)
    with exit_on_error():
        cfg = load_market(config_path)
        profile = load_profile(profile_path, index)
        cert = certify(cfg, profile, settings.grid, settings.tol, strict=strict)

    renderer = _renderer(out)
    if renderer:
        renderer.render_certificate(cert)
    if fmt == "csv":
        _emit(out, dumps_csv(CERTIFICATE_COLUMNS, certificate_rows(cert)))
    else:
        _emit(out, dumps_json(certificate_to_dict(cert)))
    sys.exit(0 if cert.passed else EXIT_UNCERTIFIED)


@main.command("simulate")
@config_option
@profile_option
@index_option
@click.option("--rounds", type=click.IntRange(min=1), help="Simulated market rounds")
@click.option("--seed", type=click.IntRange(min=0, max=2**64 - 1), help="Random seed")
@jobs_option
@out_option
@format_option
def simulate_cmd(
    config_path: str,
    profile_path: str,
    index: int,
    rounds: int | None,
    seed: int | None,
    jobs: int | None,
    out: str | None,
    fmt: str,
) -> None:
    """Compare simulated sales with the analytic expectation."""
    settings = _settings(rounds=rounds, seed=seed, jobs=jobs)
    with exit_on_error():
        cfg = load_market(config_path)
        profile = load_profile(profile_path, index)
        report = simulate(cfg, profile, settings.rounds, settings.seed, settings.jobs)

    renderer = _renderer(out)
    if renderer:
        renderer.render_simulation(report)
    if fmt == "csv":
        _emit(out, dumps_csv(SIMULATION_COLUMNS, simulation_rows(report)))
    else:
        _emit(out, dumps_json(simulation_to_dict(report)))


def _sweep_csv(rows: list[SweepRow]) -> str:
    return dumps_csv(SWEEP_COLUMNS, [[row.r, row.m, row.p_tilde] for row in rows])


@main.command("sweep-asymptotic")
@click.option(
    "--r",
    "rs",
    default=",".join(str(r) for r in DEFAULT_RS),
    show_default=True,
    help="Binomial availability probabilities",
)
@click.option("--m-min", default=2, show_default=True, type=click.IntRange(min=1))
@click.option("--m-max", default=40, show_default=True, type=click.IntRange(min=1))
@click.option("--v", default=10.0, show_default=True, type=float, help="Price cap")
@click.option("--c", default=1.0, show_default=True, type=float, help="Transaction cost")
@jobs_option
@out_option
def sweep_asymptotic(
    rs: str,
    m_min: int,
    m_max: int,
    v: float,
    c: float,
    jobs: int | None,
    out: str | None,
) -> None:
    """Tabulate p_tilde against m for binomial sellers with d = m (CSV: r,m,p_tilde)."""
    settings = _settings(jobs=jobs)
    try:
        with exit_on_error():
            rows = run_sweep_asymptotic(_float_list(rs), m_min, m_max, v, c, settings.jobs)
    except SweepError as e:
        _emit(out, _sweep_csv(e.rows))
        err_console.print(f"[red]Sweep failed:[/red] {e}", highlight=False)
        sys.exit(EXIT_NUMERIC)
    except ValueError as e:
        raise click.BadParameter(str(e)) from e

    renderer = _renderer(out)
    if renderer:
        renderer.render_sweep(rows)
    _emit(out, _sweep_csv(rows))


@main.command("oligopoly")
@config_option
@click.option("--sellers", help="Comma-separated seller counts, overriding the file's n")
@grid_option
@click.option(
    "--cdf-grid",
    default=513,
    show_default=True,
    type=click.IntRange(min=3),
    help="Grid points per heuristic level CDF",
)
@out_option
@format_option
def oligopoly(
    config_path: str,
    sellers: str | None,
    grid: int | None,
    cdf_grid: int,
    out: str | None,
    fmt: str,
) -> None:
    """Build the n-seller heuristic and measure each level's best-response gain."""
    settings = _settings(grid=grid)
    counts: list[int | None] = list(_int_list(sellers)) if sellers else [None]
    runs = []
    with exit_on_error():
        raw = load_config(config_path)
        for n in counts:
            ocfg = build_oligopoly(raw, n)
            profile = build_heuristic(ocfg, cdf_grid)
            runs.append((ocfg, profile, heuristic_gap(ocfg, profile, settings.grid)))

    renderer = _renderer(out)
    if renderer:
        renderer.render_oligopoly(runs)
    if fmt == "csv":
        _emit(out, dumps_csv(OLIGOPOLY_COLUMNS, oligopoly_rows(runs)))
    else:
        _emit(out, dumps_json(oligopoly_to_dict(runs)))


if __name__ == "__main__":
    main()
