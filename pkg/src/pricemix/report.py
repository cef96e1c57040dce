"""Terminal rendering of solver, verifier and simulator results."""

from __future__ import annotations

from collections.abc import Sequence
from typing import TYPE_CHECKING

from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from pricemix.strategy import CdfSegment

if TYPE_CHECKING:
    from pricemix.asymmetric import Equilibrium
    from pricemix.market import MarketConfig
    from pricemix.oligopoly import OligopolyConfig, OligopolyGap, OligopolyProfile
    from pricemix.simulation import SimulationReport
    from pricemix.strategy import StrategyProfile
    from pricemix.sweep import SweepRow
    from pricemix.symmetric import SymmetricNE
    from pricemix.verification import EquilibriumCertificate


def _fmt(x: float | None, digits: int = 6) -> str:
    return "-" if x is None else f"{x:.{digits}f}"


class ResultRenderer:
    """Renders equilibria, certificates and reports to the terminal."""

    def __init__(self, console: Console | None = None) -> None:
        self._console = console or Console()

    def render_market(self, cfg: MarketConfig) -> None:
        demand = (
            ", ".join(f"{d}: {r:g}" for d, r in cfg.demand.atoms)
            if cfg.is_random_demand
            else str(cfg.d)
        )
        summary = Text()
        summary.append(f"demand: {demand}\n")
        summary.append(f"v = {cfg.v:g}, c = {cfg.c:g}\n")
        for k in (1, 2):
            probs = ", ".join(f"{p:.4g}" for p in cfg.seller(k).probs)
            summary.append(f"q{k} = [{probs}]\n")
        self._console.print(Panel(summary, title="Market", border_style="blue"))

    def render_profile(self, profile: StrategyProfile, title: str = "Equilibrium") -> None:
        """Render one row per support piece of every mixing level."""
        table = Table(title=title)
        table.add_column("Seller", justify="right")
        table.add_column("Level", justify="right")
        table.add_column("Support")
        table.add_column("Atom at v", justify="right")
        table.add_column("CDF pieces")

        for k in (1, 2):
            for i, level in enumerate(profile.strategy(k).levels, start=1):
                if level.is_pure:
                    support = Text(f"{{{level.atom_price:g}}}", style="dim")
                    pieces = ""
                else:
                    support = Text(f"[{level.lo:.6f}, {level.hi:.6f}]")
                    pieces = str(len(level.pieces))
                    if all(isinstance(p, CdfSegment) for p in level.pieces):
                        pieces += " closed form"
                table.add_row(str(k), str(i), support, _fmt(level.atom, 4), pieces)

        self._console.print(table)
        self._console.print(
            f"thresholds l = {profile.thresholds}, p_tilde = [bold]{profile.p_tilde:.6f}[/bold]"
        )

    def render_symmetric(self, ne: SymmetricNE) -> None:
        if ne.aggregation is not None:
            self._console.print(
                f"[dim]availability pooled at d = {ne.aggregation.d} "
                f"(m = {ne.aggregation.original.m})[/dim]"
            )
        self.render_profile(ne.profile(), title="Symmetric equilibrium")
        self._console.print(f"expected profit per seller: {ne.expected_profit:.6f}")

    def render_equilibria(self, found: Sequence[Equilibrium]) -> None:
        if not found:
            self._console.print(
                Panel("[red]No equilibrium in the enumerated structures[/red]", border_style="red")
            )
            return
        noun = "equilibrium" if len(found) == 1 else "equilibria"
        self._console.print(f"[bold]{len(found)}[/bold] {noun} found")
        for n, eq in enumerate(found, start=1):
            label = eq.hypothesis.describe() if eq.hypothesis else "no competition"
            jumps = eq.solution.jumps if eq.solution else (0.0, 0.0)
            self.render_profile(eq.profile, title=f"#{n}: {label}")
            self._console.print(f"jumps at v: f1 = {jumps[0]:.6f}, f2 = {jumps[1]:.6f}")

    def render_certificate(self, cert: EquilibriumCertificate) -> None:
        """Render best-response gaps and the structure checks."""
        table = Table(title="Best-response certificate")
        table.add_column("Seller", justify="right")
        table.add_column("Level", justify="right")
        table.add_column("Utility", justify="right")
        table.add_column("Best response", justify="right")
        table.add_column("At price", justify="right")
        table.add_column("Gap", justify="right")
        table.add_column("Tie loss at v", justify="right")

        limit = cert.tol * cert.scale
        for g in cert.levels:
            style = "green" if g.gap <= limit or not g.drawn else "bold red"
            table.add_row(
                str(g.seller),
                str(g.level),
                _fmt(g.equilibrium_utility),
                _fmt(g.best_response_utility),
                _fmt(g.best_response_price),
                Text(f"{g.gap:.3e}", style=style),
                f"{g.cap_tie_shortfall:.3e}" if g.cap_tie_shortfall else "",
            )
        self._console.print(table)

        if cert.structure is not None:
            checks = Table(title="Structure checks")
            checks.add_column("Property")
            checks.add_column("Result")
            checks.add_column("Detail", max_width=60)
            for c in cert.structure.checks:
                result = Text("pass", style="green") if c.passed else Text("FAIL", style="bold red")
                checks.add_row(c.name, result, c.detail)
            self._console.print(checks)

        gap = f"max gap {cert.max_gap:.3e}"
        if cert.passed:
            self._console.print(f"[green]certified[/green] ({gap} <= {limit:.3e})")
        else:
            self._console.print(f"[bold red]not certified[/bold red] ({gap} > {limit:.3e})")

    def render_simulation(self, report: SimulationReport, z_bound: float = 4.0) -> None:
        table = Table(title=f"Simulation, {report.rounds} rounds, seed {report.seed}")
        table.add_column("Seller", justify="right")
        table.add_column("Level", justify="right")
        table.add_column("Price", justify="right")
        table.add_column("Rounds", justify="right")
        table.add_column("Empirical", justify="right")
        table.add_column("Analytic", justify="right")
        table.add_column("z", justify="right")

        for p in report.probes:
            if p.z is None:
                z = Text("no data", style="dim")
            else:
                z = Text(f"{p.z:+.2f}", style="red" if abs(p.z) > z_bound else "")
            table.add_row(
                str(p.seller),
                str(p.level),
                _fmt(p.price, 4),
                str(p.samples),
                _fmt(p.mean, 4),
                _fmt(p.analytic, 4),
                z,
            )
        self._console.print(table)
        sold = report.mean_units_sold
        self._console.print(
            f"mean units sold per round: seller 1 {sold[0]:.4f}, seller 2 {sold[1]:.4f}; "
            f"{report.fraction_within(z_bound):.1%} of probes within |z| <= {z_bound:g}"
        )

    def render_sweep(self, rows: Sequence[SweepRow]) -> None:
        rs = sorted({row.r for row in rows})
        ms = sorted({row.m for row in rows})
        lookup = {(row.r, row.m): row.p_tilde for row in rows}
        table = Table(title="p_tilde against m (binomial availability, d = m)")
        table.add_column("m", justify="right")
        for r in rs:
            table.add_column(f"r = {r:g}", justify="right")
        for m in ms:
            table.add_row(str(m), *(_fmt(lookup.get((r, m)), 4) for r in rs))
        self._console.print(table)

    def render_oligopoly(
        self, runs: Sequence[tuple[OligopolyConfig, OligopolyProfile, list[OligopolyGap]]]
    ) -> None:
        table = Table(title="Heuristic best-response relative difference")
        table.add_column("n", justify="right")
        table.add_column("d", justify="right")
        table.add_column("Level", justify="right")
        table.add_column("Proposed", justify="right")
        table.add_column("Best response", justify="right")
        table.add_column("Relative difference", justify="right")
        for ocfg, _, gaps in runs:
            for g in gaps:
                table.add_row(
                    str(ocfg.n),
                    str(ocfg.d),
                    str(g.level),
                    _fmt(g.proposed_utility),
                    _fmt(g.best_response_utility),
                    f"{g.relative_difference:.3e}",
                )
        self._console.print(table)
