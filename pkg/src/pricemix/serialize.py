"""JSON and CSV artifacts for profiles, certificates and reports.

Floats are written with their shortest exact representation in JSON and
with 17 significant digits in CSV, so reading a profile back reproduces
every coefficient bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from pricemix.asymmetric import Equilibrium
from pricemix.errors import InvalidStrategyError
from pricemix.market import MarketConfig, RandomDemand
from pricemix.oligopoly import OligopolyConfig, OligopolyGap, OligopolyProfile
from pricemix.simulation import SimulationReport
from pricemix.strategy import CdfSegment, GridSegment, LevelStrategy, PriceStrategy, StrategyProfile
from pricemix.symmetric import SymmetricNE
from pricemix.verification import EquilibriumCertificate, StructureReport


def _num(x: float | None) -> float | None:
    if x is None or not math.isfinite(x):
        return None
    return float(x)


def market_to_dict(cfg: MarketConfig) -> dict[str, Any]:
    out: dict[str, Any] = {}
    if isinstance(cfg.demand, RandomDemand):
        out["demand_weights"] = {str(d): r for d, r in cfg.demand.weights}
    else:
        out["d"] = cfg.d
    out.update(v=cfg.v, c=cfg.c, q1=list(cfg.seller(1).probs), q2=list(cfg.seller(2).probs))
    return out


def _piece_to_dict(piece: Any) -> dict[str, Any]:
    if isinstance(piece, CdfSegment):
        return {
            "type": "closed_form",
            "lo": piece.lo,
            "hi": piece.hi,
            "alpha": piece.alpha,
            "beta": piece.beta,
            "gamma": piece.gamma,
            "c": piece.c,
        }
    if isinstance(piece, GridSegment):
        return {
            "type": "grid",
            "c": piece.c,
            "points": len(piece.xs),
            "xs": list(piece.xs),
            "ps": list(piece.ps),
        }
    raise TypeError(f"cannot serialize CDF piece {type(piece).__name__}")


def _piece_from_dict(data: dict[str, Any]) -> CdfSegment | GridSegment:
    kind = data.get("type")
    if kind == "closed_form":
        return CdfSegment(
            lo=float(data["lo"]),
            hi=float(data["hi"]),
            alpha=float(data["alpha"]),
            beta=float(data["beta"]),
            gamma=float(data["gamma"]),
            c=float(data["c"]),
        )
    if kind == "grid":
        return GridSegment(xs=tuple(data["xs"]), ps=tuple(data["ps"]), c=float(data["c"]))
    raise InvalidStrategyError(f"unknown CDF piece type {kind!r}")


def level_to_dict(level: LevelStrategy) -> dict[str, Any]:
    return {
        "atom": level.atom,
        "atom_price": level.atom_price,
        "pieces": [_piece_to_dict(p) for p in level.pieces],
    }


def strategy_to_dict(strategy: PriceStrategy) -> list[dict[str, Any]]:
    return [{"level": i, **level_to_dict(lvl)} for i, lvl in enumerate(strategy.levels, start=1)]


def profile_to_dict(profile: StrategyProfile) -> dict[str, Any]:
    return {
        "thresholds": list(profile.thresholds),
        "p_tilde": profile.p_tilde,
        "sellers": [
            {"seller": k, "levels": strategy_to_dict(profile.strategy(k))} for k in (1, 2)
        ],
    }


def _strategy_from_list(levels: list[dict[str, Any]]) -> PriceStrategy:
    out = []
    for item in sorted(levels, key=lambda lv: lv["level"]):
        price = item.get("atom_price")
        out.append(
            LevelStrategy(
                pieces=tuple(_piece_from_dict(p) for p in item.get("pieces", [])),
                atom=float(item.get("atom", 0.0)),
                atom_price=None if price is None else float(price),
            )
        )
    return PriceStrategy(tuple(out))


def profile_from_dict(data: dict[str, Any]) -> StrategyProfile:
    """Rebuild a profile written by `profile_to_dict`.

    Raises:
        InvalidStrategyError: Missing fields or violated strategy invariants
    """
    try:
        sellers = sorted(data["sellers"], key=lambda s: s["seller"])
        return StrategyProfile(
            strategies=tuple(_strategy_from_list(s["levels"]) for s in sellers),
            thresholds=tuple(data["thresholds"]),
            p_tilde=float(data["p_tilde"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, InvalidStrategyError):
            raise
        raise InvalidStrategyError(f"malformed profile: {e!r}") from e


def load_profile(path: str | Path, index: int = 0) -> StrategyProfile:
    """Read a profile from a bare profile file or a solver output.

    Solver outputs holding several equilibria are indexed by `index`.
    """
    try:
        data = json.loads(Path(path).read_text())
    except OSError as e:
        raise InvalidStrategyError(f"{path}: cannot read profile: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise InvalidStrategyError(f"{path}: line {e.lineno}: {e.msg}") from e
    if "equilibria" in data:
        try:
            data = data["equilibria"][index]
        except IndexError as e:
            raise InvalidStrategyError(
                f"{path}: no equilibrium #{index} among {len(data['equilibria'])}"
            ) from e
    if "profile" in data:
        data = data["profile"]
    return profile_from_dict(data)


def structure_to_dict(report: StructureReport) -> dict[str, Any]:
    return {
        "passed": report.passed,
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in report.checks],
    }


def certificate_to_dict(cert: EquilibriumCertificate) -> dict[str, Any]:
    return {
        "passed": cert.passed,
        "tol": cert.tol,
        "grid_size": cert.grid_size,
        "strict": cert.strict,
        "max_gap": cert.max_gap,
        "expected_profit": list(cert.expected_profit),
        "levels": [
            {
                "seller": g.seller,
                "level": g.level,
                "equilibrium_utility": g.equilibrium_utility,
                "best_response_utility": g.best_response_utility,
                "best_response_price": g.best_response_price,
                "gap": g.gap,
                "relative_gap": _num(g.relative_gap),
                "cap_tie_shortfall": g.cap_tie_shortfall,
                "probability": g.probability,
            }
            for g in cert.levels
        ],
        "structure": None if cert.structure is None else structure_to_dict(cert.structure),
    }


def symmetric_to_dict(
    ne: SymmetricNE, cert: EquilibriumCertificate | None = None
) -> dict[str, Any]:
    return {
        "market": market_to_dict(ne.config),
        "threshold": ne.threshold,
        "p_tilde": ne.p_tilde,
        "boundaries": list(ne.boundaries),
        "aggregated_to": None if ne.aggregation is None else ne.aggregation.d,
        "utilities": list(ne.utilities),
        "expected_profit": ne.expected_profit,
        "profile": profile_to_dict(ne.profile()),
        "certificate": None if cert is None else certificate_to_dict(cert),
    }


def equilibrium_to_dict(
    eq: Equilibrium, cert: EquilibriumCertificate | None = None
) -> dict[str, Any]:
    out: dict[str, Any] = {"hypothesis": None, "jumps": [0.0, 0.0], "residual": eq.residual}
    if eq.hypothesis is not None:
        out["hypothesis"] = {
            "thresholds": list(eq.hypothesis.thresholds),
            "events": list(eq.hypothesis.events),
            "description": eq.hypothesis.describe(),
        }
    if eq.solution is not None:
        out["jumps"] = list(eq.solution.jumps)
        out["lower_bounds"] = [
            {"seller": k, "level": i, "price": p}
            for (k, i), p in sorted(eq.solution.lower_bounds.items())
        ]
        out["utilities"] = [
            {"seller": k, "level": i, "utility": u}
            for (k, i), u in sorted(eq.solution.utilities.items())
        ]
    out["p_tilde"] = eq.profile.p_tilde
    out["profile"] = profile_to_dict(eq.profile)
    out["certificate"] = None if cert is None else certificate_to_dict(cert)
    return out


def equilibria_to_dict(
    cfg: MarketConfig, found: Sequence[tuple[Equilibrium, EquilibriumCertificate | None]]
) -> dict[str, Any]:
    return {
        "market": market_to_dict(cfg),
        "count": len(found),
        "equilibria": [equilibrium_to_dict(eq, cert) for eq, cert in found],
    }


def simulation_to_dict(report: SimulationReport) -> dict[str, Any]:
    return {
        "rounds": report.rounds,
        "seed": report.seed,
        "max_abs_z": report.max_abs_z,
        "mean_units_sold": list(report.mean_units_sold),
        "probes": [
            {
                "seller": p.seller,
                "level": p.level,
                "price": p.price,
                "samples": p.samples,
                "mean": p.mean,
                "std_error": p.std_error,
                "analytic": p.analytic,
                "z": p.z,
            }
            for p in report.probes
        ],
    }


def oligopoly_to_dict(
    runs: Sequence[tuple[OligopolyConfig, OligopolyProfile, list[OligopolyGap]]],
) -> dict[str, Any]:
    return {
        "runs": [
            {
                "n": ocfg.n,
                "d": ocfg.d,
                "threshold": profile.threshold,
                "p_tilde": profile.p_tilde,
                "utilities": list(profile.utilities),
                "gaps": [
                    {
                        "level": g.level,
                        "proposed_utility": g.proposed_utility,
                        "best_response_utility": g.best_response_utility,
                        "best_response_price": g.best_response_price,
                        "relative_difference": _num(g.relative_difference),
                    }
                    for g in gaps
                ],
                "strategy": strategy_to_dict(profile.strategy),
            }
            for ocfg, profile, gaps in runs
        ]
    }


def dumps_json(data: dict[str, Any]) -> str:
    return json.dumps(data, indent=2, allow_nan=False) + "\n"


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def dumps_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buffer.getvalue()


PROFILE_COLUMNS = (
    "seller",
    "level",
    "piece",
    "type",
    "lo",
    "hi",
    "alpha",
    "beta",
    "gamma",
    "atom",
    "atom_price",
)


def profile_rows(profile: StrategyProfile) -> list[list[Any]]:
    """One row per CDF piece, or one row for a level priced at a single point."""
    rows: list[list[Any]] = []
    for k in (1, 2):
        for i, level in enumerate(profile.strategy(k).levels, start=1):
            if not level.pieces:
                blank = [None] * 5
                rows.append([k, i, 0, "atom", *blank, level.atom, level.atom_price])
            for j, piece in enumerate(level.pieces, start=1):
                closed = isinstance(piece, CdfSegment)
                rows.append(
                    [
                        k,
                        i,
                        j,
                        "closed_form" if closed else "grid",
                        piece.lo,
                        piece.hi,
                        piece.alpha if closed else None,
                        piece.beta if closed else None,
                        piece.gamma if closed else None,
                        level.atom,
                        level.atom_price,
                    ]
                )
    return rows


CERTIFICATE_COLUMNS = (
    "seller",
    "level",
    "equilibrium_utility",
    "best_response_utility",
    "best_response_price",
    "gap",
    "relative_gap",
    "cap_tie_shortfall",
    "probability",
)


def certificate_rows(cert: EquilibriumCertificate) -> list[list[Any]]:
    return [
        [
            g.seller,
            g.level,
            g.equilibrium_utility,
            g.best_response_utility,
            g.best_response_price,
            g.gap,
            _num(g.relative_gap),
            g.cap_tie_shortfall,
            g.probability,
        ]
        for g in cert.levels
    ]


SIMULATION_COLUMNS = ("seller", "level", "price", "samples", "mean", "std_error", "analytic", "z")


def simulation_rows(report: SimulationReport) -> list[list[Any]]:
    return [
        [p.seller, p.level, p.price, p.samples, p.mean, p.std_error, p.analytic, p.z]
        for p in report.probes
    ]


OLIGOPOLY_COLUMNS = (
    "n",
    "d",
    "level",
    "proposed_utility",
    "best_response_utility",
    "best_response_price",
    "relative_difference",
)


def oligopoly_rows(
    runs: Sequence[tuple[OligopolyConfig, OligopolyProfile, list[OligopolyGap]]],
) -> list[list[Any]]:
    return [
        [
            ocfg.n,
            ocfg.d,
            g.level,
            g.proposed_utility,
            g.best_response_utility,
            g.best_response_price,
            _num(g.relative_difference),
        ]
        for ocfg, _, gaps in runs
        for g in gaps
    ]


SWEEP_COLUMNS = ("r", "m", "p_tilde")
