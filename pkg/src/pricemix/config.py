"""Market configuration files and runtime settings.

Market files are either JSON objects or flat text::

    # three units each, tight margin
    d = 3
    v = 10
    c = 6
    q1 = [0.3, 0.2, 0.2, 0.3]
    q2 = [0.4, 0.2, 0.2, 0.2]

Random demand replaces `d` with `demand_weights = {2: 0.5, 4: 0.5}`.
Omitting `q2` makes the sellers identical; `q` is accepted for `q1`.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from pricemix.errors import InvalidConfigError
from pricemix.market import (
    AvailabilityDistribution,
    DemandModel,
    DeterministicDemand,
    MarketConfig,
    RandomDemand,
)
from pricemix.oligopoly import OligopolyConfig

KEYS = ("d", "demand_weights", "v", "c", "q1", "q2", "n")
ALIASES = {"q": "q1"}

_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+?)\s*$")


@dataclass
class RawConfig:
    """Parsed key/value pairs with the place each one came from."""

    source: str
    values: dict[str, Any] = field(default_factory=dict)
    locations: dict[str, str] = field(default_factory=dict)

    def where(self, key: str) -> str:
        return f"{self.source}: {self.locations.get(key, f'field {key}')}"

    def require(self, key: str) -> Any:
        if key not in self.values:
            raise InvalidConfigError(f"missing required key '{key}'", location=self.source)
        return self.values[key]

    def add(self, key: str, value: Any, location: str) -> None:
        key = ALIASES.get(key, key)
        if key not in KEYS:
            raise InvalidConfigError(f"unknown key '{key}'", location=f"{self.source}: {location}")
        if key in self.values:
            raise InvalidConfigError(
                f"duplicate key '{key}' (first set at {self.locations[key]})",
                location=f"{self.source}: {location}",
            )
        self.values[key] = value
        self.locations[key] = location


def _number(text: str) -> float:
    value = float(text)
    return int(value) if re.fullmatch(r"[+-]?\d+", text.strip()) else value


def _parse_value(text: str) -> Any:
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise ValueError("unterminated vector")
        body = text[1:-1].strip()
        return [_number(t) for t in body.split(",")] if body else []
    if text.startswith("{"):
        if not text.endswith("}"):
            raise ValueError("unterminated map")
        out: dict[int, float] = {}
        for item in filter(None, (t.strip() for t in text[1:-1].split(","))):
            key, sep, value = item.partition(":")
            if not sep:
                raise ValueError(f"map entry '{item}' has no ':'")
            d = int(key.strip())
            if d in out:
                raise ValueError(f"demand {d} listed twice")
            out[d] = float(value)
        return out
    return _number(text)


def parse_text(text: str, source: str = "<config>") -> RawConfig:
    """Parse the flat key = value format."""
    raw = RawConfig(source=source)
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0]
        if not content.strip():
            continue
        location = f"line {number}"
        match = _LINE.match(content)
        if not match:
            raise InvalidConfigError(
                f"expected 'key = value', got '{content.strip()}'",
                location=f"{source}: {location}",
            )
        try:
            value = _parse_value(match.group(2))
        except ValueError as e:
            raise InvalidConfigError(str(e), location=f"{source}: {location}") from e
        raw.add(match.group(1), value, location)
    return raw


def parse_json(text: str, source: str = "<config>") -> RawConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidConfigError(e.msg, location=f"{source}: line {e.lineno}") from e
    if not isinstance(data, dict):
        raise InvalidConfigError("top level must be an object", location=source)
    raw = RawConfig(source=source)
    for key, value in data.items():
        if key == "demand_weights" and isinstance(value, dict):
            try:
                value = {int(d): float(r) for d, r in value.items()}
            except (TypeError, ValueError) as e:
                raise InvalidConfigError(str(e), location=f"{source}: field {key}") from e
        raw.add(key, value, f"field {key}")
    return raw


def load_config(path: str | Path) -> RawConfig:
    """Read a market file, JSON when it starts with '{'."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise InvalidConfigError(f"cannot read config: {e.strerror}", location=str(path)) from e
    if text.lstrip().startswith("{"):
        return parse_json(text, str(path))
    return parse_text(text, str(path))


def _availability(raw: RawConfig, key: str) -> AvailabilityDistribution:
    value = raw.values[key]
    if not isinstance(value, list) or not all(isinstance(p, int | float) for p in value):
        raise InvalidConfigError(
            f"'{key}' must be a vector of probabilities", location=raw.where(key)
        )
    try:
        return AvailabilityDistribution(tuple(value))
    except InvalidConfigError as e:
        raise InvalidConfigError(str(e), location=raw.where(key)) from e


def _scalar(raw: RawConfig, key: str) -> float:
    value = raw.require(key)
    if not isinstance(value, int | float):
        raise InvalidConfigError(f"'{key}' must be a number", location=raw.where(key))
    return float(value)


def _integer(raw: RawConfig, key: str) -> int:
    value = raw.values[key]
    if not isinstance(value, int) or isinstance(value, bool):
        raise InvalidConfigError(f"'{key}' must be an integer", location=raw.where(key))
    return value


def _demand(raw: RawConfig) -> DemandModel:
    has_d, has_weights = "d" in raw.values, "demand_weights" in raw.values
    if has_d == has_weights:
        raise InvalidConfigError(
            "exactly one of 'd' and 'demand_weights' is required", location=raw.source
        )
    try:
        if has_d:
            return DeterministicDemand(_integer(raw, "d"))
        weights = raw.values["demand_weights"]
        if not isinstance(weights, dict):
            raise InvalidConfigError("'demand_weights' must be a map {d: r}")
        return RandomDemand(tuple(weights.items()))
    except InvalidConfigError as e:
        key = "d" if has_d else "demand_weights"
        raise InvalidConfigError(str(e), location=raw.where(key)) from e


def build_market(raw: RawConfig) -> MarketConfig:
    """Turn parsed values into a two-seller market.

    Raises:
        InvalidConfigError: Missing, malformed or inconsistent values
    """
    if "n" in raw.values and raw.values["n"] != 2:
        raise InvalidConfigError(
            "'n' other than 2 needs the oligopoly command", location=raw.where("n")
        )
    raw.require("q1")
    q1 = _availability(raw, "q1")
    q2 = _availability(raw, "q2") if "q2" in raw.values else q1
    try:
        return MarketConfig(
            demand=_demand(raw), v=_scalar(raw, "v"), c=_scalar(raw, "c"), sellers=(q1, q2)
        )
    except InvalidConfigError as e:
        if e.location:
            raise
        raise InvalidConfigError(str(e), location=raw.source) from e


def build_oligopoly(raw: RawConfig, n: int | None = None) -> OligopolyConfig:
    """Turn parsed values into an n-seller market.

    Args:
        raw: Parsed config; 'd' defaults to max(n, m)
        n: Seller count overriding the file's 'n'
    """
    if "q2" in raw.values:
        raise InvalidConfigError(
            "oligopoly sellers are identical; drop 'q2'", location=raw.where("q2")
        )
    if "demand_weights" in raw.values:
        raise InvalidConfigError(
            "oligopoly needs deterministic demand", location=raw.where("demand_weights")
        )
    if n is None:
        raw.require("n")
        n = _integer(raw, "n")
    raw.require("q1")
    avail = _availability(raw, "q1")
    v, c = _scalar(raw, "v"), _scalar(raw, "c")
    try:
        if "d" in raw.values:
            return OligopolyConfig(n=n, availability=avail, d=_integer(raw, "d"), v=v, c=c)
        return OligopolyConfig.with_default_demand(n, avail, v, c)
    except InvalidConfigError as e:
        if e.location:
            raise
        raise InvalidConfigError(str(e), location=raw.source) from e


def load_market(path: str | Path) -> MarketConfig:
    return build_market(load_config(path))


def _env(name: str, cast: type, default: Any) -> Any:
    value = os.environ.get(name)
    if value is None or value == "":
        return default
    try:
        return cast(value)
    except ValueError as e:
        raise InvalidConfigError(f"cannot parse {value!r}", location=name) from e


@dataclass(frozen=True)
class Settings:
    """Numeric defaults for the solvers, verifiers and simulator."""

    tol: float = 1e-6
    grid: int = 10_000
    jobs: int = 1
    rounds: int = 1_000_000
    seed: int = 0

    @classmethod
    def from_env(cls) -> Settings:
        """Create settings from environment variables.

        Environment variables:
            PRICEMIX_TOL: Certification tolerance as a fraction of v - c
            PRICEMIX_GRID: Certification grid size
            PRICEMIX_JOBS: Worker threads
            PRICEMIX_ROUNDS: Simulated rounds
            PRICEMIX_SEED: Simulation seed
        """
        defaults = cls()
        return cls(
            tol=_env("PRICEMIX_TOL", float, defaults.tol),
            grid=_env("PRICEMIX_GRID", int, defaults.grid),
            jobs=_env("PRICEMIX_JOBS", int, defaults.jobs),
            rounds=_env("PRICEMIX_ROUNDS", int, defaults.rounds),
            seed=_env("PRICEMIX_SEED", int, defaults.seed),
        )
