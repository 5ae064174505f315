"""Scenario configuration: file schema, validation, canonical round-trip.

Rationals are written as "p/q" strings so configs survive load/dump cycles
without float drift.  See scenarios/ for annotated examples.
"""

from __future__ import annotations

from fractions import Fraction
from typing import List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .errors import BalloonError
from .params import ProtocolParams, format_rational, parse_rational

STRATEGIES = ("honest", "withholder", "power_oscillator", "clock_attacker")


class InvalidScenario(BalloonError):
    pass


def _rational(value) -> Fraction:
    try:
        return parse_rational(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(str(exc)) from None


class AsyncBurst(BaseModel):
    model_config = ConfigDict(frozen=True)
    start: float
    duration: float

    @field_validator("start", "duration")
    @classmethod
    def _non_negative(cls, v):
        if v < 0:
            raise ValueError("burst times must be non-negative")
        return float(v)


class NetworkModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)
    base_delay: Fraction = Fraction(1, 5)
    jitter: Fraction = Fraction(1, 5)
    clock_slack: int = 6
    bursts: List[AsyncBurst] = []

    @field_validator("base_delay", "jitter", mode="before")
    @classmethod
    def _coerce(cls, v):
        return _rational(v)

    @field_validator("clock_slack")
    @classmethod
    def _slack(cls, v):
        if v < 1:
            raise ValueError("clock_slack must be >= 1")
        return v


class NodeSpec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)
    share: Fraction
    strategy: Literal["honest", "withholder", "power_oscillator", "clock_attacker"] = "honest"
    # withholder: broadcast delay after minting
    withhold_horizon: Fraction = Fraction(0)
    # power_oscillator: share toggles to low_share every period seconds
    period: Fraction = Fraction(0)
    low_share: Fraction = Fraction(0)
    # clock_attacker: withheld chain released every burst_every seconds
    burst_every: Fraction = Fraction(0)

    @field_validator("share", "withhold_horizon", "period", "low_share",
                     "burst_every", mode="before")
    @classmethod
    def _coerce(cls, v):
        return _rational(v)

    @model_validator(mode="after")
    def _strategy_params(self):
        if self.share < 0:
            raise ValueError("share must be non-negative")
        if self.strategy == "withholder" and self.withhold_horizon <= 0:
            raise ValueError("withholder needs withhold_horizon > 0")
        if self.strategy == "power_oscillator" and self.period <= 0:
            raise ValueError("power_oscillator needs period > 0")
        if self.strategy == "clock_attacker" and self.burst_every <= 0:
            raise ValueError("clock_attacker needs burst_every > 0")
        return self


class ScheduleEntry(BaseModel):
    """Timed intervention: a power change or an explicit probe."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)
    time: float
    kind: Literal["power", "probe"]
    node: Optional[int] = None
    share: Optional[Fraction] = None
    name: str = ""

    @field_validator("share", mode="before")
    @classmethod
    def _coerce(cls, v):
        return None if v is None else _rational(v)

    @model_validator(mode="after")
    def _check(self):
        if self.time < 0:
            raise ValueError("schedule times must be non-negative")
        if self.kind == "power" and (self.node is None or self.share is None):
            raise ValueError("power entries need node and share")
        return self


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)
    protocol: ProtocolParams = ProtocolParams()
    network: NetworkModel = NetworkModel()
    nodes: List[NodeSpec]
    schedule: List[ScheduleEntry] = []
    mine_rate: Fraction = Fraction(4)    # total block arrivals per second
    duration: float = 200.0
    seed: int = 0
    probe_interval: float = 0.0          # 0 disables periodic probes
    tx_per_block: int = 1

    @field_validator("protocol", mode="before")
    @classmethod
    def _protocol(cls, v):
        if isinstance(v, ProtocolParams):
            return v
        try:
            return ProtocolParams.from_dict(dict(v))
        except ValueError as exc:
            raise ValueError(str(exc)) from None

    @field_validator("mine_rate", mode="before")
    @classmethod
    def _coerce(cls, v):
        return _rational(v)

    @model_validator(mode="after")
    def _check(self):
        if not self.nodes:
            raise ValueError("at least one node required")
        total = sum((n.share for n in self.nodes), Fraction(0))
        if total != 1:
            raise ValueError(f"node shares must sum to 1, got {total}")
        if self.mine_rate <= 0:
            raise ValueError("mine_rate must be positive")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.probe_interval < 0:
            raise ValueError("probe_interval must be non-negative")
        if self.tx_per_block < 0:
            raise ValueError("tx_per_block must be non-negative")
        # the sampler's propagation assumption must hold outside bursts
        if self.network.base_delay + self.network.jitter > self.protocol.delay_bound:
            raise ValueError("base_delay + jitter exceeds the protocol delay bound")
        for entry in self.schedule:
            if entry.kind == "power" and not 0 <= (entry.node or 0) < len(self.nodes):
                raise ValueError(f"schedule references unknown node {entry.node}")
        return self


def _plain(value):
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def scenario_to_dict(config: ScenarioConfig) -> dict:
    data = {
        "protocol": config.protocol.to_dict(),
        "network": _plain(config.network.model_dump()),
        "nodes": [_plain(n.model_dump()) for n in config.nodes],
        "schedule": [_plain(s.model_dump()) for s in config.schedule],
        "mine_rate": format_rational(config.mine_rate),
        "duration": config.duration,
        "seed": config.seed,
        "probe_interval": config.probe_interval,
        "tx_per_block": config.tx_per_block,
    }
    return data


def scenario_from_dict(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig(**data)
    except Exception as exc:
        raise InvalidScenario(str(exc)) from None


def dump_scenario(config: ScenarioConfig) -> str:
    return yaml.safe_dump(scenario_to_dict(config), sort_keys=True)


def load_scenario(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidScenario(f"bad yaml: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidScenario("scenario must be a mapping")
    return scenario_from_dict(data)


def load_scenario_file(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return load_scenario(fh.read())
    except OSError as exc:
        raise InvalidScenario(f"cannot read {path}: {exc}") from None
