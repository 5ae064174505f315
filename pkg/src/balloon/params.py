"""Protocol parameters shared by every component.

All rate-like quantities are exact rationals so that vote thresholds and
chain-count arithmetic never depend on float rounding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Any, Union

RationalLike = Union[Fraction, int, str, float]


def parse_rational(value: RationalLike) -> Fraction:
    """Coerce config-level values ("3/2", 3, 1.5, Fraction) to Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise ValueError(f"cannot interpret {value!r} as a rational")


def format_rational(value: Fraction) -> str:
    """Canonical text form: "p" for integers, "p/q" otherwise."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class ProtocolParams:
    """Consensus constants fixed at genesis.

    difficulty            required proof-of-work difficulty; 1 accepts any hash
    target_rate           ideal per-chain concurrency the sampler aims for
    vote_threshold        relative rate deviation below which a chain votes
                          "no change"
    shrink_limit          maximum relative shrink factor on a downward view
                          change (floor is ceil(n * (1 - shrink_limit)))
    epoch_clocks          clock span of one voting epoch
    sample_clock_gap      minimum clock distance between a block's guider and
                          its sampling reference
    sample_delay_multiple multiplier on delay_bound for the reference's
                          minimum age
    delay_bound           assumed network propagation bound, in seconds
    sample_cap            maximum number of sample digests carried per block
    confirm_margin        subtree-weight lead required for confirmation
    initial_chains        sub-chain count of the initial view (must be 1)
    """

    difficulty: Fraction = Fraction(1)
    target_rate: Fraction = Fraction(4)
    vote_threshold: Fraction = Fraction(1, 2)
    shrink_limit: Fraction = Fraction(1, 4)
    epoch_clocks: int = 8
    sample_clock_gap: int = 2
    sample_delay_multiple: int = 2
    delay_bound: Fraction = Fraction(1)
    sample_cap: int = 64
    confirm_margin: Fraction = Fraction(6)
    initial_chains: int = 1

    _RATIONAL_FIELDS = (
        "difficulty",
        "target_rate",
        "vote_threshold",
        "shrink_limit",
        "delay_bound",
        "confirm_margin",
    )
    _INT_FIELDS = (
        "epoch_clocks",
        "sample_clock_gap",
        "sample_delay_multiple",
        "sample_cap",
        "initial_chains",
    )

    def __post_init__(self) -> None:
        for name in self._RATIONAL_FIELDS:
            object.__setattr__(self, name, parse_rational(getattr(self, name)))
        for name in self._INT_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"{name} must be an integer, got {value!r}")
        self.validate()

    def validate(self) -> None:
        if self.difficulty < 1:
            raise ValueError("difficulty must be >= 1")
        if self.target_rate <= 0:
            raise ValueError("target_rate must be positive")
        # vote_threshold values >= 1 are permitted: they make downward votes
        # impossible and (for large values) disable view changes entirely,
        # which the ordering tests rely on.
        if self.vote_threshold <= 0:
            raise ValueError("vote_threshold must be positive")
        if not (0 < self.shrink_limit < 1):
            raise ValueError("shrink_limit must be in (0, 1)")
        if self.epoch_clocks < 1:
            raise ValueError("epoch_clocks must be >= 1")
        if self.sample_clock_gap < 1:
            raise ValueError("sample_clock_gap must be >= 1")
        if self.sample_delay_multiple < 0:
            raise ValueError("sample_delay_multiple must be >= 0")
        if self.delay_bound <= 0:
            raise ValueError("delay_bound must be positive")
        if self.sample_cap < 1:
            raise ValueError("sample_cap must be >= 1")
        if self.confirm_margin < 0:
            raise ValueError("confirm_margin must be >= 0")
        if self.initial_chains != 1:
            raise ValueError("initial_chains must be 1")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = format_rational(value) if isinstance(value, Fraction) else value
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ProtocolParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown protocol parameters: {sorted(unknown)}")
        return cls(**data)

    def to_payload(self) -> bytes:
        """Deterministic byte encoding carried in the initial genesis payload."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def from_payload(cls, raw: bytes) -> "ProtocolParams":
        return cls.from_dict(json.loads(raw.decode()))
