"""Shared exception types."""

from __future__ import annotations

from typing import Sequence


class BalloonError(Exception):
    pass


class UnresolvedReference(BalloonError):
    """A block references digests the local graph has not seen yet."""

    def __init__(self, missing: Sequence[bytes]):
        self.missing = tuple(missing)
        super().__init__(f"unresolved references: {[d.hex()[:12] for d in self.missing]}")


class InvalidBlock(BalloonError):
    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"invalid block ({reason})" + (f": {detail}" if detail else ""))


class EmptySnapshot(BalloonError):
    pass


class EmptyEpoch(BalloonError):
    pass


class WrongView(BalloonError):
    pass


class SidOutOfRange(BalloonError):
    pass


class OracleExhausted(BalloonError):
    pass


class InconsistentTips(BalloonError):
    pass


class EmptyRates(BalloonError):
    pass


class NotOnMainChain(BalloonError):
    pass


class UnknownBlock(BalloonError):
    def __init__(self, digest: bytes):
        self.digest = digest
        super().__init__(f"unknown block {digest.hex()[:12]}")
