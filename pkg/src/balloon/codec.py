"""Canonical byte encoding primitives and the digest interface.

Every on-wire or hashed structure is assembled from the primitives below:
fixed field order, big-endian integers, length-prefixed byte strings.  The
exact byte layout is documented in docs/formats.md and frozen by golden
vectors in the test suite.
"""

from __future__ import annotations

import hashlib
import struct
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

DIGEST_SIZE = 32

Digest = bytes
HashFn = Callable[[bytes], bytes]


def default_hash(data: bytes) -> Digest:
    return hashlib.sha256(data).digest()


def digest_int(digest: Digest) -> int:
    """Big-endian integer value of a digest (used for sub-chain assignment)."""
    return int.from_bytes(digest, "big")


def check_digest(digest: bytes) -> Digest:
    if not isinstance(digest, bytes) or len(digest) != DIGEST_SIZE:
        raise ValueError(f"digest must be {DIGEST_SIZE} bytes")
    return digest


# -------------------------------------------------------------------------
# encoders
# -------------------------------------------------------------------------

def encode_u8(value: int) -> bytes:
    return struct.pack(">B", value)


def encode_u32(value: int) -> bytes:
    return struct.pack(">I", value)


def encode_u64(value: int) -> bytes:
    return struct.pack(">Q", value)


def encode_bytes(raw: bytes) -> bytes:
    return encode_u32(len(raw)) + raw


def encode_optional_digest(digest: Optional[Digest]) -> bytes:
    if digest is None:
        return b"\x00"
    return b"\x01" + check_digest(digest)


def encode_digest_list(digests: Sequence[Digest]) -> bytes:
    out = [encode_u32(len(digests))]
    for d in digests:
        out.append(check_digest(d))
    return b"".join(out)


def encode_rational(value: Fraction) -> bytes:
    """Sign byte, then length-prefixed big-endian magnitudes of p and q."""
    sign = b"\x01" if value < 0 else b"\x00"
    num = abs(value.numerator)
    den = value.denominator
    num_bytes = num.to_bytes((num.bit_length() + 7) // 8, "big") if num else b""
    den_bytes = den.to_bytes((den.bit_length() + 7) // 8, "big")
    return sign + encode_bytes(num_bytes) + encode_bytes(den_bytes)


def encode_timestamp(value: float) -> bytes:
    return struct.pack(">d", value)


def encode_payload(items: Sequence[bytes]) -> bytes:
    out = [encode_u32(len(items))]
    for item in items:
        out.append(encode_bytes(item))
    return b"".join(out)


def encode_proof(steps: Optional[Sequence[tuple[int, Digest]]]) -> bytes:
    """Merkle path: absent flag, or step count plus (side, digest) pairs.

    side is the proven node's position bit at that level: 0 when it is the
    left child (sibling on the right), 1 when it is the right child.  The
    bits, bottom up, reconstruct the leaf index.
    """
    if steps is None:
        return b"\x00"
    out = [b"\x01", encode_u32(len(steps))]
    for side, digest in steps:
        if side not in (0, 1):
            raise ValueError("proof side must be 0 or 1")
        out.append(encode_u8(side))
        out.append(check_digest(digest))
    return b"".join(out)


# -------------------------------------------------------------------------
# decoding
# -------------------------------------------------------------------------

class DecodeError(ValueError):
    pass


class Reader:
    """Cursor over canonical bytes; every read checks bounds."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError("truncated input")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def raw_bytes(self) -> bytes:
        return self.take(self.u32())

    def optional_digest(self) -> Optional[Digest]:
        flag = self.u8()
        if flag == 0:
            return None
        if flag != 1:
            raise DecodeError("bad optional flag")
        return self.take(DIGEST_SIZE)

    def digest_list(self) -> tuple[Digest, ...]:
        count = self.u32()
        return tuple(self.take(DIGEST_SIZE) for _ in range(count))

    def rational(self) -> Fraction:
        sign = self.u8()
        if sign not in (0, 1):
            raise DecodeError("bad rational sign")
        num_raw = self.raw_bytes()
        den_raw = self.raw_bytes()
        num = int.from_bytes(num_raw, "big") if num_raw else 0
        den = int.from_bytes(den_raw, "big") if den_raw else 0
        if den == 0:
            raise DecodeError("zero denominator")
        value = Fraction(num, den)
        return -value if sign else value

    def timestamp(self) -> float:
        return struct.unpack(">d", self.take(8))[0]

    def payload(self) -> tuple[bytes, ...]:
        count = self.u32()
        return tuple(self.raw_bytes() for _ in range(count))

    def proof(self) -> Optional[tuple[tuple[int, Digest], ...]]:
        flag = self.u8()
        if flag == 0:
            return None
        if flag != 1:
            raise DecodeError("bad proof flag")
        count = self.u32()
        steps = []
        for _ in range(count):
            side = self.u8()
            if side not in (0, 1):
                raise DecodeError("bad proof side")
            steps.append((side, self.take(DIGEST_SIZE)))
        return tuple(steps)

    def done(self) -> bool:
        return self.pos == len(self.data)


def hex_digest(digest: Digest) -> str:
    return digest.hex()


def parse_hex_digest(text: str) -> Digest:
    return check_digest(bytes.fromhex(text))
