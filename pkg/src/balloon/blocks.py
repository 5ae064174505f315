"""Block structure, canonical serialization, and the two block hashes.

A block carries two digests:

* ``chain_hash`` covers every field except ``parent`` and ``proof``.  It is
  the value the miner grinds against and it assigns the block to a
  sub-chain, so the parent attachment can happen after the solution is
  found without invalidating the work (the parent is committed indirectly
  through the snapshot root).
* ``block_id`` covers the full serialization including ``parent`` and
  ``proof`` and is the identifier every reference uses.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence

from . import codec
from .codec import Digest, HashFn, Reader, default_hash
from .params import ProtocolParams

ProofStep = tuple[int, Digest]


@dataclass(frozen=True)
class Block:
    root: Optional[Digest]            # merkle root of the mining snapshot
    guider: Optional[Digest]          # highest-clock snapshot block
    clock: int                        # guider chain length
    samples: tuple[Digest, ...]       # sampled same-clock cohort, sorted
    nonce: int
    parent: Optional[Digest]          # snapshot entry at this block's sub-chain
    proof: Optional[tuple[ProofStep, ...]]
    number: int                       # sub-chain height, 0 for geneses
    anchors: tuple[Digest, ...]       # non-empty only for a first-of-view genesis
    weight: Fraction
    timestamp: float                  # simulated seconds, miner-declared
    payload: tuple[bytes, ...]        # opaque transaction identifiers

    def is_genesis(self) -> bool:
        return self.parent is None


def chain_bytes(block: Block) -> bytes:
    """Serialization of the fields covered by the chain hash, fixed order."""
    return b"".join((
        codec.encode_optional_digest(block.root),
        codec.encode_optional_digest(block.guider),
        codec.encode_u64(block.clock),
        codec.encode_digest_list(block.samples),
        codec.encode_u64(block.nonce),
        codec.encode_u64(block.number),
        codec.encode_digest_list(block.anchors),
        codec.encode_rational(block.weight),
        codec.encode_timestamp(block.timestamp),
        codec.encode_payload(block.payload),
    ))


def block_bytes(block: Block) -> bytes:
    """Full canonical serialization; hashing it yields the block id."""
    return chain_bytes(block) + codec.encode_optional_digest(block.parent) + codec.encode_proof(block.proof)


def chain_hash(block: Block, hash_fn: HashFn = default_hash) -> Digest:
    return hash_fn(chain_bytes(block))


def block_id(block: Block, hash_fn: HashFn = default_hash) -> Digest:
    return hash_fn(block_bytes(block))


def decode_block(data: bytes) -> Block:
    r = Reader(data)
    block = Block(
        root=r.optional_digest(),
        guider=r.optional_digest(),
        clock=r.u64(),
        samples=r.digest_list(),
        nonce=r.u64(),
        parent=None,
        proof=None,
        number=r.u64(),
        anchors=r.digest_list(),
        weight=r.rational(),
        timestamp=r.timestamp(),
        payload=r.payload(),
    )
    block = replace(block, parent=r.optional_digest(), proof=r.proof())
    if not r.done():
        raise codec.DecodeError("trailing bytes after block")
    return block


def pow_ok(block: Block, params: ProtocolParams, hash_fn: HashFn = default_hash) -> bool:
    """difficulty(h) = 2^256 / (h + 1) must reach the required difficulty."""
    h = codec.digest_int(chain_hash(block, hash_fn))
    return (h + 1) * params.difficulty <= 2 ** (codec.DIGEST_SIZE * 8)


def make_genesis(params: ProtocolParams) -> Block:
    """The shared initial genesis; it pins the protocol parameters."""
    return Block(
        root=None,
        guider=None,
        clock=0,
        samples=(),
        nonce=0,
        parent=None,
        proof=None,
        number=0,
        anchors=(),
        weight=params.difficulty,
        timestamp=0.0,
        payload=(params.to_payload(),),
    )


def sorted_digests(digests: Sequence[Digest]) -> tuple[Digest, ...]:
    return tuple(sorted(digests))
