"""Block assembly and the pluggable proof-of-work oracle.

A miner takes a snapshot of the latest main blocks (one per sub-chain),
commits to it with a merkle root, picks the max-clock entry as guider,
freezes the sample set (nonce-independent), solves the puzzle over the
parent-free serialization, and only then learns its sub-chain id and
attaches parent plus inclusion proof.  Changing parent or proof does not
change the solved hash.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

from .blocks import Block, chain_hash
from .codec import Digest, HashFn, default_hash, digest_int
from .errors import EmptySnapshot, OracleExhausted, SidOutOfRange
from .graph import BlockGraph
from .params import ProtocolParams
from .sampling import sample

MerkleStep = Tuple[int, Digest]  # (side, sibling): side 1 = we are the right child

_LEAF = b"\x00"
_NODE = b"\x01"


@dataclass(frozen=True)
class Snapshot:
    """Latest main sub-chain blocks, indexed by sub-chain id."""

    blocks: Tuple[Digest, ...]

    def __len__(self) -> int:
        return len(self.blocks)


def _leaf(digest: Digest, hash_fn: HashFn) -> Digest:
    return hash_fn(_LEAF + digest)


def _node(left: Digest, right: Digest, hash_fn: HashFn) -> Digest:
    return hash_fn(_NODE + left + right)


def _layers(leaves: Sequence[Digest], hash_fn: HashFn) -> List[List[Digest]]:
    layers = [[_leaf(d, hash_fn) for d in leaves]]
    while len(layers[-1]) > 1:
        level = layers[-1]
        if len(level) % 2:
            level = level + [level[-1]]  # duplicate last on odd layers
        layers.append([_node(level[i], level[i + 1], hash_fn)
                       for i in range(0, len(level), 2)])
    return layers


def merkle_root(snapshot: Snapshot, hash_fn: HashFn = default_hash) -> Digest:
    if not snapshot.blocks:
        raise EmptySnapshot("snapshot has no entries")
    return _layers(snapshot.blocks, hash_fn)[-1][0]


def merkle_proof(snapshot: Snapshot, sid: int,
                 hash_fn: HashFn = default_hash) -> Tuple[Digest, Tuple[MerkleStep, ...]]:
    if not snapshot.blocks:
        raise EmptySnapshot("snapshot has no entries")
    if not 0 <= sid < len(snapshot.blocks):
        raise SidOutOfRange(f"sid {sid} outside 0..{len(snapshot.blocks) - 1}")
    layers = _layers(snapshot.blocks, hash_fn)
    steps: List[MerkleStep] = []
    index = sid
    for layer in layers[:-1]:
        if len(layer) % 2:
            layer = layer + [layer[-1]]
        side = index % 2
        sibling = layer[index - 1] if side else layer[index + 1]
        steps.append((side, sibling))
        index //= 2
    return snapshot.blocks[sid], tuple(steps)


def verify_proof(root: Digest, leaf: Digest, proof: Sequence[MerkleStep], sid: int,
                 hash_fn: HashFn = default_hash) -> bool:
    """Checks inclusion and that the proof's position bits encode sid."""
    node = _leaf(leaf, hash_fn)
    index = 0
    for bit, (side, sibling) in enumerate(proof):
        if side not in (0, 1):
            return False
        node = _node(sibling, node, hash_fn) if side else _node(node, sibling, hash_fn)
        index |= side << bit
    return node == root and index == sid


def assign_chain(h_c: Digest, n_v: int) -> int:
    return digest_int(h_c) % n_v


class GrindingOracle:
    """Bounded sequential nonce supply for real hash grinding."""

    mode = "grind"

    def __init__(self, max_tries: int = 1 << 20):
        self.max_tries = max_tries

    def nonces(self):
        return iter(range(self.max_tries))


class SimulatedOracle:
    """Endless counter nonces for simulator runs where difficulty is 1 and
    block arrival times are drawn by the event loop, not by hashing.  The
    counter persists across blocks so a node never reuses a nonce."""

    mode = "simulated"

    def __init__(self, seed: int = 0):
        self._counter = seed

    def nonces(self):
        while True:
            self._counter += 1
            yield self._counter


def solve_pow(draft: Block, params: ProtocolParams, oracle,
              hash_fn: HashFn = default_hash) -> Block:
    """Find a nonce meeting the difficulty target, all other fields fixed."""
    bound = 1 << 256
    for nonce in oracle.nonces():
        candidate = replace(draft, nonce=nonce)
        h = digest_int(chain_hash(candidate, hash_fn))
        if (h + 1) * params.difficulty <= bound:
            return candidate
    raise OracleExhausted("nonce supply exhausted")


def mine_block(g: BlockGraph, snapshot: Snapshot, params: ProtocolParams,
               oracle, now: float, payload: Tuple[bytes, ...] = (),
               forced_guider: Optional[Digest] = None) -> Block:
    """Mine a regular block over ``snapshot``.

    ``forced_guider`` overrides the max-clock guider rule; honest miners
    never pass it, but it lets the simulator model guider-chain attacks.
    """
    if not snapshot.blocks:
        raise EmptySnapshot("cannot mine over an empty snapshot")
    for d in snapshot.blocks:
        g.entry(d)
    n_v = len(snapshot)
    root = merkle_root(snapshot, g.hash_fn)
    if forced_guider is not None:
        guider = forced_guider
        g.entry(guider)
    else:
        guider = min(snapshot.blocks, key=lambda d: (-g.entry(d).block.clock, d))
    draft = Block(
        root=root,
        guider=guider,
        clock=g.entry(guider).block.clock + 1,
        samples=(),
        nonce=0,
        parent=None,
        proof=None,
        number=0,
        anchors=(),
        weight=params.difficulty,
        timestamp=now,
        payload=tuple(payload),
    )
    found = sample(g, draft, params)
    if found is not None:
        draft = replace(draft, samples=found.members)
    # the height is hashed but depends on the parent, which depends on the
    # hash: search nonce and sub-chain slot together until they agree
    numbers = [g.entry(d).block.number + 1 for d in snapshot.blocks]
    bound = 1 << 256
    for nonce in oracle.nonces():
        for sid in range(n_v):
            candidate = replace(draft, nonce=nonce, number=numbers[sid])
            h = digest_int(chain_hash(candidate, g.hash_fn))
            if (h + 1) * params.difficulty > bound:
                continue
            if h % n_v != sid:
                continue
            parent, proof = merkle_proof(snapshot, sid, g.hash_fn)
            return replace(candidate, parent=parent, proof=proof)
    raise OracleExhausted("nonce supply exhausted")
