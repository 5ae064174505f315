"""View membership and chain identity predicates.

A view is identified by the set of anchor digests recorded in its first
genesis; later geneses of the same view inherit that set through their
guider.  The graph caches the resolved set per block, so these helpers are
thin lookups.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

from .codec import Digest
from .graph import BlockGraph, ViewKey


def anchors_of(g: BlockGraph, digest: Digest) -> ViewKey:
    return g.entry(digest).view_key


def genesis_of(g: BlockGraph, digest: Digest) -> Digest:
    return g.entry(digest).genesis


def sid_of(g: BlockGraph, digest: Digest) -> int:
    return g.entry(digest).sid


def same_view(g: BlockGraph, b1: Digest, b2: Digest) -> bool:
    return g.entry(b1).view_key == g.entry(b2).view_key


def same_chain(g: BlockGraph, cand: Digest, ref: Digest) -> bool:
    """Chain identity judged with the sub-chain count of the reference's view."""
    r = g.entry(ref)
    return g.entry(cand).chain_int % r.view_count == r.chain_int % r.view_count


def guider_chain(g: BlockGraph, digest: Digest) -> Tuple[Digest, ...]:
    """Guider-edge ancestors from the initial genesis up to the block's
    guider, both inclusive; the block itself is excluded.  Length equals the
    block's clock."""
    chain = []
    cur = g.entry(digest).block.guider
    while cur is not None:
        chain.append(cur)
        cur = g.entry(cur).block.guider
    chain.reverse()
    return tuple(chain)


def view_reachable(g: BlockGraph, a: ViewKey, b: ViewKey) -> bool:
    """True when one view lies on the other's anchor lineage."""
    return a in g.view_lineage(b) or b in g.view_lineage(a)


@dataclass(frozen=True)
class ViewDescriptor:
    view_number: int
    anchors: ViewKey
    geneses: Tuple[Digest, ...]  # one per sub-chain, indexed by sid
    n_v: int


def view_complete(g: BlockGraph, view_key: ViewKey) -> bool:
    """Every sub-chain id of the view has at least one known genesis."""
    count = g.view_chain_count(view_key)
    covered = {g.entry(d).sid for d in g.geneses_for(view_key)}
    return len(covered) == count
