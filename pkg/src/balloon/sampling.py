"""Reference-block location and same-clock block sampling.

A miner looks back along its guider chain for the most recent block that is
both m clocks older than the guider and old enough in wall time to have
fully propagated.  Blocks sharing that reference's clock and mapping onto
the reference's sub-chain, in the reference's own view or in views linked
to it by anchor lineage, form the sample set the miner embeds.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .blocks import Block
from .codec import Digest
from .errors import EmptyEpoch
from .graph import BlockGraph
from .params import ProtocolParams
from .views import same_chain, same_view, view_reachable


@dataclass(frozen=True)
class SampleSet:
    reference: Digest
    members: Tuple[Digest, ...]  # sorted by digest, capped


def diff_clock(g: BlockGraph, b1: Digest, b2: Digest) -> int:
    return g.entry(b1).block.clock - g.entry(b2).block.clock


def diff_time(g: BlockGraph, b1: Digest, b2: Digest) -> float:
    return g.entry(b1).block.timestamp - g.entry(b2).block.timestamp


def find_reference(g: BlockGraph, b: Block, params: ProtocolParams) -> Optional[Digest]:
    """Newest guider-chain block at least sample_clock_gap clocks behind the
    guider and sample_delay_multiple propagation delays older.  Clocks along
    the chain strictly decrease, so the first hit walking backwards is the
    argmax; None when no block qualifies."""
    head = b.guider
    if head is None:
        return None
    gap = params.sample_clock_gap
    min_age = params.sample_delay_multiple * params.delay_bound
    head_entry = g.entry(head)
    cur: Optional[Digest] = head
    while cur is not None:
        cur_block = g.entry(cur).block
        if (head_entry.block.clock - cur_block.clock >= gap
                and head_entry.block.timestamp - cur_block.timestamp >= min_age):
            return cur
        cur = cur_block.guider
    return None


def cohort_members(g: BlockGraph, reference: Digest) -> Tuple[Digest, ...]:
    """All blocks sharing the reference's clock and sub-chain, in its view or
    in views on a common anchor lineage.  Sorted, uncapped."""
    ref_entry = g.entry(reference)
    members: List[Digest] = []
    for cand in g.blocks_at_clock(ref_entry.block.clock):
        if not same_chain(g, cand, reference):
            continue
        if same_view(g, cand, reference):
            members.append(cand)
        elif view_reachable(g, g.entry(cand).view_key, ref_entry.view_key):
            members.append(cand)
    members.sort()
    return tuple(members)


def sample(g: BlockGraph, b: Block, params: ProtocolParams) -> Optional[SampleSet]:
    reference = find_reference(g, b, params)
    if reference is None:
        return None
    members = cohort_members(g, reference)
    if len(members) > params.sample_cap:
        members = members[:params.sample_cap]
    return SampleSet(reference=reference, members=tuple(members))


def epoch_rate(blocks: Sequence[Block]) -> Fraction:
    """Mean sample-set size over the supplied main-path blocks."""
    if not blocks:
        raise EmptyEpoch("no main-path blocks in this epoch window")
    return Fraction(sum(len(b.samples) for b in blocks), len(blocks))
