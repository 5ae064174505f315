"""Cross-view fork choice and total ordering.

The walk starts at the initial genesis, follows the heaviest-subtree child
on every sub-chain, and replays the epoch votes over the walked paths.  When
a vote triggers, everything up to and including the anchors is emitted
(sorted by clock, then digest), path blocks past the anchors are dropped as
grey, and the walk restarts from the next view's geneses.  Subtree weights
span views: blocks of later views support the main-chain ancestors of the
anchor matching their sub-chain slot, which is what lets a finished view's
weight race keep converging after the view boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from .adjustment import CHANGE, ChangeDecision, detect_view_change
from .codec import Digest
from .errors import NotOnMainChain
from .graph import INITIAL_VIEW, BlockGraph, ViewKey
from .mining import Snapshot
from .params import ProtocolParams
from .views import ViewDescriptor, same_chain


@dataclass(frozen=True)
class SubtreeView:
    base: Digest
    subtree_blocks: FrozenSet[Digest]
    subtree_weight: Fraction


@dataclass(frozen=True)
class OrderedChain:
    blocks: Tuple[Digest, ...]
    view_boundaries: Tuple[Tuple[int, int], ...]  # (view_number, start index)


@dataclass(frozen=True)
class ViewTrace:
    number: int
    view_key: ViewKey
    geneses: Tuple[Digest, ...]              # per sub-chain id
    paths: Tuple[Tuple[Digest, ...], ...]    # full heaviest paths, genesis first
    ordered: Tuple[Digest, ...]              # this view's slice of the order
    decision: ChangeDecision


@dataclass(frozen=True)
class OrderTrace:
    views: Tuple[ViewTrace, ...]
    chain: OrderedChain
    pending_view_key: Optional[ViewKey]      # set when geneses are still missing


def offspring(g: BlockGraph, base: Digest) -> Set[Digest]:
    out = {base}
    stack = [base]
    while stack:
        for child in g.children_of(stack.pop()):
            if child not in out:
                out.add(child)
                stack.append(child)
    return out


def _registered_anchor_keys(g: BlockGraph) -> List[ViewKey]:
    return [key for key in g.view_keys() if key]


def subtree_blocks(g: BlockGraph, base: Digest) -> Set[Digest]:
    """Literal evaluation of the recursive offspring/supporter equations.
    The graph's incremental weights are the fast path; this is the readable
    one, and the test suite holds the two together."""
    keys = _registered_anchor_keys(g)

    def successors(block: Digest, seen_geneses: Set[Digest]) -> Set[Digest]:
        own = offspring(g, block)
        reformers = {a for key in keys for a in key if a in own}
        if not reformers:
            return set()
        out: Set[Digest] = set()
        for key in keys:
            if not key & reformers:
                continue
            for gen in g.geneses_for(key):
                if gen in seen_geneses:
                    continue
                seen_geneses.add(gen)
                gen_off = offspring(g, gen)
                out |= gen_off
                out |= successors(gen, seen_geneses)
        return out

    own = offspring(g, base)
    supporters = {s for s in successors(base, set()) if same_chain(g, s, base)}
    return own | supporters


def subtree_weight(g: BlockGraph, base: Digest) -> Fraction:
    return g.subtree_weight_of(base)


def subtree_view(g: BlockGraph, base: Digest) -> SubtreeView:
    blocks = subtree_blocks(g, base)
    weight = sum((g.entry(d).block.weight for d in blocks), Fraction(0))
    return SubtreeView(base, frozenset(blocks), weight)


def heaviest_path(g: BlockGraph, start: Digest) -> Tuple[Digest, ...]:
    path = [start]
    cur = start
    while True:
        cur = g.best_child_of(cur)
        if cur is None:
            return tuple(path)
        path.append(cur)


def heaviest_path_scan(g: BlockGraph, start: Digest) -> Tuple[Digest, ...]:
    """Same walk, re-deriving each step from the children index; the fast
    path above must agree with this on every graph."""
    path = [start]
    cur = start
    while True:
        children = g.children_of(cur)
        if not children:
            return tuple(path)
        cur = min(children, key=lambda d: (-g.subtree_weight_of(d), d))
        path.append(cur)


def select_geneses(g: BlockGraph, view_key: ViewKey) -> Optional[Tuple[Digest, ...]]:
    """Heaviest genesis per sub-chain id; None while any id lacks one."""
    count = g.view_chain_count(view_key)
    by_sid: Dict[int, List[Digest]] = {}
    for d in g.geneses_for(view_key):
        by_sid.setdefault(g.entry(d).sid, []).append(d)
    if len(by_sid) < count:
        return None
    return tuple(
        min(by_sid[s], key=lambda d: (-g.subtree_weight_of(d), d))
        for s in range(count)
    )


def _sorted_view(g: BlockGraph, blocks: Set[Digest]) -> Tuple[Digest, ...]:
    return tuple(sorted(blocks, key=lambda d: (g.entry(d).block.clock, d)))


def order_with_trace(g: BlockGraph, params: ProtocolParams = None, *,
                     include_segments: bool = True) -> OrderTrace:
    """Walk the views from the initial one, order each view's blocks, and
    stop at the first view that has not (yet) triggered a change.

    ``include_segments=False`` skips the per-view ordering work and leaves
    ``segment`` and the returned chain empty; view structure, paths and
    change decisions are computed exactly as in the full variant.  The
    simulator leans on this for its per-event bookkeeping.
    """
    params = params or g.params
    views: List[ViewTrace] = []
    ordered: List[Digest] = []
    boundaries: List[Tuple[int, int]] = []
    key = INITIAL_VIEW
    number = 1
    pending: Optional[ViewKey] = None
    while True:
        geneses = select_geneses(g, key)
        if geneses is None:
            pending = key
            break
        paths = tuple(heaviest_path(g, gen) for gen in geneses)
        descriptor = ViewDescriptor(number, key, geneses, len(geneses))
        tips = Snapshot(tuple(p[-1] for p in paths))
        decision = detect_view_change(g, descriptor, tips, params)
        if include_segments:
            if decision.kind == CHANGE:
                view_blocks: Set[Digest] = set()
                for chain, path in enumerate(paths):
                    cut = path.index(decision.anchors[chain])
                    view_blocks.update(path[:cut + 1])
            else:
                view_blocks = {d for path in paths for d in path}
            segment = _sorted_view(g, view_blocks)
            boundaries.append((number, len(ordered)))
            ordered.extend(segment)
        else:
            segment = ()
        views.append(ViewTrace(number, key, geneses, paths, segment, decision))
        if decision.kind != CHANGE:
            break
        key = frozenset(decision.anchors)
        number += 1
    chain = OrderedChain(tuple(ordered), tuple(boundaries))
    return OrderTrace(tuple(views), chain, pending)


def total_order(g: BlockGraph, params: ProtocolParams = None) -> OrderedChain:
    return order_with_trace(g, params).chain


def latest_main_blocks(g: BlockGraph, params: ProtocolParams = None) -> Snapshot:
    """Per-sub-chain tips of the last walked view, for miners to build on."""
    trace = order_with_trace(g, params)
    last = trace.views[-1]
    return Snapshot(tuple(path[-1] for path in last.paths))


def _genesis_peers(g: BlockGraph, digest: Digest) -> Tuple[Digest, ...]:
    e = g.entry(digest)
    return tuple(d for d in g.geneses_for(e.view_key)
                 if d != digest and g.entry(d).sid == e.sid)


def chain_confirmed(g: BlockGraph, digest: Digest, params: ProtocolParams = None) -> bool:
    """Dominance over every fork competitor at this block's junction.

    A competitor that has not arrived yet weighs zero, so even a sole child
    must be buried under at least the margin before it counts as confirmed;
    by then any same-clock rival minted in time would be visible and weighed
    for real.
    """
    params = params or g.params
    block = g.entry(digest).block
    if block.parent is None:
        peers = _genesis_peers(g, digest)
    else:
        peers = tuple(d for d in g.children_of(block.parent) if d != digest)
    own = g.subtree_weight_of(digest)
    rival = max((g.subtree_weight_of(p) for p in peers), default=Fraction(0))
    return own >= rival + params.confirm_margin


def is_confirmed(g: BlockGraph, digest: Digest, params: ProtocolParams = None,
                 trace: OrderTrace = None) -> bool:
    """Confirmed only when every ordered block of the same view up to this
    clock, the block itself included, dominates its own junction."""
    params = params or g.params
    trace = trace or order_with_trace(g, params)
    home = None
    for view in trace.views:
        if digest in view.ordered:
            home = view
            break
    if home is None:
        raise NotOnMainChain(f"{digest.hex()[:12]} is not in the total order")
    clock = g.entry(digest).block.clock
    return all(chain_confirmed(g, d, params)
               for d in home.ordered
               if g.entry(d).block.clock <= clock)


def confirmed_prefix(g: BlockGraph, params: ProtocolParams = None) -> Tuple[Digest, ...]:
    """Longest confirmed prefix of the total order.  Within a view the cut
    falls on a clock-group boundary: one contested block holds back every
    block of its clock and all later ones."""
    params = params or g.params
    trace = order_with_trace(g, params)
    prefix: List[Digest] = []
    for view in trace.views:
        group: List[Digest] = []
        group_clock: Optional[int] = None
        group_ok = True
        for d in view.ordered:
            clock = g.entry(d).block.clock
            if clock != group_clock:
                if not group_ok:
                    return tuple(prefix)
                prefix.extend(group)
                group, group_clock, group_ok = [], clock, True
            group.append(d)
            group_ok = group_ok and chain_confirmed(g, d, params)
        if not group_ok:
            return tuple(prefix)
        prefix.extend(group)
    return tuple(prefix)


def order_transactions(chain: OrderedChain, g: BlockGraph) -> Tuple[bytes, ...]:
    """Payload concatenation in block order, first occurrence wins."""
    seen: Set[bytes] = set()
    out: List[bytes] = []
    for d in chain.blocks:
        for tx in g.entry(d).block.payload:
            if tx not in seen:
                seen.add(tx)
                out.append(tx)
    return tuple(out)


def export_lines(g: BlockGraph, chain: OrderedChain) -> List[str]:
    """position, digest, view number, clock, sub-chain id; tab-separated."""
    view_at: Dict[int, int] = {}
    for number, start in chain.view_boundaries:
        view_at[start] = number
    lines = []
    current_view = 0
    for pos, d in enumerate(chain.blocks):
        current_view = view_at.get(pos, current_view)
        e = g.entry(d)
        lines.append(f"{pos}\t{d.hex()}\t{current_view}\t{e.block.clock}\t{e.sid}")
    return lines
