"""Epoch voting, view-change triggering and genesis mining.

Every sub-chain casts one ballot per epoch based on how far its average
sample count drifts from the target rate.  A view change fires only when
every sub-chain produced a ballot and a strict majority agrees on the
drift direction.  The anchor set embedded in the winning view's first
genesis lets any node replay the exact vote and derive the next sub-chain
count without trusting the genesis miner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .blocks import Block
from .codec import Digest
from .errors import EmptyRates, InconsistentTips
from .graph import BlockGraph
from .mining import Snapshot, solve_pow
from .params import ProtocolParams
from .sampling import sample
from .views import ViewDescriptor

NO_CHANGE = "no_change"
CHANGE = "change"


@dataclass(frozen=True)
class EpochWindow:
    epoch: int
    c_s: int
    c_t: int


@dataclass(frozen=True)
class ChainBallot:
    chain: int
    block_count: int
    sample_total: int
    rate: Optional[Fraction]      # None when the window held no blocks
    vote: Optional[str]           # no_change / rate_high / rate_low
    anchor: Optional[Digest]      # max-clock window block


@dataclass(frozen=True)
class VoteTally:
    no_change: int
    rate_high: int
    rate_low: int

    @property
    def cast(self) -> int:
        return self.no_change + self.rate_high + self.rate_low


@dataclass(frozen=True)
class EpochEval:
    epoch: int
    ballots: Tuple[ChainBallot, ...]
    tally: VoteTally
    triggered: bool
    vote_up: Optional[bool]


@dataclass(frozen=True)
class ChangeDecision:
    kind: str                        # no_change | change
    anchors: Tuple[Digest, ...]      # per sub-chain in sid order when kind=change
    deviant_rates: Tuple[Fraction, ...]
    vote_up: Optional[bool]
    epoch: int
    pending: bool = False            # true when the stop epoch was incomplete


@dataclass(frozen=True)
class DecisionRecord:
    """Replayed outcome of the vote a first-of-view genesis claims."""

    epoch: int
    rates: Tuple[Fraction, ...]
    vote_up: bool
    next_count: int
    max_genesis_clock: int


def epoch_window(epoch: int, view: ViewDescriptor, chain_index: int,
                 params: ProtocolParams, genesis_clocks: Sequence[int]) -> EpochWindow:
    c_g = max(genesis_clocks)
    if epoch == 1:
        return EpochWindow(1, genesis_clocks[chain_index], c_g + params.epoch_clocks - 1)
    c_s = c_g + (epoch - 1) * params.epoch_clocks
    return EpochWindow(epoch, c_s, c_s + params.epoch_clocks - 1)


def _vote_for_rate(rate: Fraction, params: ProtocolParams) -> str:
    alpha = abs(rate - params.target_rate) / params.target_rate
    if alpha <= params.vote_threshold:
        return "no_change"
    if rate > params.target_rate:
        return "rate_high"
    return "rate_low"


def _ballot_from_members(g: BlockGraph, chain: int, members: Sequence[Digest],
                         params: ProtocolParams) -> ChainBallot:
    if not members:
        return ChainBallot(chain, 0, 0, None, None, None)
    total = sum(len(g.entry(d).block.samples) for d in members)
    rate = Fraction(total, len(members))
    vote = _vote_for_rate(rate, params)
    anchor = min(members, key=lambda d: (-g.entry(d).block.clock, d))
    return ChainBallot(chain, len(members), total, rate, vote, anchor)


def _chain_ballot(g: BlockGraph, chain: int, path: Sequence[Digest],
                  c_s: int, c_t: int, params: ProtocolParams) -> ChainBallot:
    members = [d for d in path if c_s <= g.entry(d).block.clock <= c_t]
    return _ballot_from_members(g, chain, members, params)


def _evaluate(g: BlockGraph, epoch: int, paths: Dict[int, Sequence[Digest]],
              genesis_clocks: Sequence[int], params: ProtocolParams) -> EpochEval:
    n_v = len(paths)
    c_g = max(genesis_clocks)
    c_t = c_g + epoch * params.epoch_clocks - 1
    ballots = []
    for chain in range(n_v):
        c_s = genesis_clocks[chain] if epoch == 1 else c_g + (epoch - 1) * params.epoch_clocks
        ballots.append(_chain_ballot(g, chain, paths[chain], c_s, c_t, params))
    return _sealed_eval(epoch, ballots, n_v)


def _sealed_eval(epoch: int, ballots: Sequence[ChainBallot], n_v: int) -> EpochEval:
    tally = VoteTally(
        no_change=sum(1 for b in ballots if b.vote == "no_change"),
        rate_high=sum(1 for b in ballots if b.vote == "rate_high"),
        rate_low=sum(1 for b in ballots if b.vote == "rate_low"),
    )
    triggered, vote_up = tally_outcome(tally, n_v)
    return EpochEval(epoch, tuple(ballots), tally, triggered, vote_up)


def tally_outcome(tally: VoteTally, n_v: int) -> Tuple[bool, Optional[bool]]:
    """Strict majority in exact integers, and every sub-chain must have
    voted; returns (triggered, direction)."""
    triggered = tally.cast == n_v and (2 * tally.rate_high > n_v or 2 * tally.rate_low > n_v)
    vote_up = (2 * tally.rate_high > n_v) if triggered else None
    return triggered, vote_up


def _parent_path(g: BlockGraph, tip: Digest) -> List[Digest]:
    path = []
    cur: Optional[Digest] = tip
    while cur is not None:
        path.append(cur)
        cur = g.entry(cur).block.parent
    return path


def epoch_report(g: BlockGraph, view: ViewDescriptor, tips: Snapshot,
                 params: ProtocolParams) -> Tuple[Tuple[EpochEval, ...], int]:
    """All completed epoch evaluations in order, stopping after a trigger,
    plus the epoch number the view is currently waiting on (0 if it ended
    in a trigger).

    One backward walk per sub-chain bins the path by epoch up front, so the
    cost is linear in path length rather than path x epochs; the scan
    variant below recomputes every window from scratch and the tests hold
    the two together.
    """
    if len(tips.blocks) != view.n_v:
        raise InconsistentTips(f"{len(tips.blocks)} tips for {view.n_v} sub-chains")
    genesis_clocks = [g.entry(d).block.clock for d in view.geneses]
    c_g = max(genesis_clocks)
    span = params.epoch_clocks
    bins: List[Dict[int, Tuple[int, int, int, Digest]]] = []
    for chain, tip in enumerate(tips.blocks):
        if g.entry(tip).genesis != view.geneses[chain]:
            raise InconsistentTips(f"tip of sub-chain {chain} is not on its sub-chain")
        bins.append(_path_bins(g, tip, view.geneses, c_g, span))
    evals: List[EpochEval] = []
    epoch = 1
    while True:
        c_t = c_g + epoch * span - 1
        if any(g.entry(tips.blocks[chain]).block.clock < c_t for chain in range(view.n_v)):
            return tuple(evals), epoch
        ballots = [
            _ballot_from_stats(chain, bins[chain].get(epoch), params)
            for chain in range(view.n_v)
        ]
        ev = _sealed_eval(epoch, ballots, view.n_v)
        evals.append(ev)
        if ev.triggered:
            return tuple(evals), 0
        epoch += 1


def _path_bins(g: BlockGraph, tip: Digest, geneses: Tuple[Digest, ...],
               c_g: int, span: int) -> Dict[int, Tuple[int, int, int, Digest]]:
    """Per-epoch (count, samples, anchor clock, anchor digest) aggregates of
    the whole parent path ending at ``tip``.

    Cached per block on the graph: a path's aggregate is its parent's plus
    one block, and parent links never change, so entries are folded once and
    reused by every later call that walks through the same block.
    """
    cache = g.memo("epoch_bins")
    ctx = (geneses, span)
    stack = []
    cur: Optional[Digest] = tip
    while cur is not None and (ctx, cur) not in cache:
        stack.append(cur)
        cur = g.entry(cur).block.parent
    agg: Dict[int, Tuple[int, int, int, Digest]] = \
        cache[(ctx, cur)] if cur is not None else {}
    gen_clock = g.entry(g.entry(tip).genesis).block.clock
    for cur in reversed(stack):
        block = g.entry(cur).block
        clk = block.clock
        if clk >= gen_clock:
            e = 1 if clk < c_g + span else 1 + (clk - c_g) // span
            prev = agg.get(e)
            if prev is None:
                entry = (1, len(block.samples), clk, cur)
            else:
                count, total, bclk, bdig = prev
                if clk > bclk or (clk == bclk and cur < bdig):
                    bclk, bdig = clk, cur
                entry = (count + 1, total + len(block.samples), bclk, bdig)
            agg = {**agg, e: entry}
        cache[(ctx, cur)] = agg
    return cache[(ctx, tip)]


def _ballot_from_stats(chain: int, stats: Optional[Tuple[int, int, int, Digest]],
                       params: ProtocolParams) -> ChainBallot:
    if stats is None:
        return ChainBallot(chain, 0, 0, None, None, None)
    count, total, _, anchor = stats
    rate = Fraction(total, count)
    return ChainBallot(chain, count, total, rate, _vote_for_rate(rate, params), anchor)


def epoch_report_scan(g: BlockGraph, view: ViewDescriptor, tips: Snapshot,
                      params: ProtocolParams) -> Tuple[Tuple[EpochEval, ...], int]:
    """Readable reference: rebuilds each epoch window by filtering the full
    sub-chain paths."""
    if len(tips.blocks) != view.n_v:
        raise InconsistentTips(f"{len(tips.blocks)} tips for {view.n_v} sub-chains")
    genesis_clocks = [g.entry(d).block.clock for d in view.geneses]
    paths: Dict[int, List[Digest]] = {}
    for chain, tip in enumerate(tips.blocks):
        if g.entry(tip).genesis != view.geneses[chain]:
            raise InconsistentTips(f"tip of sub-chain {chain} is not on its sub-chain")
        paths[chain] = _parent_path(g, tip)
    c_g = max(genesis_clocks)
    evals: List[EpochEval] = []
    epoch = 1
    while True:
        c_t = c_g + epoch * params.epoch_clocks - 1
        if any(g.entry(tips.blocks[chain]).block.clock < c_t for chain in range(view.n_v)):
            return tuple(evals), epoch
        ev = _evaluate(g, epoch, paths, genesis_clocks, params)
        evals.append(ev)
        if ev.triggered:
            return tuple(evals), 0
        epoch += 1


def detect_view_change(g: BlockGraph, view: ViewDescriptor, tips: Snapshot,
                       params: ProtocolParams) -> ChangeDecision:
    evals, pending_epoch = epoch_report(g, view, tips, params)
    if evals and evals[-1].triggered:
        ev = evals[-1]
        anchors = tuple(b.anchor for b in ev.ballots)
        rates = tuple(b.rate for b in ev.ballots if b.vote in ("rate_high", "rate_low"))
        return ChangeDecision(CHANGE, anchors, rates, ev.vote_up, ev.epoch)
    return ChangeDecision(NO_CHANGE, (), (), None, pending_epoch, pending=True)


def next_chain_count(n_v: int, rates: Sequence[Fraction], vote_up: bool,
                     params: ProtocolParams) -> int:
    if not rates:
        raise EmptyRates("a view change carries at least one deviant rate")
    r0 = params.target_rate
    if vote_up:
        return math.ceil(n_v * max(rates) / r0)
    low = [r for r in rates if r < r0]
    if not low:
        raise EmptyRates("downward change without any rate below target")
    r_m = max(low)
    return math.ceil(n_v * max(r_m / r0, 1 - params.shrink_limit))


def recompute_decision(g: BlockGraph, anchors: Sequence[Digest],
                       params: ProtocolParams) -> Optional[DecisionRecord]:
    """Replay the epoch votes a first-of-view genesis claims with its anchor
    set.  Returns None unless the anchors are exactly the per-chain max-clock
    window blocks of the first epoch that triggers a change.  Epochs before
    the anchors' own epoch must not trigger."""
    anchors = list(anchors)
    if not anchors:
        return None
    entries = [g.entry(a) for a in anchors]
    keys = {e.view_key for e in entries}
    if len(keys) != 1:
        return None
    n_v = g.view_chain_count(keys.pop())
    if len(anchors) != n_v:
        return None
    by_sid = {e.sid: e for e in entries}
    if sorted(by_sid) != list(range(n_v)):
        return None
    genesis_clocks = [g.entry(by_sid[s].genesis).block.clock for s in range(n_v)]
    c_g = max(genesis_clocks)
    c_max = max(e.block.clock for e in entries)
    if c_max <= c_g + params.epoch_clocks - 1:
        e_star = 1
    else:
        e_star = (c_max - c_g) // params.epoch_clocks + 1
    paths = {s: _parent_path(g, by_sid[s].digest) for s in range(n_v)}
    for epoch in range(1, e_star + 1):
        if epoch < e_star:
            # anchors sit in a later window, so earlier epochs are fully
            # covered by their parent paths; a shortfall means crafted anchors
            c_t = c_g + epoch * params.epoch_clocks - 1
            if any(by_sid[s].block.clock < c_t for s in range(n_v)):
                return None
        ev = _evaluate(g, epoch, paths, genesis_clocks, params)
        if epoch < e_star:
            if ev.triggered:
                return None
            continue
        if not ev.triggered:
            return None
        for s in range(n_v):
            if ev.ballots[s].anchor != by_sid[s].digest:
                return None
        rates = tuple(b.rate for b in ev.ballots if b.vote in ("rate_high", "rate_low"))
        return DecisionRecord(
            epoch=e_star,
            rates=rates,
            vote_up=bool(ev.vote_up),
            next_count=next_chain_count(n_v, rates, bool(ev.vote_up), params),
            max_genesis_clock=c_g,
        )
    return None


def mine_genesis(g: BlockGraph, anchor_set: Sequence[Digest],
                 known_geneses: Sequence[Digest], params: ProtocolParams,
                 oracle, now: float, payload: Tuple[bytes, ...] = ()) -> Block:
    """First genesis of a view embeds the anchors; later ones chain off the
    best known genesis instead, which keeps their clocks fresh."""
    if known_geneses:
        guider = min(known_geneses, key=lambda d: (-g.entry(d).block.clock, d))
        anchors: Tuple[Digest, ...] = ()
    else:
        guider = min(anchor_set, key=lambda d: (-g.entry(d).block.clock, d))
        anchors = tuple(sorted(anchor_set))
    draft = Block(
        root=None,
        guider=guider,
        clock=g.entry(guider).block.clock + 1,
        samples=(),
        nonce=0,
        parent=None,
        proof=None,
        number=0,
        anchors=anchors,
        weight=params.difficulty,
        timestamp=now,
        payload=tuple(payload),
    )
    found = sample(g, draft, params)
    if found is not None:
        draft = replace(draft, samples=found.members)
    return solve_pow(draft, params, oracle, g.hash_fn)
