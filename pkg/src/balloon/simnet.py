"""Deterministic discrete-event simulator for a small mesh of miners.

Every node runs the full protocol stack over its own local block graph.
Mining is a per-node Poisson process (rate = share * mine_rate), message
delivery is base delay plus uniform jitter, and an omniscient observer
graph receives every minted block instantly so the run can be replayed
and audited after the fact.

Determinism: one master ``random.Random(seed)`` spawns the network rng
and one rng per node in a fixed order, the event heap breaks time ties
with a monotone sequence number, and recipients are always visited in
node-id order.  The same (scenario, seed) pair therefore produces byte
identical metrics.
"""

from __future__ import annotations

import heapq
import itertools
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .adjustment import epoch_report, mine_genesis
from .blocks import Block, block_id
from .codec import Digest
from .errors import InvalidBlock, UnresolvedReference
from .graph import BlockGraph
from .mining import SimulatedOracle, Snapshot, mine_block
from .ordering import OrderTrace, confirmed_prefix, order_with_trace
from .params import format_rational
from .scenario import NodeSpec, ScenarioConfig
from .views import ViewDescriptor

SCHEMA_VERSION = 1

HONEST = "honest"
WITHHOLDER = "withholder"
OSCILLATOR = "power_oscillator"
CLOCK_ATTACKER = "clock_attacker"


def _plain(value):
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, bytes):
        return value.hex()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


class Metrics:
    """Ordered event records, serialized one JSON object per line."""

    def __init__(self) -> None:
        self.records: List[dict] = []
        self.safety_ok = True

    def emit(self, kind: str, time: float, **fields) -> None:
        record = {"schema": SCHEMA_VERSION, "kind": kind, "time": float(time)}
        for key, value in fields.items():
            record[key] = _plain(value)
        self.records.append(record)

    def lines(self) -> List[str]:
        return [json.dumps(r, sort_keys=True) for r in self.records]

    def write(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            for line in self.lines():
                fh.write(line + "\n")

    def of_kind(self, kind: str) -> List[dict]:
        return [r for r in self.records if r["kind"] == kind]

    @property
    def summary(self) -> dict:
        rows = self.of_kind("summary")
        if not rows:
            raise LookupError("no summary record")
        return rows[-1]


class Node:
    """One simulated participant with its own graph, rng, and strategy."""

    def __init__(self, node_id: int, spec: NodeSpec, scenario: ScenarioConfig,
                 rng: random.Random) -> None:
        self.node_id = node_id
        self.spec = spec
        self.scenario = scenario
        self.rng = rng
        self.share = spec.share
        self.graph = BlockGraph(scenario.protocol)
        self.oracle = SimulatedOracle(seed=rng.getrandbits(32))
        self.mine_gen = 0
        self.mined = 0
        self.accepted = 0
        self.dropped = 0
        self.gated = 0
        self.tx_counter = 0
        # blocks that arrived before their references, or whose clock is
        # implausibly far ahead of the local main chain
        self.quarantine: Dict[Digest, Block] = {}
        self._trace: Optional[OrderTrace] = None
        self._trace_version = -1
        self._trace_full = False
        # clock_attacker private chain state
        self._attack_tip: Optional[Digest] = None
        self._withheld: List[Block] = []

    # -- local chain state -------------------------------------------------

    def trace(self, *, full: bool = False) -> OrderTrace:
        # light traces skip the per-view ordering; minting and gating only
        # need view structure and tips, so that's the per-event default
        if self._trace_version != self.graph.version or (full and not self._trace_full):
            self._trace = order_with_trace(self.graph, include_segments=full)
            self._trace_version = self.graph.version
            self._trace_full = full
        return self._trace

    def main_tips(self) -> Tuple[Digest, ...]:
        last = self.trace().views[-1]
        return tuple(path[-1] for path in last.paths)

    def main_max_clock(self) -> int:
        return max(self.graph.entry(d).block.clock for d in self.main_tips())

    def _payload(self) -> Tuple[bytes, ...]:
        ids = []
        for _ in range(self.scenario.tx_per_block):
            ids.append(f"tx:{self.node_id}:{self.tx_counter}".encode("ascii"))
            self.tx_counter += 1
        return tuple(ids)

    # -- minting -----------------------------------------------------------

    def mint(self, now: float) -> Optional[Block]:
        if self.spec.strategy == CLOCK_ATTACKER:
            block = self._mint_attack(now)
        else:
            block = self._mint_honest(now)
        if block is not None:
            self.graph.insert(block)
            self.mined += 1
            self._drain(now)
        return block

    def _mint_honest(self, now: float) -> Block:
        trace = self.trace()
        params = self.scenario.protocol
        if trace.pending_view_key is not None:
            key = trace.pending_view_key
            known = self.graph.geneses_for(key)
            return mine_genesis(self.graph, sorted(key), known, params,
                                self.oracle, now, payload=self._payload())
        snapshot = Snapshot(self.main_tips())
        return mine_block(self.graph, snapshot, params, self.oracle, now,
                          payload=self._payload())

    def _mint_attack(self, now: float) -> Optional[Block]:
        # keep extending the latest complete view while pointing the guider
        # at our own previous block, inflating the logical clock without
        # doing extra work
        trace = self.trace()
        tips = tuple(path[-1] for path in trace.views[-1].paths)
        honest = min(tips, key=lambda d: (-self.graph.entry(d).block.clock, d))
        guider = honest
        if self._attack_tip is not None:
            own_clock = self.graph.entry(self._attack_tip).block.clock
            if own_clock >= self.graph.entry(honest).block.clock:
                guider = self._attack_tip
        block = mine_block(self.graph, Snapshot(tips), self.scenario.protocol,
                           self.oracle, now, payload=self._payload(),
                           forced_guider=guider)
        self._attack_tip = block_id(block, self.graph.hash_fn)
        self._withheld.append(block)
        return block

    def take_withheld(self) -> List[Block]:
        batch = self._withheld
        self._withheld = []
        return batch

    # -- receiving ---------------------------------------------------------

    def _gate(self, block: Block) -> bool:
        """Reject-for-now: clock too far ahead of the local main chain."""
        slack = self.scenario.network.clock_slack
        return block.clock > self.main_max_clock() + slack

    def receive(self, block: Block, now: float) -> None:
        digest = block_id(block, self.graph.hash_fn)
        if digest in self.graph or digest in self.quarantine:
            return
        missing = self.graph.resolve_missing(block)
        if missing or self._gate(block):
            if not missing:
                self.gated += 1
            self.quarantine[digest] = block
            return
        try:
            self.graph.insert(block)
            self.accepted += 1
        except InvalidBlock:
            self.dropped += 1
            return
        except UnresolvedReference:
            self.quarantine[digest] = block
            return
        self._drain(now)

    def _drain(self, now: float) -> None:
        # quarantined blocks may unlock each other; iterate to a fixpoint
        progress = True
        while progress and self.quarantine:
            progress = False
            for digest in list(self.quarantine):
                block = self.quarantine[digest]
                if self.graph.resolve_missing(block) or self._gate(block):
                    continue
                del self.quarantine[digest]
                try:
                    self.graph.insert(block)
                    self.accepted += 1
                    progress = True
                except InvalidBlock:
                    self.dropped += 1
                except UnresolvedReference:
                    self.quarantine[digest] = block


def probe_consistency(nodes: Sequence[Node]) -> dict:
    """Compare confirmed prefixes across nodes.

    Consistent means that for every pair, one node's confirmed prefix is a
    prefix of the other's.  Any disagreement at a shared position is a
    safety violation.
    """
    data = [(node.node_id, confirmed_prefix(node.graph)) for node in nodes]
    consistent = True
    divergence = None
    for i in range(len(data)):
        for j in range(i + 1, len(data)):
            a, b = data[i][1], data[j][1]
            for k in range(min(len(a), len(b))):
                if a[k] != b[k]:
                    consistent = False
                    divergence = {"nodes": [data[i][0], data[j][0]],
                                  "index": k}
                    break
            if divergence:
                break
        if divergence:
            break
    common = 0
    if data:
        for column in zip(*(p for _, p in data)):
            if all(d == column[0] for d in column):
                common += 1
            else:
                break
    return {
        "consistent": consistent,
        "common_prefix": common,
        "lengths": {str(nid): len(prefix) for nid, prefix in data},
        "divergence": divergence,
    }


@dataclass
class RunResult:
    metrics: Metrics
    observer: BlockGraph
    nodes: List[Node]
    scenario: ScenarioConfig


class Simulation:
    def __init__(self, scenario: ScenarioConfig, seed: Optional[int] = None) -> None:
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        master = random.Random(self.seed)
        self.net_rng = random.Random(master.getrandbits(64))
        self.nodes = [Node(idx, spec, scenario, random.Random(master.getrandbits(64)))
                      for idx, spec in enumerate(scenario.nodes)]
        self.observer = BlockGraph(scenario.protocol)
        self.metrics = Metrics()
        self.now = 0.0
        self._events: List[tuple] = []
        self._seq = itertools.count()
        self._obs_trace: Optional[OrderTrace] = None
        self._obs_version = -1
        self._obs_full = False
        self._seen_views = 1
        self._epoch_seen: Set[tuple] = set()

    # -- scheduling --------------------------------------------------------

    def _push(self, time: float, kind: str, *payload) -> None:
        heapq.heappush(self._events, (time, next(self._seq), kind, payload))

    def _schedule_mine(self, node: Node, now: float) -> None:
        node.mine_gen += 1
        rate = node.share * self.scenario.mine_rate
        if rate <= 0:
            return
        dt = node.rng.expovariate(float(rate))
        self._push(now + dt, "mine", node.node_id, node.mine_gen)

    def _arrival(self, now: float) -> float:
        net = self.scenario.network
        start = now
        for burst in net.bursts:
            if burst.start <= now < burst.start + burst.duration:
                start = burst.start + burst.duration
                break
        return start + float(net.base_delay) + self.net_rng.uniform(0.0, float(net.jitter))

    def _broadcast(self, block: Block, origin: int, now: float) -> None:
        for node in self.nodes:
            if node.node_id == origin:
                continue
            self._push(self._arrival(now), "deliver", node.node_id, block)

    # -- observer bookkeeping ------------------------------------------------

    def _observer_trace(self, *, full: bool = False) -> OrderTrace:
        if self._obs_version != self.observer.version or (full and not self._obs_full):
            self._obs_trace = order_with_trace(self.observer, include_segments=full)
            self._obs_version = self.observer.version
            self._obs_full = full
        return self._obs_trace

    def _note_views(self, now: float) -> None:
        trace = self._observer_trace()
        while self._seen_views < len(trace.views):
            prev = trace.views[self._seen_views - 1]
            new = trace.views[self._seen_views]
            self.metrics.emit(
                "view_change", now,
                view=new.number,
                old_count=len(prev.geneses),
                new_count=len(new.geneses),
                vote_up=prev.decision.vote_up,
                epoch=prev.decision.epoch,
                deviant_rates=list(prev.decision.deviant_rates),
            )
            self._seen_views += 1

    def _emit_epochs(self, now: float) -> None:
        trace = self._observer_trace()
        for vt in trace.views:
            descriptor = ViewDescriptor(vt.number, vt.view_key, vt.geneses,
                                        len(vt.geneses))
            tips = Snapshot(tuple(path[-1] for path in vt.paths))
            evals, _ = epoch_report(self.observer, descriptor, tips,
                                    self.scenario.protocol)
            for ev in evals:
                for ballot in ev.ballots:
                    key = (vt.number, ev.epoch, ballot.chain)
                    if key in self._epoch_seen:
                        continue
                    self._epoch_seen.add(key)
                    self.metrics.emit(
                        "epoch", now,
                        view=vt.number,
                        epoch=ev.epoch,
                        chain=ballot.chain,
                        blocks=ballot.block_count,
                        samples=ballot.sample_total,
                        rate=ballot.rate,
                        vote=ballot.vote,
                        triggered=ev.triggered,
                    )

    def _probe(self, now: float, name: str = "") -> None:
        report = probe_consistency(self.nodes)
        if not report["consistent"]:
            self.metrics.safety_ok = False
        obs = self._observer_trace(full=True)
        self.metrics.emit(
            "probe", now,
            name=name,
            consistent=report["consistent"],
            common_prefix=report["common_prefix"],
            lengths=report["lengths"],
            divergence=report["divergence"],
            observer_ordered=len(obs.chain.blocks),
            observer_confirmed=len(confirmed_prefix(self.observer)),
        )

    # -- event handlers ------------------------------------------------------

    def _on_mine(self, now: float, node_id: int, gen: int) -> None:
        node = self.nodes[node_id]
        if gen != node.mine_gen:
            return
        block = node.mint(now)
        if block is not None:
            digest = self.observer.insert(block)
            entry = self.observer.entry(digest)
            self.metrics.emit(
                "mint", now,
                node=node_id,
                strategy=node.spec.strategy,
                digest=digest,
                clock=block.clock,
                number=block.number,
                sid=entry.sid,
                chains=entry.view_count,
                genesis=entry.block.parent is None,
            )
            self._note_views(now)
            if node.spec.strategy == WITHHOLDER:
                self._push(now + float(node.spec.withhold_horizon),
                           "release", node_id, block)
            elif node.spec.strategy != CLOCK_ATTACKER:
                self._broadcast(block, node_id, now)
        self._schedule_mine(node, now)

    def _on_deliver(self, now: float, node_id: int, block: Block) -> None:
        self.nodes[node_id].receive(block, now)

    def _on_release(self, now: float, node_id: int, block: Block) -> None:
        self._broadcast(block, node_id, now)

    def _on_burst(self, now: float, node_id: int) -> None:
        node = self.nodes[node_id]
        batch = node.take_withheld()
        if batch:
            self.metrics.emit("release", now, node=node_id, count=len(batch))
        for block in batch:
            self._broadcast(block, node_id, now)

    def _set_share(self, now: float, node_id: int, share: Fraction,
                   source: str) -> None:
        node = self.nodes[node_id]
        node.share = share
        self.metrics.emit("power", now, node=node_id, share=share, source=source)
        self._schedule_mine(node, now)

    def _on_toggle(self, now: float, node_id: int) -> None:
        node = self.nodes[node_id]
        low = node.spec.low_share
        high = node.spec.share
        target = low if node.share == high else high
        self._set_share(now, node_id, target, "oscillator")

    # -- main loop -----------------------------------------------------------

    def _setup(self) -> None:
        sc = self.scenario
        for node in self.nodes:
            self._schedule_mine(node, 0.0)
            if node.spec.strategy == OSCILLATOR:
                period = float(node.spec.period)
                t = period
                while t <= sc.duration:
                    self._push(t, "toggle", node.node_id)
                    t += period
            elif node.spec.strategy == CLOCK_ATTACKER:
                every = float(node.spec.burst_every)
                t = every
                while t <= sc.duration:
                    self._push(t, "burst", node.node_id)
                    t += every
        if sc.probe_interval > 0:
            t = sc.probe_interval
            while t <= sc.duration:
                self._push(t, "probe", "")
                t += sc.probe_interval
        for entry in sc.schedule:
            if entry.kind == "power":
                self._push(entry.time, "power", entry.node, entry.share)
            elif entry.kind == "probe":
                self._push(entry.time, "probe", entry.name)

    def run(self) -> RunResult:
        self._setup()
        try:
            while self._events:
                time, _, kind, payload = heapq.heappop(self._events)
                if time > self.scenario.duration:
                    break
                self.now = time
                if kind == "mine":
                    self._on_mine(time, *payload)
                elif kind == "deliver":
                    self._on_deliver(time, *payload)
                elif kind == "release":
                    self._on_release(time, *payload)
                elif kind == "burst":
                    self._on_burst(time, *payload)
                elif kind == "toggle":
                    self._on_toggle(time, *payload)
                elif kind == "power":
                    self._set_share(time, payload[0], payload[1], "schedule")
                elif kind == "probe":
                    self._probe(time, payload[0])
        finally:
            # the summary must land even if a handler blew up mid-run
            end = self.scenario.duration
            try:
                self._probe(end, "final")
                self._emit_epochs(end)
            except Exception:
                self.metrics.safety_ok = False
            obs = self._observer_trace(full=True)
            last = obs.views[-1]
            self.metrics.emit(
                "summary", end,
                blocks=len(self.observer),
                mined={str(n.node_id): n.mined for n in self.nodes},
                accepted={str(n.node_id): n.accepted for n in self.nodes},
                dropped={str(n.node_id): n.dropped for n in self.nodes},
                gated={str(n.node_id): n.gated for n in self.nodes},
                quarantined={str(n.node_id): len(n.quarantine) for n in self.nodes},
                view_changes=self._seen_views - 1,
                final_chain_count=len(last.geneses),
                ordered=len(obs.chain.blocks),
                confirmed=len(confirmed_prefix(self.observer)),
                safety_ok=self.metrics.safety_ok,
                seed=self.seed,
            )
        return RunResult(self.metrics, self.observer, self.nodes, self.scenario)


def run(scenario: ScenarioConfig, seed: Optional[int] = None) -> RunResult:
    """Execute one simulation; bit-identical output per (scenario, seed)."""
    return Simulation(scenario, seed=seed).run()
