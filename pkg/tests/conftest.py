import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from balloon.adjustment import mine_genesis
from balloon.blocks import block_id, chain_hash
from balloon.codec import Digest, digest_int
from balloon.graph import BlockGraph
from balloon.mining import SimulatedOracle, Snapshot, mine_block
from balloon.params import ProtocolParams

# Epoch length 2 with warm-up tolerance 1: the first epoch of a fresh
# chain carries no samples at clock gap 1, so the deviation threshold must
# reach down to rate zero without voting.
FIGURE_PARAMS = ProtocolParams.from_dict({
    "difficulty": "1",
    "target_rate": "2",
    "vote_threshold": "1",
    "shrink_limit": "1/4",
    "epoch_clocks": 2,
    "sample_clock_gap": 1,
    "sample_delay_multiple": 1,
    "delay_bound": "1",
    "sample_cap": 64,
    "confirm_margin": "2",
    "initial_chains": 1,
})


@dataclass
class FigureFixture:
    """Single chain grows for five clocks, the third epoch measures rate 5
    against target 2 and votes to widen, and three geneses (one per new
    sub-chain) open view 2 above the anchor.  Two blocks hang off the
    anchor as greys."""

    graph: BlockGraph
    params: ProtocolParams
    main_path: List[Digest]          # g0 .. anchor, view-1 main chain
    anchor: Digest
    greys: List[Digest]
    clock2_siblings: List[Digest]    # five blocks sharing clock 2
    clock3_siblings: List[Digest]
    geneses: List[Digest]            # view-2 geneses in mint order
    view2_blocks: List[Digest]       # regular view-2 blocks in mint order


def _mint(g: BlockGraph, oracle, parent: Digest, clock_time: float,
          payload: Tuple[bytes, ...]) -> Digest:
    block = mine_block(g, Snapshot((parent,)), FIGURE_PARAMS, oracle,
                       clock_time, payload=payload)
    return g.insert(block)


def build_figure_fixture() -> FigureFixture:
    params = FIGURE_PARAMS
    g = BlockGraph(params)
    oracle = SimulatedOracle(seed=1)
    g0 = g.genesis_digest

    b1 = _mint(g, oracle, g0, 1.0, (b"b1",))

    clock2 = [_mint(g, oracle, b1, 2.0, (b"c2:%d" % i,)) for i in range(5)]
    main2 = clock2[0]
    clock3 = [_mint(g, oracle, main2, 3.0, (b"c3:%d" % i,)) for i in range(5)]
    main3 = clock3[0]
    c4 = _mint(g, oracle, main3, 4.0, (b"c4",))
    anchor = _mint(g, oracle, c4, 5.0, (b"c5",))
    greys = [_mint(g, oracle, anchor, 6.0, (b"grey:%d" % i,)) for i in range(2)]

    # three new sub-chains: one first-of-view genesis, two chained ones;
    # payload salts steer each genesis onto a distinct sub-chain id
    def mint_genesis(wanted: set, known: List[Digest], when: float) -> Digest:
        for salt in range(10000):
            block = mine_genesis(g, [anchor], known, params, oracle, when,
                                 payload=(b"genesis:%d" % salt,))
            sid = digest_int(chain_hash(block, g.hash_fn)) % 3
            if sid in wanted:
                return g.insert(block)
        raise AssertionError("salt scan exhausted")

    ga = mint_genesis({0, 1, 2}, [], 6.0)
    taken = {g.entry(ga).sid}
    gb = mint_genesis({0, 1, 2} - taken, [ga], 7.0)
    taken.add(g.entry(gb).sid)
    gc = mint_genesis({0, 1, 2} - taken, [ga, gb], 8.0)
    geneses = [ga, gb, gc]

    # two regular blocks; at least one sub-chain keeps its genesis as tip,
    # so view 2 still waits on its first epoch and stays last
    tips = {g.entry(d).sid: d for d in geneses}
    view2 = []
    for i in range(2):
        snapshot = Snapshot(tuple(tips[s] for s in range(3)))
        when = max(g.entry(d).block.clock for d in snapshot.blocks) + 1.0
        block = mine_block(g, snapshot, params, oracle, when,
                           payload=(b"v2:%d" % i,))
        d = g.insert(block)
        tips[g.entry(d).sid] = d
        view2.append(d)

    return FigureFixture(
        graph=g,
        params=params,
        main_path=[g0, b1, main2, main3, c4, anchor],
        anchor=anchor,
        greys=greys,
        clock2_siblings=clock2,
        clock3_siblings=clock3,
        geneses=geneses,
        view2_blocks=view2,
    )


@pytest.fixture(scope="session")
def figure() -> FigureFixture:
    return build_figure_fixture()


@pytest.fixture(scope="session")
def service_client():
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from balloon.service import app

    return TestClient(app)
