"""Subtree weights across views, figure ordering, confirmation, export."""

from fractions import Fraction

import pytest

from balloon.errors import NotOnMainChain
from balloon.graph import BlockGraph
from balloon.ordering import (
    chain_confirmed,
    confirmed_prefix,
    export_lines,
    heaviest_path,
    is_confirmed,
    latest_main_blocks,
    offspring,
    order_transactions,
    order_with_trace,
    select_geneses,
    subtree_blocks,
    subtree_view,
    subtree_weight,
    total_order,
)

from builders import multi_view_graph
from oracles import all_subtrees_oracle, dedup_oracle


def test_offspring_is_parent_closure():
    g = multi_view_graph(0)
    for base in g.digests_in_order():
        got = offspring(g, base)
        assert base in got
        for d in got:
            if d != base:
                assert g.block(d).parent in got


def test_subtree_sets_and_weights_match_oracle():
    for seed in range(10):
        g = multi_view_graph(seed)
        expected = all_subtrees_oracle(g)
        for base in g.digests_in_order():
            members, weight = expected[base]
            assert subtree_blocks(g, base) == members, seed
            assert subtree_weight(g, base) == weight, seed
            view = subtree_view(g, base)
            assert view.subtree_blocks == frozenset(members)
            assert view.subtree_weight == weight


# -- the figure graph, checked block by block ---------------------------------

def test_figure_anchor_subtree(figure):
    g = figure.graph
    # anchor's subtree: itself, both greys, all three view-2 geneses and
    # both regular view-2 blocks, which support it through the anchor lineage
    expected = ({figure.anchor} | set(figure.greys) | set(figure.geneses)
                | set(figure.view2_blocks))
    assert subtree_blocks(g, figure.anchor) == expected
    assert subtree_weight(g, figure.anchor) == Fraction(len(expected))


def test_figure_main_block_subtree_weight(figure):
    g = figure.graph
    # main2 carries everything above it: the whole graph except its two
    # ancestors and the losing clock-2 siblings; clock-3 losers are its
    # children and so count for it
    main2 = figure.main_path[2]
    losers_c2 = [d for d in figure.clock2_siblings if d != main2]
    expected = len(g) - 2 - len(losers_c2)
    assert subtree_weight(g, main2) == Fraction(expected)
    assert len(subtree_blocks(g, main2)) == expected


def test_figure_total_order_shape(figure):
    g, params = figure.graph, figure.params
    chain = total_order(g, params)
    trace = order_with_trace(g, params)
    assert len(trace.views) == 2
    v1, v2 = trace.views
    # view 1 emits the main path up to the anchor; greys and losing
    # siblings stay out, the anchor stays in
    assert set(v1.ordered) == set(figure.main_path)
    assert figure.anchor in v1.ordered
    for grey in figure.greys:
        assert grey not in chain.blocks
    # view 2 sits strictly after view 1 in the order
    assert chain.blocks[:len(v1.ordered)] == v1.ordered
    v1_clocks = [g.clock_of(d) for d in v1.ordered]
    v2_clocks = [g.clock_of(d) for d in v2.ordered]
    assert min(v2_clocks) > max(v1_clocks)
    assert chain.view_boundaries == ((1, 0), (2, len(v1.ordered)))


def test_figure_order_is_clock_then_digest(figure):
    g, params = figure.graph, figure.params
    for view in order_with_trace(g, params).views:
        keys = [(g.clock_of(d), d) for d in view.ordered]
        assert keys == sorted(keys)


def test_heaviest_path_follows_figure_main_chain(figure):
    g = figure.graph
    path = heaviest_path(g, figure.main_path[0])
    assert list(path[:len(figure.main_path)]) == figure.main_path


def test_select_geneses_picks_heaviest_per_sid(figure):
    g = figure.graph
    key = frozenset({figure.anchor})
    gens = select_geneses(g, key)
    assert gens is not None and len(gens) == 3
    assert set(gens) == set(figure.geneses)
    for sid, gen in enumerate(gens):
        assert g.entry(gen).sid == sid


def test_latest_main_blocks_spans_current_view(figure):
    g, params = figure.graph, figure.params
    snap = latest_main_blocks(g, params)
    assert len(snap) == 3
    for sid, d in enumerate(snap.blocks):
        assert g.entry(d).sid == sid
        assert g.entry(d).view_key == frozenset({figure.anchor})


def test_confirmation_on_figure_junctions(figure):
    g, params = figure.graph, figure.params
    # clock-2 junction: main2 leads its four siblings by well over margin 2
    main2 = figure.main_path[2]
    assert chain_confirmed(g, main2, params)
    assert is_confirmed(g, figure.main_path[1], params)
    # a view-2 genesis with no support yet weighs 1 < margin: unconfirmed
    # even without a visible rival, so the cut lands at the view boundary
    assert confirmed_prefix(g, params) == tuple(figure.main_path)
    with pytest.raises(NotOnMainChain):
        is_confirmed(g, figure.greys[0], params)


def test_contested_junction_blocks_confirmation():
    from builders import GHOST_PARAMS
    from balloon.blocks import block_id
    from balloon.mining import SimulatedOracle, Snapshot, mine_block

    g = BlockGraph(GHOST_PARAMS)
    oracle = SimulatedOracle(seed=3)

    def mint(parent, now):
        block = mine_block(g, Snapshot((parent,)), GHOST_PARAMS, oracle, now)
        g.insert(block)
        return block_id(block)

    g0 = g.digests_in_order()[0]
    a = mint(g0, 1.0)
    b = mint(a, 2.0)
    c = mint(a, 2.5)
    mint(b, 3.0)
    mint(b, 4.0)
    # b's subtree weighs 3 against c's 1: short of c + margin 3
    assert not chain_confirmed(g, b)
    assert chain_confirmed(g, a)
    chain = total_order(g)
    # b heads the order after a; its descendants chain-dominate their own
    # junctions but inherit b's uncertainty
    tail = chain.blocks[2]
    assert tail == b
    assert not is_confirmed(g, chain.blocks[3])
    assert confirmed_prefix(g) == (g0, a)


def test_confirmed_prefix_is_order_prefix():
    for seed in range(8):
        g = multi_view_graph(seed)
        chain = total_order(g)
        prefix = confirmed_prefix(g)
        assert chain.blocks[:len(prefix)] == prefix


def test_order_transactions_dedups_in_order():
    for seed in range(8):
        g = multi_view_graph(seed)
        chain = total_order(g)
        got = order_transactions(chain, g)
        expected = dedup_oracle(g.block(d).payload for d in chain.blocks)
        assert list(got) == expected


def test_export_lines_format(figure):
    g, params = figure.graph, figure.params
    chain = total_order(g, params)
    lines = export_lines(g, chain)
    assert len(lines) == len(chain.blocks)
    for pos, line in enumerate(lines):
        cols = line.split("\t")
        assert len(cols) == 5
        assert int(cols[0]) == pos
        assert bytes.fromhex(cols[1]) == chain.blocks[pos]
        assert int(cols[2]) in (1, 2)
        assert int(cols[3]) == g.clock_of(chain.blocks[pos])
    # view column flips exactly at the recorded boundary
    flip = [int(l.split("\t")[2]) for l in lines]
    boundary = dict(chain.view_boundaries)[2]
    assert all(v == 1 for v in flip[:boundary])
    assert all(v == 2 for v in flip[boundary:])
