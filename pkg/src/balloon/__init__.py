"""Adaptive parallel-chain proof-of-work consensus, plus a deterministic
network simulator for studying it.

The protocol keeps several proof-of-work sub-chains in parallel, measures
how contended they are through per-block cohort samples, and lets the
miners vote to widen or narrow the set of sub-chains.  Cross-view block
ordering follows heaviest-subtree selection inside each view and stitches
views together at the voted anchor blocks.
"""

from .adjustment import (
    CHANGE,
    NO_CHANGE,
    ChainBallot,
    ChangeDecision,
    DecisionRecord,
    EpochEval,
    VoteTally,
    detect_view_change,
    epoch_report,
    mine_genesis,
    next_chain_count,
    recompute_decision,
    tally_outcome,
)
from .blocks import Block, block_bytes, block_id, chain_bytes, chain_hash, decode_block, make_genesis, pow_ok
from .codec import DIGEST_SIZE, DecodeError, Digest, default_hash, digest_int
from .errors import (
    BalloonError,
    EmptyEpoch,
    EmptyRates,
    EmptySnapshot,
    InconsistentTips,
    InvalidBlock,
    NotOnMainChain,
    OracleExhausted,
    SidOutOfRange,
    UnknownBlock,
    UnresolvedReference,
    WrongView,
)
from .graph import INITIAL_VIEW, BlockGraph, ViewKey
from .mining import (
    GrindingOracle,
    SimulatedOracle,
    Snapshot,
    assign_chain,
    merkle_proof,
    merkle_root,
    mine_block,
    solve_pow,
    verify_proof,
)
from .ordering import (
    OrderedChain,
    OrderTrace,
    ViewTrace,
    chain_confirmed,
    confirmed_prefix,
    export_lines,
    heaviest_path,
    is_confirmed,
    latest_main_blocks,
    order_transactions,
    order_with_trace,
    select_geneses,
    subtree_blocks,
    subtree_view,
    subtree_weight,
    total_order,
)
from .params import ProtocolParams, format_rational, parse_rational
from .sampling import SampleSet, cohort_members, epoch_rate, find_reference, sample
from .scenario import (
    AsyncBurst,
    InvalidScenario,
    NetworkModel,
    NodeSpec,
    ScenarioConfig,
    ScheduleEntry,
    dump_scenario,
    load_scenario,
    load_scenario_file,
    scenario_from_dict,
    scenario_to_dict,
)
from .simnet import Metrics, Node, RunResult, Simulation, probe_consistency, run
from .validation import ValidationVerdict, validate_block
from .views import (
    ViewDescriptor,
    anchors_of,
    genesis_of,
    guider_chain,
    same_chain,
    same_view,
    sid_of,
    view_complete,
    view_reachable,
)

__version__ = "0.1.0"
