"""Full block validation against a resolved graph.

Callers must quarantine blocks with unresolved references first; this module
assumes every digest the block mentions is present.  Checks cover structural
form (the two genesis shapes vs normal blocks), clock and number arithmetic,
merkle proof of the parent under the committed snapshot root, proof-of-work,
declared weight, and the sample set.

Sample sets are validated with a relaxation: blocks sharing the reference
clock may arrive after the miner froze its samples, so the declared set must
be a subset of the recomputed cohort and must either contain the reference
or be full to the cap.  Exact equality holds only in single-writer tests.
"""

from __future__ import annotations

from dataclasses import dataclass

from .blocks import Block, block_id, chain_hash, pow_ok
from .codec import digest_int
from .errors import InvalidBlock
from .graph import BlockGraph
from .mining import verify_proof
from .params import ProtocolParams
from .sampling import cohort_members, sample

BAD_CLOCK = "bad_clock"
BAD_NUMBER = "bad_number"
BAD_PROOF = "bad_proof"
BAD_POW = "bad_pow"
BAD_SAMPLES = "bad_samples"
BAD_GENESIS_FORM = "bad_genesis_form"
SAMPLE_CAP_EXCEEDED = "sample_cap_exceeded"


@dataclass(frozen=True)
class ValidationVerdict:
    accepted: bool
    reason: str = ""
    detail: str = ""


def _reject(reason: str, detail: str = "") -> ValidationVerdict:
    return ValidationVerdict(False, reason, detail)


_OK = ValidationVerdict(True)


def _check_samples(g: BlockGraph, block: Block, params: ProtocolParams,
                   strict: bool) -> ValidationVerdict:
    if len(block.samples) > params.sample_cap:
        return _reject(SAMPLE_CAP_EXCEEDED, f"{len(block.samples)} > {params.sample_cap}")
    if list(block.samples) != sorted(set(block.samples)):
        return _reject(BAD_SAMPLES, "samples not sorted or not unique")
    found = sample(g, block, params)
    if found is None:
        if block.samples:
            return _reject(BAD_SAMPLES, "samples declared but no reference exists")
        return _OK
    if strict:
        if tuple(block.samples) != found.members:
            return _reject(BAD_SAMPLES, "samples differ from recomputed set")
        return _OK
    declared = set(block.samples)
    if not declared:
        return _reject(BAD_SAMPLES, "reference exists but samples empty")
    # judge against the uncapped cohort: same-clock arrivals after the miner
    # froze its set may push honest members out of the capped view
    cohort = set(cohort_members(g, found.reference))
    if not declared <= cohort:
        return _reject(BAD_SAMPLES, "sample outside the recomputed cohort")
    if found.reference not in declared and len(declared) != params.sample_cap:
        return _reject(BAD_SAMPLES, "reference missing from a non-full sample set")
    return _OK


def _validate_genesis(g: BlockGraph, block: Block, params: ProtocolParams,
                      strict_samples: bool) -> ValidationVerdict:
    if block.root is not None or block.proof is not None:
        return _reject(BAD_GENESIS_FORM, "genesis carries a snapshot root or proof")
    if block.number != 0:
        return _reject(BAD_NUMBER, "genesis number must be 0")
    if block.guider is None:
        # only the one initial genesis may omit the guider
        if block_id(block, g.hash_fn) == g.genesis_digest:
            return _OK
        return _reject(BAD_GENESIS_FORM, "second parentless block without guider")
    if block.anchors:
        if list(block.anchors) != sorted(set(block.anchors)):
            return _reject(BAD_GENESIS_FORM, "anchors not sorted or not unique")
        expected_guider = min(block.anchors,
                              key=lambda d: (-g.entry(d).block.clock, d))
        if block.guider != expected_guider:
            return _reject(BAD_GENESIS_FORM, "guider is not the max-clock anchor")
        try:
            g.view_chain_count(frozenset(block.anchors))
        except InvalidBlock as exc:
            return _reject(BAD_GENESIS_FORM, str(exc))
    else:
        guider_entry = g.entry(block.guider)
        if guider_entry.block.parent is not None:
            return _reject(BAD_GENESIS_FORM, "anchorless genesis must chain off a genesis")
        if not guider_entry.view_key:
            return _reject(BAD_GENESIS_FORM, "cannot chain a genesis into the initial view")
    if block.clock != g.entry(block.guider).block.clock + 1:
        return _reject(BAD_CLOCK, "genesis clock must extend its guider")
    if block.weight != params.difficulty:
        return _reject(BAD_POW, "declared weight differs from difficulty")
    if not pow_ok(block, params, g.hash_fn):
        return _reject(BAD_POW, "hash does not meet difficulty")
    return _check_samples(g, block, params, strict_samples)


def validate_block(g: BlockGraph, block: Block, params: ProtocolParams = None,
                   strict_samples: bool = False) -> ValidationVerdict:
    params = params or g.params
    if block.timestamp < 0:
        return _reject(BAD_CLOCK, "negative timestamp")
    if block.parent is None:
        return _validate_genesis(g, block, params, strict_samples)
    if block.anchors:
        return _reject(BAD_GENESIS_FORM, "non-genesis block with anchors")
    if block.guider is None:
        return _reject(BAD_CLOCK, "missing guider")
    if block.clock != g.entry(block.guider).block.clock + 1:
        return _reject(BAD_CLOCK,
                       f"clock {block.clock} does not extend guider")
    parent_entry = g.entry(block.parent)
    if block.number != parent_entry.block.number + 1:
        return _reject(BAD_NUMBER,
                       f"number {block.number} does not extend parent")
    if block.root is None or block.proof is None:
        return _reject(BAD_PROOF, "missing snapshot root or inclusion proof")
    sid = digest_int(chain_hash(block, g.hash_fn)) % parent_entry.view_count
    if not verify_proof(block.root, block.parent, block.proof, sid, g.hash_fn):
        return _reject(BAD_PROOF, "parent not proven at this block's sub-chain slot")
    if block.weight != params.difficulty:
        return _reject(BAD_POW, "declared weight differs from difficulty")
    if not pow_ok(block, params, g.hash_fn):
        return _reject(BAD_POW, "hash does not meet difficulty")
    return _check_samples(g, block, params, strict_samples)
