"""HTTP facade over the protocol core.

The CLI talks to these endpoints (in-process by default), so everything a
verb can do is expressed here as a request/response pair.  Parse problems
are HTTP 400; domain outcomes such as a failed safety probe or an invalid
block travel inside a 200 response and are mapped to exit codes by the
client.
"""

from __future__ import annotations

from typing import List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .errors import BalloonError
from .graph import BlockGraph
from .ordering import confirmed_prefix, export_lines, order_with_trace
from .scenario import InvalidScenario, scenario_from_dict
from .simnet import SCHEMA_VERSION, run
from .validation import validate_block

app = FastAPI(title="balloon", version="0.1.0")


class RunRequest(BaseModel):
    scenario: dict
    seed: Optional[int] = None
    duration: Optional[float] = None
    include_records: bool = True
    include_dump: bool = True


class RunResponse(BaseModel):
    safety_ok: bool
    summary: dict
    records: List[str] = Field(default_factory=list)
    dump: List[str] = Field(default_factory=list)


class OrderRequest(BaseModel):
    dump: List[str]


class OrderResponse(BaseModel):
    lines: List[str]
    blocks: int
    ordered: int
    confirmed: int
    pending_view: bool


class DiffRequest(BaseModel):
    dump_a: List[str]
    dump_b: List[str]


class DiffResponse(BaseModel):
    consistent: bool
    common_prefix: int
    length_a: int
    length_b: int
    divergence: Optional[dict] = None


class ValidateRequest(BaseModel):
    dump: List[str]
    strict_samples: bool = False


class BlockVerdict(BaseModel):
    index: int
    digest: str
    accepted: bool
    reason: str = ""
    detail: str = ""


class ValidateResponse(BaseModel):
    valid: bool
    blocks: int
    failures: List[BlockVerdict] = Field(default_factory=list)


def _graph_from_dump(lines: List[str]) -> BlockGraph:
    try:
        return BlockGraph.from_dump(lines)
    except BalloonError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=f"malformed dump: {exc}")


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "schema": SCHEMA_VERSION}


@app.post("/run", response_model=RunResponse)
def run_scenario(req: RunRequest) -> RunResponse:
    try:
        data = dict(req.scenario)
        if req.seed is not None:
            data["seed"] = req.seed
        if req.duration is not None:
            data["duration"] = req.duration
        scenario = scenario_from_dict(data)
    except (InvalidScenario, BalloonError, ValueError, TypeError, KeyError) as exc:
        raise HTTPException(status_code=400, detail=f"bad scenario: {exc}")
    result = run(scenario)
    return RunResponse(
        safety_ok=result.metrics.safety_ok,
        summary=result.metrics.summary,
        records=result.metrics.lines() if req.include_records else [],
        dump=result.observer.dump_lines() if req.include_dump else [],
    )


@app.post("/order", response_model=OrderResponse)
def order_dump(req: OrderRequest) -> OrderResponse:
    g = _graph_from_dump(req.dump)
    trace = order_with_trace(g)
    return OrderResponse(
        lines=export_lines(g, trace.chain),
        blocks=len(g),
        ordered=len(trace.chain.blocks),
        confirmed=len(confirmed_prefix(g)),
        pending_view=trace.pending_view_key is not None,
    )


@app.post("/diff", response_model=DiffResponse)
def diff_dumps(req: DiffRequest) -> DiffResponse:
    ga = _graph_from_dump(req.dump_a)
    gb = _graph_from_dump(req.dump_b)
    pa = confirmed_prefix(ga)
    pb = confirmed_prefix(gb)
    divergence = None
    common = 0
    for i in range(min(len(pa), len(pb))):
        if pa[i] != pb[i]:
            divergence = {"index": i, "a": pa[i].hex(), "b": pb[i].hex()}
            break
        common += 1
    return DiffResponse(
        consistent=divergence is None,
        common_prefix=common,
        length_a=len(pa),
        length_b=len(pb),
        divergence=divergence,
    )


@app.post("/validate", response_model=ValidateResponse)
def validate_dump(req: ValidateRequest) -> ValidateResponse:
    # replay into a fresh graph without the insert-time check, so every
    # block gets an explicit verdict even after a bad one
    try:
        loose = BlockGraph.from_dump(req.dump, validate=False)
    except BalloonError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=f"malformed dump: {exc}")
    failures: List[BlockVerdict] = []
    checked = 0
    for index, digest in enumerate(loose.digests_in_order()):
        if digest == loose.genesis_digest:
            continue
        block = loose.entry(digest).block
        verdict = validate_block(loose, block, strict_samples=req.strict_samples)
        checked += 1
        if not verdict.accepted:
            failures.append(BlockVerdict(
                index=index,
                digest=digest.hex(),
                accepted=False,
                reason=verdict.reason,
                detail=verdict.detail,
            ))
    return ValidateResponse(valid=not failures, blocks=checked, failures=failures)
