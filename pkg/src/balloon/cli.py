"""Command line front end.

Every verb is a thin client of the HTTP service: by default it mounts the
FastAPI app in-process, with --server it talks to a remote instance over
plain HTTP instead.  Exit codes: 0 success, 1 a check failed (safety probe,
confirmed-prefix conflict, invalid block), 2 configuration or input error.
"""

from __future__ import annotations

import concurrent.futures
import pathlib
import sys
from typing import List, Optional, Sequence

import click

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2


class ServiceClient:
    """Uniform .post/.get wrapper around in-process or remote transport."""

    def __init__(self, server: Optional[str] = None) -> None:
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import app

            self._client = TestClient(app)

    def post(self, path: str, payload: dict) -> "ServiceReply":
        resp = self._client.post(path, json=payload)
        return ServiceReply(resp.status_code, resp.json())

    def get(self, path: str) -> "ServiceReply":
        resp = self._client.get(path)
        return ServiceReply(resp.status_code, resp.json())


class ServiceReply:
    def __init__(self, status: int, body: dict) -> None:
        self.status = status
        self.body = body

    @property
    def ok(self) -> bool:
        return self.status == 200

    @property
    def detail(self) -> str:
        if isinstance(self.body, dict):
            return str(self.body.get("detail", self.body))
        return str(self.body)


def _read_lines(path: str) -> List[str]:
    try:
        text = pathlib.Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise click.ClickException(f"cannot read {path}: {exc}")
    return [line for line in text.splitlines() if line.strip()]


def _fail_input(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_BAD_INPUT)


@click.group()
def main() -> None:
    """Adaptive parallel-chain consensus toolkit."""


def _run_one(config_path: str, seed: Optional[int], duration: Optional[float],
             out_dir: str, server: Optional[str]) -> int:
    import yaml

    try:
        raw = pathlib.Path(config_path).read_text(encoding="utf-8")
        data = yaml.safe_load(raw)
    except (OSError, yaml.YAMLError) as exc:
        click.echo(f"error: cannot load {config_path}: {exc}", err=True)
        return EXIT_BAD_INPUT
    if not isinstance(data, dict):
        click.echo(f"error: {config_path}: scenario must be a mapping", err=True)
        return EXIT_BAD_INPUT

    client = ServiceClient(server)
    reply = client.post("/run", {
        "scenario": data,
        "seed": seed,
        "duration": duration,
        "include_records": True,
        "include_dump": True,
    })
    if not reply.ok:
        click.echo(f"error: {config_path}: {reply.detail}", err=True)
        return EXIT_BAD_INPUT

    body = reply.body
    stem = pathlib.Path(config_path).stem
    used_seed = body["summary"].get("seed", seed)
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / f"{stem}-s{used_seed}.metrics.jsonl"
    dump_path = out / f"{stem}-s{used_seed}.chain.dump"
    metrics_path.write_text("".join(line + "\n" for line in body["records"]),
                            encoding="ascii")
    dump_path.write_text("".join(line + "\n" for line in body["dump"]),
                         encoding="ascii")

    s = body["summary"]
    click.echo(
        f"{config_path}: seed={used_seed} blocks={s['blocks']} "
        f"ordered={s['ordered']} confirmed={s['confirmed']} "
        f"view_changes={s['view_changes']} chains={s['final_chain_count']} "
        f"safety_ok={body['safety_ok']} -> {metrics_path}"
    )
    return EXIT_OK if body["safety_ok"] else EXIT_CHECK_FAILED


def _run_job(args: tuple) -> int:
    return _run_one(*args)


@main.command("run")
@click.option("--config", "configs", multiple=True, required=True,
              type=click.Path(), help="scenario file; repeat for a batch")
@click.option("--seed", type=int, default=None, help="override the scenario seed")
@click.option("--duration", type=float, default=None,
              help="override the scenario duration (seconds)")
@click.option("--out-dir", default=".", show_default=True,
              help="directory for metrics and chain dumps")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="run a batch in this many worker processes")
@click.option("--server", default=None, help="remote service URL (default: in-process)")
def cmd_run(configs: Sequence[str], seed: Optional[int], duration: Optional[float],
            out_dir: str, jobs: int, server: Optional[str]) -> None:
    """Execute scenarios; write metrics JSONL and a final chain dump each."""
    if jobs < 1:
        _fail_input("--jobs must be at least 1")
    tasks = [(path, seed, duration, out_dir, server) for path in configs]
    if jobs == 1 or len(tasks) == 1:
        codes = [_run_one(*task) for task in tasks]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            codes = list(pool.map(_run_job, tasks))
    sys.exit(max(codes))


@main.command("order")
@click.argument("dump_path", type=click.Path())
@click.option("--server", default=None, help="remote service URL")
def cmd_order(dump_path: str, server: Optional[str]) -> None:
    """Print the total order of a chain dump, one block per line."""
    lines = _read_lines(dump_path)
    reply = ServiceClient(server).post("/order", {"dump": lines})
    if not reply.ok:
        _fail_input(f"{dump_path}: {reply.detail}")
    for line in reply.body["lines"]:
        click.echo(line)
    sys.exit(EXIT_OK)


@main.command("diff")
@click.argument("dump_a", type=click.Path())
@click.argument("dump_b", type=click.Path())
@click.option("--server", default=None, help="remote service URL")
def cmd_diff(dump_a: str, dump_b: str, server: Optional[str]) -> None:
    """Compare the confirmed prefixes of two chain dumps."""
    reply = ServiceClient(server).post("/diff", {
        "dump_a": _read_lines(dump_a),
        "dump_b": _read_lines(dump_b),
    })
    if not reply.ok:
        _fail_input(reply.detail)
    body = reply.body
    click.echo(f"confirmed: a={body['length_a']} b={body['length_b']} "
               f"common_prefix={body['common_prefix']}")
    if body["consistent"]:
        click.echo("consistent: one confirmed prefix extends the other")
        sys.exit(EXIT_OK)
    d = body["divergence"]
    click.echo(f"conflict at position {d['index']}: {d['a']} != {d['b']}")
    sys.exit(EXIT_CHECK_FAILED)


@main.command("validate")
@click.argument("dump_path", type=click.Path())
@click.option("--strict-samples", is_flag=True,
              help="require exactly the locally recomputed sample set")
@click.option("--server", default=None, help="remote service URL")
def cmd_validate(dump_path: str, strict_samples: bool, server: Optional[str]) -> None:
    """Re-validate every block of a chain dump."""
    reply = ServiceClient(server).post("/validate", {
        "dump": _read_lines(dump_path),
        "strict_samples": strict_samples,
    })
    if not reply.ok:
        _fail_input(f"{dump_path}: {reply.detail}")
    body = reply.body
    if body["valid"]:
        click.echo(f"ok: {body['blocks']} blocks valid")
        sys.exit(EXIT_OK)
    for failure in body["failures"]:
        click.echo(f"invalid block {failure['index']} {failure['digest'][:16]}…: "
                   f"{failure['reason']} {failure['detail']}".rstrip())
    sys.exit(EXIT_CHECK_FAILED)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def cmd_serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
