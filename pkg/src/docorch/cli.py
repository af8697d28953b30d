"""Operator CLI: a thin client of the HTTP service.

Commands serialize their arguments into the service's request models and
POST them. With ``--server`` they target a running instance; otherwise the
app is instantiated in-process from ``--config`` and driven through an
in-memory client, so the same wire surface is exercised either way.
"""

from __future__ import annotations

import base64
import json
import mimetypes
import sys
from pathlib import Path

import click
import httpx


def _client(server: str | None, config: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    if not config:
        raise click.UsageError("provide --config (in-process) or --server URL")
    from starlette.testclient import TestClient

    from .service import create_app

    return TestClient(create_app(config))


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    try:
        resp = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        _fail(f"service unreachable: {exc}")
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail")
        except ValueError:
            detail = resp.text
        _fail(f"{path} failed ({resp.status_code}): {detail}")
    return resp.json()


@click.group()
def main():
    """Multi-agent document VQA orchestration."""


@main.command("run")
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False))
@click.option("--server", "server", default=None, help="URL of a running service.")
@click.option("--question", required=True)
@click.option("--image", "image", required=True, type=click.Path(dir_okay=False))
@click.option("--lite", is_flag=True, help="Run stages 1, 2, 5 only.")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None)
def cmd_run(config, server, question, image, lite, trace_path):
    """Answer one question about one document image."""
    image_path = Path(image)
    if not image_path.is_file():
        _fail(f"image file not found: {image_path}")
    mime = mimetypes.guess_type(image_path.name)[0] or "image/png"
    payload = {
        "question": question,
        "image_b64": base64.b64encode(image_path.read_bytes()).decode("ascii"),
        "mime_type": mime,
        "lite": lite,
        "include_trace": True,
    }
    with _client(server, config) as client:
        body = _post(client, "/run", payload)
    if trace_path:
        Path(trace_path).write_text(
            json.dumps(body["trace"], ensure_ascii=False, indent=2),
            encoding="utf-8",
        )
    click.echo(body["answer"])


@main.command("eval")
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False))
@click.option("--server", "server", default=None)
@click.option("--dataset", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--parallel", type=int, default=None)
@click.option("--lite", is_flag=True)
def cmd_eval(config, server, dataset, out_path, parallel, lite):
    """Score the pipeline over a JSONL dataset.

    Dataset and output paths are resolved where the pipeline runs: locally
    under --config, on the server under --server.
    """
    if not server and not Path(dataset).is_file():
        _fail(f"dataset file not found: {dataset}")
    payload = {
        "dataset_path": str(Path(dataset).resolve()) if not server else dataset,
        "out_path": str(Path(out_path).resolve()) if not server else out_path,
        "parallel": parallel,
        "lite": lite,
    }
    with _client(server, config) as client:
        body = _post(client, "/eval", payload)
    click.echo(f"records: {body['records']}")
    if body.get("corpus_anls") is not None:
        click.echo(f"corpus ANLS: {body['corpus_anls']:.4f}")
    stats = body.get("stats")
    if stats:
        click.echo(
            "activation: "
            f"disagreement {stats['disagreement_rate']:.1%}, "
            f"stress failure {stats['stress_failure_rate']:.1%}, "
            f"debate {stats['debate_rate']:.1%}"
        )


@main.group("trace")
def cmd_trace():
    """Trace inspection."""


@cmd_trace.command("show")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def cmd_trace_show(path):
    """Pretty-print a saved trace JSON."""
    try:
        trace = json.loads(Path(path).read_text(encoding="utf-8"))
    except ValueError as exc:
        _fail(f"not a trace file: {exc}")
    click.echo(f"question: {trace.get('question_id')}")
    click.echo(f"stages:   {' -> '.join(trace.get('stage_path', []))}")
    for key in ("a_T", "a_E", "a_D", "a_C", "a_F"):
        value = trace.get("answers", {}).get(key)
        if value is not None:
            click.echo(f"{key}: {value}")
    if trace.get("plan"):
        click.echo(f"plan:     {' -> '.join(trace['plan'])}")
    if trace.get("flags"):
        click.echo(f"flags:    {', '.join(trace['flags'])}")
    timings = trace.get("timings_ms", {})
    for stage in ("S1", "S2", "S3", "S4", "S5"):
        if stage in timings:
            click.echo(f"{stage}: {timings[stage]:.1f} ms")


@main.command("serve")
@click.option("--config", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def cmd_serve(config, host, port):
    """Serve the pipeline over HTTP."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(config), host=host, port=port)


if __name__ == "__main__":
    main()
