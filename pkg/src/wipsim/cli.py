"""Command-line client for the simulation service.

By default the CLI talks to an in-process instance of the HTTP service, so
no server needs to be running; point WIPSIM_URL (or --url) at a remote
instance to run against that instead. Traces land in --out (or WIPSIM_OUT,
or the current directory) as <scenario>.csv next to <scenario>.report.json.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Dict, Optional

import click
import httpx
import numpy as np

from . import configio
from .runner import Trace, export_trace

_IN_PROCESS_BASE = "http://wipsim.local"


def _client(url: Optional[str]) -> httpx.Client:
    if url:
        return httpx.Client(base_url=url, timeout=600.0)
    # sync bridge into the in-process ASGI app; plain httpx ASGITransport is
    # async-only
    import warnings
    with warnings.catch_warnings():
        # fastapi's import shim warns about its own internals; not ours to fix
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient
    from .service import app
    return TestClient(app, base_url=_IN_PROCESS_BASE)


def _fail(resp: httpx.Response) -> None:
    try:
        detail = resp.json().get("detail", resp.text)
    except Exception:
        detail = resp.text
    click.echo(f"error ({resp.status_code}): {detail}", err=True)
    sys.exit(2)


def _write_outputs(out_dir: Path, name: str, payload: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    tr = payload.get("trace")
    if tr is not None:
        rows = np.array(tr["rows"], float)
        if rows.size == 0:
            rows = np.zeros((0, len(tr["columns"])))
        trace = Trace(columns=tuple(tr["columns"]), data=rows)
        export_trace(trace, out_dir / f"{name}.csv")
    report_path = out_dir / f"{name}.report.json"
    with open(report_path, "w", newline="\n") as fh:
        fh.write(json.dumps(payload["report"], sort_keys=True, indent=2) + "\n")


def _print_report(report: dict) -> None:
    for env in report["envelopes"]:
        mark = "PASS" if env["passed"] else "FAIL"
        click.echo(f"  [{mark}] {env['name']}: value={env['value']:.6g} "
                   f"threshold={env['threshold']:.6g} margin={env['margin']:.6g}")


@click.group()
@click.option("--url", envvar="WIPSIM_URL", default=None,
              help="Service base URL; default runs the service in-process.")
@click.pass_context
def main(ctx: click.Context, url: Optional[str]) -> None:
    """Scenario runner for the balancing simulator."""
    ctx.obj = {"url": url}


@main.command("list")
@click.pass_context
def list_cmd(ctx: click.Context) -> None:
    """Print the builtin scenarios."""
    with _client(ctx.obj["url"]) as client:
        resp = client.get("/scenarios")
        if resp.status_code != 200:
            _fail(resp)
        for s in resp.json():
            click.echo(f"{s['name']:<18} {s['duration']:>6.1f} s  "
                       f"{s['envelopes']} envelopes  {s['description']}")


@main.command()
@click.argument("target")
@click.option("--out", envvar="WIPSIM_OUT", default=".",
              type=click.Path(file_okay=False), help="Output directory.")
@click.option("--seed", type=int, default=None, help="Seed for sensor noise, if enabled.")
@click.option("--override", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Config override, repeatable (e.g. plant.m_b=25).")
@click.pass_context
def run(ctx: click.Context, target: str, out: str, seed: Optional[int],
        overrides: tuple) -> None:
    """Run a builtin scenario by name, or a scenario/run file by path."""
    payload: Dict[str, object] = {"seed": seed, "include_trace": True}
    file_overrides: Dict[str, object] = {}
    if os.path.isfile(target):
        try:
            spec, config_doc, file_overrides = configio.load_run_file(target)
        except (ValueError, json.JSONDecodeError) as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(2)
        payload["scenario"] = configio.scenario_to_dict(spec)
        if config_doc is not None:
            payload["config"] = config_doc
    else:
        payload["scenario"] = target
    cli_overrides = {}
    for item in overrides:
        try:
            key, value = configio.parse_override(item)
        except ValueError as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(2)
        cli_overrides[key] = value
    merged = {**file_overrides, **cli_overrides}
    if merged:
        payload["overrides"] = merged

    with _client(ctx.obj["url"]) as client:
        resp = client.post("/run", json=payload)
        if resp.status_code != 200:
            _fail(resp)
        body = resp.json()
    name = body["scenario"]
    _write_outputs(Path(out), name, body)
    _print_report(body["report"])
    if body["passed"]:
        click.echo(f"{name}: PASS")
    else:
        click.echo(f"{name}: FAIL")
        sys.exit(1)


@main.command()
@click.option("--out", envvar="WIPSIM_OUT", default=".",
              type=click.Path(file_okay=False), help="Output directory.")
@click.option("--seed", type=int, default=None)
@click.pass_context
def check(ctx: click.Context, out: str, seed: Optional[int]) -> None:
    """Run every builtin scenario; nonzero exit if any envelope fails."""
    out_dir = Path(out)
    failed = []
    with _client(ctx.obj["url"]) as client:
        resp = client.get("/scenarios")
        if resp.status_code != 200:
            _fail(resp)
        names = [s["name"] for s in resp.json()]
        summary = {}
        for name in names:
            resp = client.post("/run", json={"scenario": name, "seed": seed,
                                             "include_trace": True})
            if resp.status_code != 200:
                _fail(resp)
            body = resp.json()
            _write_outputs(out_dir, name, body)
            summary[name] = bool(body["passed"])
            status = "PASS" if body["passed"] else "FAIL"
            click.echo(f"{name:<18} {status}")
            if not body["passed"]:
                failed.append(name)
    aggregate = {"passed": not failed, "scenarios": summary}
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "check.report.json", "w", newline="\n") as fh:
        fh.write(json.dumps(aggregate, sort_keys=True, indent=2) + "\n")
    if failed:
        click.echo(f"FAIL: {', '.join(failed)}")
        sys.exit(1)
    click.echo("all scenarios pass")


if __name__ == "__main__":
    main()
