"""permesh command line: analyze manifests, run scenarios, benchmark the
mediation pipeline, and serve the operator control API.

Exit codes: 0 pass, 1 scenario fail, 2 usage or input error.
"""

from __future__ import annotations

import json
import os
import sys

import click

from . import env
from .bench import bench_http, format_table, write_report
from .errors import PermeshError, ScenarioParseError
from .permissions import AppManifest
from .scenario import load_scenario, run_scenario
from .simulator import Simulator


def _tick_ms() -> float:
    raw = os.environ.get("PERMESH_SEED")
    if raw is None:
        return 1.0
    try:
        return float(int(raw))
    except ValueError:
        raise click.ClickException(f"PERMESH_SEED must be an integer, got {raw!r}")


def _standard_sim() -> Simulator:
    sim = Simulator(tick_ms=_tick_ms())
    sim.seed_standard()
    return sim


def _load_manifest(path: str) -> AppManifest:
    try:
        with open(path, encoding="utf-8") as fh:
            return AppManifest.from_dict(json.load(fh))
    except FileNotFoundError:
        raise PermeshError(f"manifest file not found: {path}")
    except json.JSONDecodeError as exc:
        raise PermeshError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")


def _analyze(sim: Simulator, manifest: AppManifest) -> dict:
    prompt = sim.render_install_prompt(manifest)
    footprint = set()
    for req in manifest.permissions:
        perm = sim.registry.get(req.id)
        params = perm.bind_params(list(req.params) if req.params else None)
        footprint |= sim.resolve_footprint(req.id, params)
    entries = [
        {"id": fid, "params": list(fp) if fp else None}
        for fid, fp in sorted(footprint, key=lambda e: (e[0], e[1] or ()))
    ]
    return {"package": manifest.package, "legacy": manifest.legacy,
            "prompt": prompt, "footprint": entries}


def _footprint_key(entry: dict) -> str:
    params = entry["params"]
    return entry["id"] + ("" if not params else f" restricted to {', '.join(params)}")


@click.group()
def main():
    """Deterministic split/merge permission-proxy simulator."""


@main.command()
@click.argument("manifest_path", type=click.Path())
@click.option("--compare", "compare_path", type=click.Path(), default=None,
              help="Second manifest; print the footprint diff against it.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def analyze(manifest_path, compare_path, fmt):
    """Print the install prompt and resolved native footprint of a manifest."""
    try:
        sim = _standard_sim()
        report = _analyze(sim, _load_manifest(manifest_path))
        diff = None
        if compare_path:
            other = _analyze(sim, _load_manifest(compare_path))
            mine = {_footprint_key(e) for e in report["footprint"]}
            theirs = {_footprint_key(e) for e in other["footprint"]}
            diff = {
                "removed": sorted(mine - theirs),
                "added": sorted(theirs - mine),
            }
    except PermeshError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)

    if fmt == "json":
        out = dict(report)
        if diff is not None:
            out["diff"] = diff
        click.echo(json.dumps(out, indent=2, sort_keys=True))
        return
    click.echo(f"package: {report['package']}" + ("  (legacy)" if report["legacy"] else ""))
    click.echo("install prompt:")
    for line in report["prompt"]:
        click.echo(f"  - {line}")
    click.echo("native footprint:")
    for entry in report["footprint"]:
        click.echo(f"  - {_footprint_key(entry)}")
    if diff is not None:
        click.echo("footprint diff vs compared manifest:")
        for item in diff["removed"]:
            click.echo(f"  - {item}")
        for item in diff["added"]:
            click.echo(f"  + {item}")


@main.command()
@click.argument("scenario_path", type=click.Path())
@click.option("--log", "log_path", type=click.Path(), default=None,
              help="Write the event log (line-delimited JSON) to this file.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def run(scenario_path, log_path, fmt):
    """Run a scenario headless; exit 0 on pass, 1 on fail."""
    try:
        scenario = load_scenario(scenario_path)
        report = run_scenario(scenario, tick_ms=_tick_ms())
    except PermeshError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    if log_path:
        with open(log_path, "w", encoding="utf-8") as fh:
            fh.write(report.log_ndjson)
    if fmt == "json":
        click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        click.echo(f"scenario {scenario.name or scenario_path}: "
                   + ("PASS" if report.passed else "FAIL"))
        for failure in report.failures:
            click.echo(f"  failure: {failure}")
    sys.exit(0 if report.passed else 1)


@main.command()
@click.option("--n", default=32, show_default=True, help="Number of POST requests per mode.")
@click.option("--latency-ms", default=1.0, show_default=True,
              help="Simulated per-request server latency.")
@click.option("--report", "report_dir", type=click.Path(), default=None,
              help="Directory for bench.csv and the rendered bench.png figure.")
def bench(n, latency_ms, report_dir):
    """Time n POSTs through the proxy pipeline vs the direct path."""
    result = bench_http(n=n, latency_ms=latency_ms)
    if n > 0:
        click.echo(format_table(result))
    else:
        click.echo("no requests issued (n=0); total 0 ms")
    if report_dir:
        if n > 0:
            for path in write_report(result, report_dir):
                click.echo(f"wrote {path}")
        else:
            click.echo("nothing to report for n=0")


@main.command()
@click.option("--port", default=7750, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--token", default=None, help="Require this shared secret in X-Permesh-Token.")
@click.option("--static", "static_dir", type=click.Path(), default=None,
              help="Directory of console static files to serve at /.")
def serve(port, host, token, static_dir):
    """Start the control API (and the operator console, if built)."""
    from .server import serve_forever

    try:
        serve_forever(host=host, port=port, token=token, static_dir=static_dir,
                      tick_ms=_tick_ms())
    except OSError as exc:
        click.echo(f"error: cannot bind {host}:{port}: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
