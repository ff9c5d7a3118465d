"""Command-line front end: batch projection, validation, trace replay
and the HTTP service.

Exit codes: 0 success, 1 runtime failure (inconsistency, missing
inputs at runtime), 2 validation/parse errors.
"""

from __future__ import annotations

import json
import sys
from typing import Optional

import click

from .ebn import load_repository
from .engine import KBMode
from .errors import EventCalcError, GlobalInconsistency, ValidationError
from .hybrid import HybridSession, SessionConfig, ingest_trace
from .parser import parse_domain
from .pool import ModelPool
from .service import load_domain_source

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


def _read_config(path: Optional[str]) -> dict[str, str]:
    if not path:
        return {}
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise click.UsageError(f"config line without '=': {line!r}")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _load(domain_path: str):
    try:
        source = load_domain_source(domain_path)
    except (OSError, EventCalcError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    result = parse_domain(source)
    for d in result.diagnostics:
        click.echo(str(d), err=True)
    if not result.ok:
        sys.exit(EXIT_VALIDATION)
    return result.domain


def _kb_mode(name: str) -> KBMode:
    return KBMode.SEMI_DESTRUCTIVE if name == "semi-destructive" else KBMode.NON_DESTRUCTIVE


@click.group()
def main():
    """Discrete event-calculus reasoner and activity recognizer."""


def _common_defaults(config, kwargs):
    """Config-file values fill in flags the user did not pass."""
    for key, value in config.items():
        flag = key.replace("-", "_")
        if flag == "format":
            flag = "fmt"
        if flag in kwargs and kwargs[flag] is None:
            kwargs[flag] = value
    return kwargs


@main.command()
@click.option("--domain", required=True, help=".ec file or directory")
@click.option("--horizon", type=int, default=None)
@click.option("--mode", type=click.Choice(["classical", "epistemic"]), default=None)
@click.option("--kb-mode", type=click.Choice(["non-destructive", "semi-destructive"]),
              default=None)
@click.option("--branch-cap", type=int, default=None)
@click.option("--flush-before", type=int, default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "plain"]), default=None)
@click.option("--config", "config_path", default=None, help="key=value file")
def run(domain, horizon, mode, kb_mode, branch_cap, flush_before, fmt, config_path):
    """Project a domain forward to a horizon, reporting every tick."""
    cfg = _read_config(config_path)
    kwargs = _common_defaults(cfg, dict(horizon=horizon, mode=mode, kb_mode=kb_mode,
                                        branch_cap=branch_cap, flush_before=flush_before,
                                        fmt=fmt))
    horizon = int(kwargs["horizon"] or 10)
    mode = kwargs["mode"] or "classical"
    kb_mode = kwargs["kb_mode"] or "non-destructive"
    branch_cap = int(kwargs["branch_cap"] or 1024)
    flush_before = kwargs["flush_before"]
    fmt = kwargs["fmt"] or "plain"

    d = _load(domain)
    try:
        pool = ModelPool(d, _kb_mode(kb_mode), branch_cap,
                         epistemic=(mode == "epistemic"))
    except EventCalcError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    try:
        while pool.clock < horizon:
            report = pool.tick()
            _emit_tick(report, pool, fmt)
            if flush_before is not None and pool.clock - int(flush_before) > 0:
                pool.flush_before(pool.clock - int(flush_before))
    except GlobalInconsistency as e:
        click.echo(f"inconsistent: {e}", err=True)
        sys.exit(EXIT_RUNTIME)
    except EventCalcError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_RUNTIME)
    sys.exit(EXIT_OK)


def _emit_tick(report, pool, fmt):
    if fmt == "json":
        click.echo(json.dumps(report.to_dict()))
        return
    click.echo(f"t={report.t} models={len(report.survivors)} "
               f"facts={report.fact_count} firings={report.rule_firings}")
    for ms in report.models:
        click.echo(f"  [{ms.id}] " + " ".join(ms.true))
        if ms.hcds:
            for h in ms.hcds:
                click.echo(f"    knows: {h}")
    for e in report.eliminated:
        click.echo(f"  eliminated {e.model_id}: {e.reason} ({e.detail})")


@main.command()
@click.option("--domain", required=True)
def validate(domain):
    """Parse and statically check a domain; exit 2 on diagnostics."""
    _load(domain)
    click.echo("ok")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--domain", required=True, help=".ec file or ruleset directory")
@click.option("--networks", default=None, help="directory of activity network XML files")
@click.option("--trace", required=True, help="JSON-lines sensor trace")
@click.option("--rounds", type=int, default=1)
@click.option("--threshold", type=float, default=None)
@click.option("--kb-mode", type=click.Choice(["non-destructive", "semi-destructive"]),
              default=None)
@click.option("--branch-cap", type=int, default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "plain"]), default=None)
@click.option("--config", "config_path", default=None)
def replay(domain, networks, trace, rounds, threshold, kb_mode, branch_cap, fmt,
           config_path):
    """Replay a sensor trace through the 3-step cycle, one cycle per action."""
    cfg = _read_config(config_path)
    kwargs = _common_defaults(cfg, dict(networks=networks, threshold=threshold,
                                        kb_mode=kb_mode, branch_cap=branch_cap, fmt=fmt))
    networks = kwargs["networks"]
    threshold = float(kwargs["threshold"] or 0.5)
    kb_mode = kwargs["kb_mode"] or "non-destructive"
    branch_cap = int(kwargs["branch_cap"] or 1024)
    fmt = kwargs["fmt"] or "plain"

    d = _load(domain)
    try:
        repertoire = load_repository(networks) if networks else {}
        config = SessionConfig(threshold=threshold, repertoire=repertoire)
        pool = ModelPool(d, _kb_mode(kb_mode), branch_cap)
        session = HybridSession(d, config, pool)
        schedule = ingest_trace(trace, rounds=rounds)
    except ValidationError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    except EventCalcError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    try:
        from .core import HappensFact
        for ev in schedule:
            report = session.run_cycle([HappensFact(ev.event, pool.clock + 1)])
            if fmt == "json":
                click.echo(json.dumps(report.to_dict()))
            else:
                _emit_cycle(report)
        _emit_stats(pool, fmt)
    except GlobalInconsistency as e:
        click.echo(f"inconsistent: {e}", err=True)
        sys.exit(EXIT_RUNTIME)
    except EventCalcError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_RUNTIME)
    sys.exit(EXIT_OK)


def _emit_cycle(report):
    click.echo(f"cycle t={report.t_start}->{report.t_end}")
    for p in report.poss:
        click.echo(f"  poss {p.user} {p.activity} {p.explanation_id} w{p.weight}")
    for a, c in sorted(report.confidences.items()):
        click.echo(f"  confidence {a} = {c:.4f}")
    for r in report.recognized:
        click.echo(f"  recognized {r.user} {r.activity} ({r.confidence:.4f})")
    for da in report.do_actions:
        click.echo(f"  do {da.kind} {da.payload} @t{da.at}")


def _emit_stats(pool, fmt):
    records = [{"t": r.t, "factCount": r.fact_count, "ruleFirings": r.rule_firings,
                "modelsAlive": len(r.survivors), "elapsedMs": r.elapsed_ms}
               for r in pool.reports]
    if fmt == "json":
        click.echo(json.dumps({"stats": records}))
    else:
        for r in records:
            click.echo(f"stats t={r['t']} facts={r['factCount']} "
                       f"firings={r['ruleFirings']} models={r['modelsAlive']} "
                       f"elapsed={r['elapsedMs']:.2f}ms")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the HTTP session service."""
    import uvicorn
    from .service import create_app
    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
