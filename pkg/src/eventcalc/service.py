"""HTTP/JSON session service for the reasoner.

Each session wraps one model pool (classical or epistemic) or one
hybrid session; all mutating calls on a session are serialized by a
per-session lock, and completed tick reports are fanned out to
server-sent-event subscribers so a UI can follow along live.
"""

from __future__ import annotations

import glob
import itertools
import json
import os
import queue
import threading
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .core import HappensFact
from .ebn import load_repository
from .engine import KBMode, Value
from .errors import (
    EventCalcError, FormatError, GlobalInconsistency, HistoryUnavailable,
    ModeUnavailable, RejectPast, ValidationError,
)
from .hybrid import HybridSession, SessionConfig
from .parser import parse_domain, parse_statement, parse_term_text
from .pool import ModelPool


def load_domain_source(path: str) -> str:
    """A single .ec file, or every .ec file of a directory concatenated
    in name order."""
    if os.path.isdir(path):
        parts = []
        for name in sorted(glob.glob(os.path.join(path, "*.ec"))):
            with open(name, encoding="utf-8") as fh:
                parts.append(fh.read())
        if not parts:
            raise FormatError(f"no .ec files in {path}")
        return "\n".join(parts)
    with open(path, encoding="utf-8") as fh:
        return fh.read()


class CreateSession(BaseModel):
    mode: str = "Classical"              # Classical | Epistemic | Hybrid
    kbMode: str = "NonDestructive"       # NonDestructive | SemiDestructive
    domainText: Optional[str] = None
    domainPath: Optional[str] = None
    networksDir: Optional[str] = None
    threshold: float = 0.5
    branchCap: int = 1024
    catalog: dict[str, str] = {}


class StatementBody(BaseModel):
    statement: str


class SenseBody(BaseModel):
    fluent: str
    value: bool


class CycleBody(BaseModel):
    statements: list[str] = []


@dataclass
class Session:
    id: str
    mode: str
    kb_mode: KBMode
    pool: ModelPool
    hybrid: Optional[HybridSession] = None
    lock: threading.Lock = field(default_factory=threading.Lock)
    subscribers: list["queue.SimpleQueue"] = field(default_factory=list)

    def publish(self, payload: dict):
        for q in list(self.subscribers):
            q.put(payload)

    def descriptor(self) -> dict:
        d = dict(self.pool.stats())
        d.pop("mode", None)
        d["id"] = self.id
        d["mode"] = self.mode
        d["kbMode"] = ("SemiDestructive" if self.kb_mode is KBMode.SEMI_DESTRUCTIVE
                       else "NonDestructive")
        if self.hybrid is not None:
            d["threshold"] = self.hybrid.config.threshold
            d["activities"] = sorted(self.hybrid.config.repertoire)
        return d


def create_app() -> FastAPI:
    app = FastAPI(title="eventcalc service")
    sessions: dict[str, Session] = {}
    counter = itertools.count(1)

    def get_session(sid: str) -> Session:
        s = sessions.get(sid)
        if s is None:
            raise HTTPException(404, f"no session {sid}")
        return s

    def fail(status: int, exc: Exception):
        raise HTTPException(status, f"{type(exc).__name__}: {exc}")

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSession):
        if body.mode not in ("Classical", "Epistemic", "Hybrid"):
            raise HTTPException(422, f"unknown mode {body.mode}")
        if body.kbMode not in ("NonDestructive", "SemiDestructive"):
            raise HTTPException(422, f"unknown kbMode {body.kbMode}")
        source = body.domainText
        if source is None:
            if body.domainPath is None:
                raise HTTPException(422, "domainText or domainPath required")
            try:
                source = load_domain_source(body.domainPath)
            except (OSError, FormatError) as e:
                fail(400, e)
        result = parse_domain(source)
        if not result.ok:
            raise HTTPException(400, detail={
                "error": "ValidationError",
                "diagnostics": [str(d) for d in result.errors]})
        kb_mode = (KBMode.SEMI_DESTRUCTIVE if body.kbMode == "SemiDestructive"
                   else KBMode.NON_DESTRUCTIVE)
        sid = f"s{next(counter)}"
        try:
            if body.mode == "Hybrid":
                repertoire = load_repository(body.networksDir) if body.networksDir else {}
                config = SessionConfig(threshold=body.threshold,
                                       repertoire=repertoire, catalog=dict(body.catalog))
                pool = ModelPool(result.domain, kb_mode, body.branchCap)
                hybrid = HybridSession(result.domain, config, pool)
                sessions[sid] = Session(sid, body.mode, kb_mode, pool, hybrid)
            else:
                pool = ModelPool(result.domain, kb_mode, body.branchCap,
                                 epistemic=(body.mode == "Epistemic"))
                sessions[sid] = Session(sid, body.mode, kb_mode, pool)
        except (ValidationError, ModeUnavailable, EventCalcError) as e:
            fail(400, e)
        return sessions[sid].descriptor()

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": [s.descriptor() for s in sessions.values()]}

    @app.get("/sessions/{sid}")
    def get_descriptor(sid: str):
        return get_session(sid).descriptor()

    @app.delete("/sessions/{sid}", status_code=204)
    def delete_session(sid: str):
        get_session(sid)
        del sessions[sid]

    def _submit(sid: str, body: StatementBody):
        s = get_session(sid)
        with s.lock:
            try:
                fact = parse_statement(body.statement, s.pool.clock)
                if s.hybrid is not None and isinstance(fact, HappensFact):
                    s.hybrid._ingest_event(fact)
                else:
                    s.pool.submit(fact)
            except RejectPast as e:
                fail(409, e)
            except FormatError as e:
                fail(400, e)
            except EventCalcError as e:
                fail(400, e)
            return {"queuedFor": fact.t, "clock": s.pool.clock}

    @app.post("/sessions/{sid}/events", status_code=202)
    def post_event(sid: str, body: StatementBody):
        return _submit(sid, body)

    @app.post("/sessions/{sid}/observations", status_code=202)
    def post_observation(sid: str, body: StatementBody):
        return _submit(sid, body)

    @app.post("/sessions/{sid}/sense")
    def post_sense(sid: str, body: SenseBody):
        s = get_session(sid)
        with s.lock:
            try:
                s.pool.sense(parse_term_text(body.fluent), body.value)
            except ModeUnavailable as e:
                fail(409, e)
            except FormatError as e:
                fail(400, e)
            except EventCalcError as e:
                fail(409, e)
            return {"clock": s.pool.clock,
                    "models": [s.pool._summarize(m).to_dict() for m in s.pool.models]}

    @app.post("/sessions/{sid}/tick")
    def post_tick(sid: str):
        s = get_session(sid)
        with s.lock:
            try:
                report = s.pool.tick()
            except GlobalInconsistency as e:
                payload = getattr(e, "report", None)
                s.publish({"type": "inconsistent",
                           "report": payload.to_dict() if payload else None})
                fail(409, e)
            except EventCalcError as e:
                fail(409, e)
            payload = report.to_dict()
            s.publish({"type": "tick", "report": payload})
            return payload

    @app.post("/sessions/{sid}/cycle")
    def post_cycle(sid: str, body: CycleBody):
        s = get_session(sid)
        if s.hybrid is None:
            raise HTTPException(409, "cycle requires a Hybrid session")
        with s.lock:
            try:
                facts = [parse_statement(line, s.pool.clock) for line in body.statements]
                report = s.hybrid.run_cycle(facts)
            except (RejectPast, GlobalInconsistency) as e:
                fail(409, e)
            except FormatError as e:
                fail(400, e)
            except EventCalcError as e:
                fail(409, e)
            payload = report.to_dict()
            s.publish({"type": "cycle", "report": payload})
            for tick_report in s.pool.reports[-3:]:
                s.publish({"type": "tick", "report": tick_report.to_dict()})
            return payload

    @app.get("/sessions/{sid}/models")
    def get_models(sid: str):
        s = get_session(sid)
        with s.lock:
            return {
                "clock": s.pool.clock,
                "models": [s.pool._summarize(m).to_dict() for m in s.pool.models],
                "tombstones": [e.to_dict() for e in s.pool.tombstones],
            }

    @app.get("/sessions/{sid}/models/{mid}/fluents")
    def get_fluents(sid: str, mid: str,
                    start: Optional[int] = Query(None, alias="from"),
                    end: Optional[int] = Query(None, alias="to")):
        s = get_session(sid)
        with s.lock:
            try:
                m = s.pool.model(mid)
            except KeyError:
                raise HTTPException(404, f"no model {mid}")
            lo = 0 if start is None else start
            hi = s.pool.clock if end is None else min(end, s.pool.clock)
            ticks = []
            for t in range(lo, hi + 1):
                try:
                    snap = m.wm.snapshot_at(t)
                except HistoryUnavailable as e:
                    fail(409, e)
                ticks.append({
                    "t": t,
                    "true": sorted(map(repr, snap.true)),
                    "released": sorted(repr(f) for f in snap.released
                                       if f not in snap.assigned),
                    "events": sorted(map(repr, m.wm.narrative_at(t))),
                })
            out = {"modelId": mid, "ticks": ticks}
            if m.knowledge is not None:
                from . import epistemic as ep
                out["knownTrue"] = sorted(repr(f) for f, v in m.knowledge.known.items() if v)
                out["knownFalse"] = sorted(repr(f) for f, v in m.knowledge.known.items() if not v)
                out["hcds"] = sorted(ep.format_hcd(h) for h in m.knowledge.hcds)
            return out

    @app.get("/sessions/{sid}/activities")
    def get_activities(sid: str):
        s = get_session(sid)
        if s.hybrid is None:
            raise HTTPException(409, "activities require a Hybrid session")
        with s.lock:
            return {"cycles": [c.to_dict() for c in s.hybrid.cycles]}

    @app.get("/sessions/{sid}/stats")
    def get_stats(sid: str):
        s = get_session(sid)
        with s.lock:
            stats = s.pool.stats()
            stats["perTick"] = [{
                "t": r.t,
                "factCount": r.fact_count,
                "ruleFirings": r.rule_firings,
                "modelsAlive": len(r.survivors),
                "elapsedMs": r.elapsed_ms,
            } for r in s.pool.reports]
            return stats

    @app.get("/sessions/{sid}/stream")
    def get_stream(sid: str):
        s = get_session(sid)
        q: queue.SimpleQueue = queue.SimpleQueue()
        backlog = [{"type": "tick", "report": r.to_dict()} for r in s.pool.reports]
        s.subscribers.append(q)

        def gen():
            try:
                for item in backlog:
                    yield f"data: {json.dumps(item)}\n\n"
                while True:
                    try:
                        item = q.get(timeout=30)
                    except Exception:
                        yield ": keep-alive\n\n"
                        continue
                    yield f"data: {json.dumps(item)}\n\n"
            finally:
                if q in s.subscribers:
                    s.subscribers.remove(q)

        return StreamingResponse(gen(), media_type="text/event-stream")

    return app


app = create_app()
