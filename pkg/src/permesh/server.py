"""Loopback control API: state snapshots, the event stream, the pending
decision queue, and operator actions.

The simulation loop runs on its own thread; HTTP handlers only take the
simulator lock briefly, so no endpoint blocks the loop.
"""

from __future__ import annotations

import socket
import threading
import time
from typing import Optional

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .errors import (
    AlreadyResolvedError,
    InvalidSessionError,
    NotALegacyAppError,
    PermeshError,
    ScenarioParseError,
    UnknownDecisionError,
)
from .events import Event
from .scenario import ScenarioRunner, load_scenario
from .simulator import Simulator

_EVENT_TYPES = {
    "firewall-prompt": "pending",
    "firewall-decision": "resolution",
    "network-state": "state-change",
    "set-policy": "state-change",
}


def wire_event(event: Event) -> dict:
    d = event.to_dict()
    d["type"] = _EVENT_TYPES.get(event.action, "event")
    return d


class ControlSession:
    """One simulator (possibly running a scenario) behind the API."""

    def __init__(self, tick_ms: float = 1.0):
        self.tick_ms = tick_ms
        self.sim = Simulator(tick_ms=tick_ms)
        self.sim.seed_standard()
        self.runner: Optional[ScenarioRunner] = None
        self.thread: Optional[threading.Thread] = None
        self.report = None

    @property
    def running(self) -> bool:
        return self.thread is not None and self.thread.is_alive()

    def start_scenario(self, path: str) -> None:
        if self.running:
            raise RuntimeError("a scenario is already running")
        scenario = load_scenario(path)
        self.runner = ScenarioRunner(scenario, tick_ms=self.tick_ms, interactive=True)
        self.sim = self.runner.sim
        self.report = None

        def work():
            self.report = self.runner.run()

        self.thread = threading.Thread(target=work, daemon=True)
        self.thread.start()

    def events_since(self, since: int, wait_s: float) -> list[dict]:
        deadline = time.monotonic() + min(wait_s, 25.0)
        while True:
            with self.sim.lock:
                entries = self.sim.log.entries(since=since)
            if entries or time.monotonic() >= deadline:
                return [wire_event(e) for e in entries]
            time.sleep(0.02)


class DecideBody(BaseModel):
    id: int
    action: str


class PolicyBody(BaseModel):
    app: str
    allowedDomains: list[str]
    defaultAction: str = "prompt"


class UserActionBody(BaseModel):
    sessionId: str


class ScenarioBody(BaseModel):
    path: str


class NetworkBody(BaseModel):
    connected: bool


def create_app(session: ControlSession, token: Optional[str] = None,
               static_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="permesh control API")

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        if token is not None and request.url.path.startswith("/v1/"):
            if request.headers.get("X-Permesh-Token") != token:
                return JSONResponse({"detail": "bad or missing token"}, status_code=401)
        return await call_next(request)

    @app.get("/v1/state")
    def state():
        with session.sim.lock:
            snapshot = session.sim.state_snapshot()
        snapshot["scenarioRunning"] = session.running
        if session.report is not None:
            snapshot["scenarioPassed"] = session.report.passed
        return snapshot

    @app.get("/v1/events")
    def events(since: int = 0, wait: float = 0.0):
        lines = session.events_since(since, wait)
        import json

        body = "".join(json.dumps(e, sort_keys=True) + "\n" for e in lines)
        return PlainTextResponse(body, media_type="application/x-ndjson")

    @app.get("/v1/pending")
    def pending():
        with session.sim.lock:
            items = session.sim.firewall.unresolved()
            return [
                {
                    "id": p.id,
                    "app": p.app,
                    "method": p.method,
                    "host": p.host,
                    "path": p.path,
                    "createdAt": p.created_at,
                }
                for p in items
            ]

    @app.post("/v1/decide")
    def decide(body: DecideBody):
        if body.action not in ("allow", "block", "fake"):
            raise HTTPException(422, f"bad action {body.action!r}")
        try:
            with session.sim.lock:
                session.sim.decide_pending(body.id, body.action)
                if session.runner is not None:
                    session.runner.wakeup.notify_all()
        except UnknownDecisionError as exc:
            raise HTTPException(404, str(exc))
        except AlreadyResolvedError as exc:
            raise HTTPException(409, str(exc))
        return {"ok": True, "id": body.id, "action": body.action}

    @app.post("/v1/policy")
    def policy(body: PolicyBody):
        try:
            with session.sim.lock:
                session.sim.set_slice_policy(
                    body.app, body.allowedDomains, body.defaultAction
                )
        except NotALegacyAppError as exc:
            raise HTTPException(422, str(exc))
        except PermeshError as exc:
            raise HTTPException(422, str(exc))
        return {"ok": True}

    @app.post("/v1/user-action")
    def user_action(body: UserActionBody):
        try:
            with session.sim.lock:
                token_obj = session.sim.issue_user_action(body.sessionId)
        except InvalidSessionError as exc:
            raise HTTPException(404, str(exc))
        return {"ok": True, "token": token_obj.id}

    @app.post("/v1/scenario/start")
    def scenario_start(body: ScenarioBody):
        try:
            session.start_scenario(body.path)
        except RuntimeError as exc:
            raise HTTPException(409, str(exc))
        except ScenarioParseError as exc:
            raise HTTPException(422, str(exc))
        return {"ok": True}

    @app.post("/v1/network")
    def network(body: NetworkBody):
        with session.sim.lock:
            session.sim.set_network_state(body.connected)
        return {"ok": True}

    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app


def serve_forever(host: str = "127.0.0.1", port: int = 7750,
                  token: Optional[str] = None, static_dir: Optional[str] = None,
                  tick_ms: float = 1.0) -> None:
    # fail fast with OSError if the port is taken; uvicorn would sys.exit
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    finally:
        probe.close()

    import uvicorn

    session = ControlSession(tick_ms=tick_ms)
    app = create_app(session, token=token, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
