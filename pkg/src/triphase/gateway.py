"""REST + event-stream service over one Engine.

Routes (shared by the web console and any API client):

    POST /runs                         submit a task
    GET  /runs/{id}                    run handle / state
    GET  /runs/{id}/events?from_seq=N  SSE stream with seq-based resume
    POST /runs/{id}/permission         resolve an ask-level prompt
    POST /runs/{id}/intervention       provide guidance to a parked run
    POST /runs/{id}/rating             rate a finished run (1-10)
    GET  /state/{selector}             models | memory | skills | tasks | config

Event envelopes serialize as {"run_id", "seq", "kind", "payload", "at"};
the SSE frames carry the seq as the SSE id so reconnecting clients can
resume without gaps or duplicates.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, HTMLResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from triphase.engine import Engine, EngineError

_HTTP_STATUS = {
    "invalid_config": 400,
    "out_of_range": 400,
    "engine_busy": 409,
    "not_awaiting": 409,
    "not_done": 409,
    "unknown_run": 404,
    "unknown_prompt": 404,
    "unknown_selector": 404,
}


class SubmitBody(BaseModel):
    request: str
    overrides: dict[str, str] = Field(default_factory=dict)
    session: str = "default"


class PermissionBody(BaseModel):
    prompt_id: str
    decision: str


class InterventionBody(BaseModel):
    guidance: str


class RatingBody(BaseModel):
    rating: int


def _raise(exc: EngineError) -> None:
    raise HTTPException(status_code=_HTTP_STATUS.get(exc.kind, 500),
                        detail={"kind": exc.kind, "message": str(exc)})


def create_app(engine: Engine, console_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="triphase gateway")
    app.state.engine = engine

    @app.post("/runs")
    def submit(body: SubmitBody) -> dict:
        try:
            handle = engine.submit_task(body.request, body.overrides,
                                        body.session)
        except EngineError as exc:
            _raise(exc)
        return handle.to_json()

    @app.get("/runs/{run_id}")
    def run_state(run_id: str) -> dict:
        try:
            handle = engine.run_handle(run_id)
        except EngineError as exc:
            _raise(exc)
        return handle.to_json()

    @app.get("/runs/{run_id}/events")
    def stream_events(run_id: str, from_seq: int = 0):
        try:
            log = engine.run_log(run_id)
        except EngineError as exc:
            _raise(exc)

        def sse():
            for env in log.stream(from_seq=from_seq):
                data = json.dumps(env.to_json())
                yield f"id: {env.seq}\nevent: {env.kind}\ndata: {data}\n\n"

        return StreamingResponse(sse(), media_type="text/event-stream")

    @app.post("/runs/{run_id}/permission")
    def permission(run_id: str, body: PermissionBody) -> dict:
        if body.decision not in ("allow", "deny"):
            raise HTTPException(400, detail={"kind": "invalid_config",
                                             "message": "decision must be "
                                             "allow or deny"})
        try:
            status = engine.resolve_permission(run_id, body.prompt_id,
                                               body.decision)
        except EngineError as exc:
            _raise(exc)
        return {"status": status}

    @app.post("/runs/{run_id}/intervention")
    def intervention(run_id: str, body: InterventionBody) -> dict:
        if not body.guidance.strip():
            raise HTTPException(400, detail={"kind": "invalid_config",
                                             "message": "guidance must be "
                                             "non-empty"})
        try:
            status = engine.submit_intervention(run_id, body.guidance)
        except EngineError as exc:
            _raise(exc)
        return {"status": status}

    @app.post("/runs/{run_id}/rating")
    def rating(run_id: str, body: RatingBody) -> dict:
        try:
            return engine.rate_session(run_id, body.rating)
        except EngineError as exc:
            _raise(exc)

    @app.get("/state/{selector}")
    def state(selector: str) -> dict:
        try:
            return engine.query_state(selector)
        except EngineError as exc:
            _raise(exc)

    console = Path(console_dir) if console_dir else None
    if console and (console / "index.html").exists():
        dist = console / "dist"
        if dist.is_dir():
            app.mount("/dist", StaticFiles(directory=dist), name="dist")

        @app.get("/", response_class=FileResponse)
        def console_index():
            return FileResponse(console / "index.html")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index() -> str:
            return ("<html><body><h1>triphase gateway</h1>"
                    "<p>REST surface: POST /runs, GET /runs/{id}, "
                    "GET /runs/{id}/events, POST /runs/{id}/permission, "
                    "POST /runs/{id}/intervention, POST /runs/{id}/rating, "
                    "GET /state/{selector}</p></body></html>")

    return app
