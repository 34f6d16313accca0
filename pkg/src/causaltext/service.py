"""HTTP surface for annotation sessions.

Endpoints:
    GET  /session/{sid}/next?annotator=...   next unlabeled task or done
    POST /session/{sid}/labels               submit one label record
    GET  /session/{sid}/stats                preference and agreement stats
    GET  /sessions                           available session ids

The companion browser UI is served statically from the directory passed as
ui_dir (its built bundle); the API works without it.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .annotation import LabelRecord, SessionStore
from .errors import DuplicateLabelError, SessionError, UnknownTaskError


class LabelIn(BaseModel):
    task_id: str
    annotator_id: str = Field(min_length=1)
    faithfulness_choice: str = Field(pattern="^[AB]$")
    coverage_choice: str = Field(pattern="^[AB]$")
    timestamp: str = ""


def create_app(store: SessionStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="causaltext annotation service")

    @app.get("/sessions")
    def sessions() -> dict:
        return {"sessions": store.list_sessions()}

    @app.get("/session/{session_id}/next")
    def next_task(session_id: str, annotator: str = Query(min_length=1)) -> dict:
        try:
            return store.next_task(session_id, annotator)
        except SessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.post("/session/{session_id}/labels", status_code=201)
    def submit_label(session_id: str, label: LabelIn) -> dict:
        record = LabelRecord(
            task_id=label.task_id,
            annotator_id=label.annotator_id,
            faithfulness_choice=label.faithfulness_choice,
            coverage_choice=label.coverage_choice,
            timestamp=label.timestamp,
        )
        try:
            store.submit(session_id, record)
        except DuplicateLabelError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except UnknownTaskError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except SessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {"status": "ok", "task_id": record.task_id}

    @app.get("/session/{session_id}/stats")
    def stats(session_id: str) -> dict:
        try:
            return store.stats(session_id)
        except SessionError as exc:
            status = 404 if exc.code == "unknown-session" else 409
            raise HTTPException(status_code=status, detail=str(exc)) from exc

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(
    store: SessionStore,
    *,
    host: str = "127.0.0.1",
    port: int = 8765,
    ui_dir: str | Path | None = None,
) -> None:  # pragma: no cover - thin wrapper around uvicorn
    import uvicorn

    uvicorn.run(create_app(store, ui_dir=ui_dir), host=host, port=port, log_level="warning")
