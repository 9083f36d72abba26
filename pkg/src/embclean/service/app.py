"""FastAPI application exposing the review REST API."""

from __future__ import annotations

import time

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles

from ..errors import InputError
from . import schemas
from .state import ReviewState

MAX_PAGE = 500


def create_app(state: ReviewState, ui_dir=None) -> FastAPI:
    app = FastAPI(title="embclean review service")
    app.state.review = state

    def ranking_or_404(issue: str):
        if issue not in state.rankings:
            raise HTTPException(status_code=404, detail=f"unknown issue type {issue!r}")

    @app.get("/api/rankings", response_model=list[schemas.RankingInfo])
    def rankings():
        return state.ranking_info()

    @app.get("/api/rankings/{issue}", response_model=schemas.Page)
    def ranking_page(issue: str, offset: int = 0, limit: int = 50):
        ranking_or_404(issue)
        if offset < 0 or limit < 1 or limit > MAX_PAGE:
            raise HTTPException(
                status_code=400,
                detail=f"bad pagination: offset >= 0 and 1 <= limit <= {MAX_PAGE}",
            )
        entries = state.page(issue, offset, limit)
        return {
            "issue_type": issue,
            "offset": offset,
            "limit": limit,
            "total": len(state.rankings[issue]),
            "entries": entries,
        }

    @app.post("/api/confirmations", response_model=schemas.ConfirmationAck)
    def post_confirmation(body: schemas.ConfirmationIn):
        if body.issue_type not in state.rankings:
            raise HTTPException(
                status_code=409, detail=f"ranking {body.issue_type!r} not loaded"
            )
        ts = body.timestamp_ms
        if ts is None:
            ts = int(time.time() * 1000)
        try:
            record = state.append_confirmation(
                body.issue_type, body.key, body.verdict, body.annotator, ts
            )
        except InputError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"ok": True, "record": record}

    @app.get("/api/stats/{issue}", response_model=schemas.Stats)
    def stats(issue: str):
        ranking_or_404(issue)
        try:
            return state.stats(issue)
        except LookupError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc

    @app.get("/api/threshold/{issue}", response_model=schemas.ThresholdPoint)
    def threshold(issue: str, rank: int):
        ranking_or_404(issue)
        if rank < 1:
            raise HTTPException(status_code=400, detail="rank must be >= 1")
        return state.threshold(issue, rank)

    @app.get("/api/media/{index}")
    def media(index: int):
        path = state.media_path(index)
        if path is None:
            raise HTTPException(status_code=404, detail=f"no media for sample {index}")
        return FileResponse(path)

    if ui_dir:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
