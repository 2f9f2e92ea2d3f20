"""HTTP service for human raters: task queue, ratings intake, results.

JSON API consumed by the review UI:

* ``GET /api/tasks/next?rater=<id>&mode=<alignment|accuracy|asset>``
  -> task JSON or 204 when the rater's queue is empty.
* ``POST /api/ratings`` with ``{task_id, rater, payload, submission_id?}``.
* ``GET /api/results?mode=...&rater=...`` -> aggregate (plus rater progress).

The UI bundle and the asset files (images/videos) are served statically.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .evalsuite import RatingsStore

MODES = ("alignment", "accuracy", "asset")


class RatingSubmission(BaseModel):
    task_id: str
    rater: str
    payload: dict
    submission_id: str | None = None


def create_app(
    store: RatingsStore,
    ui_dir: str | Path | None = None,
    assets_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="caption review service")

    @app.get("/api/tasks/next")
    def next_task(rater: str = Query(...), mode: str = Query(...)):
        if mode not in MODES:
            raise HTTPException(status_code=400, detail=f"unknown mode {mode!r}")
        task = store.next_task(rater, mode)
        if task is None:
            return Response(status_code=204)
        return task.to_public_dict()

    @app.post("/api/ratings")
    def submit_rating(submission: RatingSubmission):
        try:
            accepted = store.submit(
                submission.task_id,
                submission.rater,
                submission.payload,
                submission.submission_id,
            )
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {"ok": True, "duplicate": not accepted}

    @app.get("/api/results")
    def results(mode: str = Query(...), rater: str | None = None):
        if mode not in MODES:
            raise HTTPException(status_code=400, detail=f"unknown mode {mode!r}")
        try:
            aggregate = store.results(mode).to_dict()
        except Exception as exc:  # no ratings yet
            aggregate = {"n": 0, "note": str(exc)}
        if rater is not None:
            aggregate["progress"] = store.progress(rater)
        return aggregate

    if assets_dir is not None:
        app.mount("/assets", StaticFiles(directory=str(assets_dir)), name="assets")
    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
