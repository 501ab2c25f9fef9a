"""HTTP/JSON API for annotation campaigns, plus optional static UI serving.

Submissions are serialized through a single lock so the judgment log is
totally ordered; reads see a consistent snapshot. The same task may be
handed to two different annotators concurrently, which is exactly the
double-annotation the campaign needs.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .annotation import Campaign, CampaignError, Judgment, export_judgments, now_utc
from .pooling import Pool


class JudgmentBody(BaseModel):
    task_id: str
    annotator: str
    label: str
    source_url: str


def create_app(campaign: Campaign, pool: Pool | None = None, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="kgc-eval annotation")
    lock = threading.Lock()

    @app.get("/api/tasks/next")
    def next_task(annotator: str):
        try:
            with lock:
                task = campaign.assign(annotator)
        except CampaignError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=422)
        if task is None:
            return Response(status_code=204)
        return {
            "task_id": task.task_id,
            "qid": task.qid,
            "question_text": task.question_text,
            "triple": {
                "subject": task.subject,
                "relation": task.relation,
                "object": task.object,
            },
            "entity_label": task.entity,
        }

    @app.post("/api/judgments")
    def post_judgment(body: JudgmentBody):
        judgment = Judgment(
            task_id=body.task_id,
            annotator=body.annotator,
            label=body.label,
            source_url=body.source_url,
            timestamp=now_utc(),
        )
        try:
            with lock:
                state = campaign.submit(judgment)
        except CampaignError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=422)
        return {"task_id": body.task_id, "state": state}

    @app.get("/api/conflicts")
    def conflicts():
        with lock:
            return campaign.conflicts()

    @app.get("/api/progress")
    def progress():
        with lock:
            counts = campaign.counts()
            double = 0
            agree = 0
            for tid in campaign.tasks:
                primaries = campaign._primary[tid]
                if len(primaries) == 2:
                    double += 1
                    if len(set(primaries.values())) == 1:
                        agree += 1
        rate = agree / double if double else None
        return {
            "pending": counts["pending"],
            "conflicted": counts["conflicted"],
            "resolved": counts["resolved"],
            "agreement_rate": rate,
        }

    @app.get("/api/export/qrels")
    def export_qrels():
        if pool is None:
            return JSONResponse(
                {"detail": "server was started without a pool; export unavailable"},
                status_code=409,
            )
        try:
            with lock:
                judgment_set, _ = export_judgments(campaign, pool)
        except CampaignError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=409)
        return PlainTextResponse("\n".join(judgment_set.qrels_lines()) + "\n")

    if ui_dir:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app


def serve(
    campaign: Campaign,
    pool: Pool | None = None,
    host: str = "127.0.0.1",
    port: int = 8100,
    ui_dir: str | None = None,
) -> None:
    import uvicorn

    uvicorn.run(create_app(campaign, pool, ui_dir), host=host, port=port, log_level="warning")
