"""HTTP service exposing the pipeline to multiple clients.

The app is built around one loaded pipeline configuration; clients submit
single questions (image inline or by server-local path) or batch
evaluations over server-local JSONL datasets.
"""

from __future__ import annotations

import base64
import binascii
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .config import load_config
from .core import Document, Question
from .errors import DocorchError, PipelineError
from .evalrunner import evaluate, load_dataset, write_results
from .pipeline import PipelineConfig, run, run_lite


class RunRequest(BaseModel):
    question: str
    question_id: str = "q0"
    image_b64: Optional[str] = None
    image_path: Optional[str] = None
    mime_type: str = "image/png"
    lite: bool = False
    include_trace: bool = True


class RunResponse(BaseModel):
    answer: str
    trace: Optional[dict] = None


class EvalRequest(BaseModel):
    dataset_path: str
    out_path: Optional[str] = None
    parallel: Optional[int] = Field(default=None, ge=1)
    lite: bool = False


class ActivationStatsModel(BaseModel):
    total: int
    disagreements: int
    stress_failures: int
    debates: int
    disagreement_rate: float
    stress_failure_rate: float
    debate_rate: float


class EvalResponse(BaseModel):
    records: int
    corpus_anls: Optional[float]
    stats: Optional[ActivationStatsModel]
    results: list[dict]


class HealthResponse(BaseModel):
    status: str


def _document_from_request(req: RunRequest) -> Document:
    if req.image_b64 is not None:
        try:
            payload = base64.b64decode(req.image_b64, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise HTTPException(status_code=422, detail=f"bad image_b64: {exc}")
        return Document(id=req.question_id, image_bytes=payload,
                        mime_type=req.mime_type)
    if req.image_path is not None:
        path = Path(req.image_path)
        if not path.is_file():
            raise HTTPException(
                status_code=422, detail=f"image file not found: {path}"
            )
        return Document(id=req.question_id, image_bytes=path.read_bytes(),
                        mime_type=req.mime_type)
    raise HTTPException(status_code=422, detail="provide image_b64 or image_path")


def create_app(config: PipelineConfig | str | Path) -> FastAPI:
    if not isinstance(config, PipelineConfig):
        config = load_config(config)
    app = FastAPI(title="docorch", version="0.1.0")
    app.state.pipeline_config = config

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok")

    @app.post("/run", response_model=RunResponse)
    def run_endpoint(req: RunRequest) -> RunResponse:
        doc = _document_from_request(req)
        try:
            question = Question(id=req.question_id, text=req.question)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        runner = run_lite if req.lite else run
        try:
            answer, trace = runner(question, doc, config)
        except PipelineError as exc:
            detail = {"stage": exc.stage, "error": str(exc)}
            if exc.trace is not None:
                detail["trace"] = exc.trace.to_dict()
            raise HTTPException(status_code=502, detail=detail)
        except DocorchError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        return RunResponse(
            answer=answer.text,
            trace=trace.to_dict() if req.include_trace else None,
        )

    @app.post("/eval", response_model=EvalResponse)
    def eval_endpoint(req: EvalRequest) -> EvalResponse:
        try:
            records = load_dataset(req.dataset_path)
        except (OSError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        summary = evaluate(records, config, parallel=req.parallel, lite=req.lite)
        if req.out_path:
            write_results(summary.results, req.out_path)
        stats = None
        if summary.stats is not None:
            stats = ActivationStatsModel(**summary.stats.__dict__)
        return EvalResponse(
            records=len(summary.results),
            corpus_anls=summary.corpus_anls,
            stats=stats,
            results=[r.to_dict() for r in summary.results],
        )

    return app
