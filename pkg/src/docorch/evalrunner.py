"""Batch evaluation over JSONL datasets with a bounded worker pool.

Records fan out across threads; results are collected by index so the
output file preserves dataset order regardless of completion order.
Per-record failures score zero and carry the error; the run continues.
"""

from __future__ import annotations

import json
import mimetypes
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .core import Document, Question
from .errors import DocorchError
from .metrics import ActivationStats, EvalRecord, activation_stats, anls_single
from .pipeline import PipelineConfig, PipelineTrace, run, run_lite


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    image_path: str
    question: str
    answers: tuple[str, ...] = ()


@dataclass(frozen=True)
class RecordResult:
    id: str
    answer: str
    anls: Optional[float]
    stage_path: tuple[str, ...]
    timings_ms: dict
    flags: tuple[str, ...]
    error: str = ""
    trace: Optional[PipelineTrace] = None

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "answer": self.answer,
            "stage_path": list(self.stage_path),
            "timings_ms": dict(self.timings_ms),
            "flags": list(self.flags),
        }
        if self.anls is not None:
            out["anls"] = self.anls
        if self.error:
            out["error"] = self.error
        return out


@dataclass(frozen=True)
class EvalSummary:
    results: tuple[RecordResult, ...]
    corpus_anls: Optional[float]
    stats: Optional[ActivationStats]


def load_dataset(path: str | Path) -> list[DatasetRecord]:
    records: list[DatasetRecord] = []
    seen_ids = set()
    base = Path(path).parent
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                record = DatasetRecord(
                    id=str(obj["id"]),
                    image_path=str(obj["image_path"]),
                    question=str(obj["question"]),
                    answers=tuple(obj.get("answers", [])),
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad dataset record: {exc}") from exc
            if record.id in seen_ids:
                raise ValueError(f"{path}:{lineno}: duplicate record id {record.id!r}")
            seen_ids.add(record.id)
            image = Path(record.image_path)
            if not image.is_absolute():
                record = DatasetRecord(
                    record.id, str(base / image), record.question, record.answers
                )
            records.append(record)
    return records


def _load_document(record: DatasetRecord) -> Document:
    path = Path(record.image_path)
    mime = mimetypes.guess_type(path.name)[0] or "image/png"
    return Document(id=record.id, image_bytes=path.read_bytes(), mime_type=mime)


def _run_one(record: DatasetRecord, config: PipelineConfig, lite: bool) -> RecordResult:
    try:
        doc = _load_document(record)
        question = Question(id=record.id, text=record.question)
        runner = run_lite if lite else run
        answer, trace = runner(question, doc, config)
    except (OSError, ValueError, DocorchError) as exc:
        return RecordResult(
            id=record.id,
            answer="",
            anls=0.0 if record.answers else None,
            stage_path=(),
            timings_ms={},
            flags=(),
            error=f"{type(exc).__name__}: {exc}",
        )
    score = (
        anls_single(answer.text, record.answers) if record.answers else None
    )
    return RecordResult(
        id=record.id,
        answer=answer.text,
        anls=score,
        stage_path=trace.stage_path,
        timings_ms=dict(trace.timings_ms),
        flags=tuple(sorted(trace.flags)),
        trace=trace,
    )


def evaluate(
    records: Sequence[DatasetRecord],
    config: PipelineConfig,
    parallel: Optional[int] = None,
    lite: bool = False,
) -> EvalSummary:
    workers = parallel or min(32, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = tuple(
            pool.map(lambda rec: _run_one(rec, config, lite), records)
        )
    scored = [r.anls for r in results if r.anls is not None]
    corpus = sum(scored) / len(scored) if scored else None
    traces = [r.trace for r in results if r.trace is not None]
    stats = activation_stats(traces) if traces else None
    return EvalSummary(results=results, corpus_anls=corpus, stats=stats)


def write_results(results: Sequence[RecordResult], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for result in results:
            fh.write(json.dumps(result.to_dict(), ensure_ascii=False) + "\n")
