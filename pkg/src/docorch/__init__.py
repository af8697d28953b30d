"""Multi-agent document VQA orchestration engine."""

from .core import (
    AgentKind,
    Answer,
    AnswerOrigin,
    Document,
    Question,
    ReasoningPath,
    answer_contained,
    answers_equal,
    normalize_answer,
)
from .pipeline import PipelineConfig, PipelineTrace, run, run_lite

__all__ = [
    "AgentKind",
    "Answer",
    "AnswerOrigin",
    "Document",
    "Question",
    "ReasoningPath",
    "answer_contained",
    "answers_equal",
    "normalize_answer",
    "PipelineConfig",
    "PipelineTrace",
    "run",
    "run_lite",
]
