"""Evaluation harness: edit distance, ANLS scoring, activation statistics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .errors import EmptyCorpus

if TYPE_CHECKING:
    from .pipeline import PipelineTrace

ANLS_THRESHOLD = 0.5


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance over Unicode scalar values."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,  # deletion
                    current[j - 1] + 1,  # insertion
                    previous[j - 1] + (ca != cb),  # substitution
                )
            )
        previous = current
    return previous[-1]


def _nls(prediction: str, gold: str) -> float:
    pred = prediction.strip().lower()
    gold = gold.strip().lower()
    if not pred and not gold:
        return 1.0
    longest = max(len(pred), len(gold))
    return 1.0 - levenshtein(pred, gold) / longest


def anls_single(
    prediction: str, golds: Sequence[str], threshold: float = ANLS_THRESHOLD
) -> float:
    """Best normalized Levenshtein similarity over gold answers, zeroed
    below the threshold."""
    if not golds:
        raise ValueError("anls_single requires at least one gold answer")
    best = 0.0
    for gold in golds:
        nls = _nls(prediction, gold)
        if nls >= threshold:
            best = max(best, nls)
    return best


@dataclass(frozen=True)
class EvalRecord:
    question_id: str
    prediction: str
    gold_answers: tuple[str, ...]

    def __post_init__(self):
        if not self.gold_answers:
            raise ValueError("gold answer list must be non-empty")
        if not isinstance(self.gold_answers, tuple):
            object.__setattr__(self, "gold_answers", tuple(self.gold_answers))


def anls_corpus(
    records: Sequence[EvalRecord], threshold: float = ANLS_THRESHOLD
) -> float:
    """Arithmetic mean of per-record ANLS, in record order."""
    if not records:
        raise EmptyCorpus("cannot score an empty corpus")
    total = 0.0
    for record in records:
        total += anls_single(record.prediction, record.gold_answers, threshold)
    return total / len(records)


@dataclass(frozen=True)
class ActivationStats:
    """How often the verification stages engaged over a trace corpus."""

    total: int
    disagreements: int  # stress testing entered (expert != thinker)
    stress_failures: int  # debate stage entered
    debates: int  # debate turns actually ran (past the early exit)
    disagreement_rate: float
    stress_failure_rate: float  # conditional on disagreement
    debate_rate: float


def activation_stats(traces: Sequence["PipelineTrace"]) -> ActivationStats:
    if not traces:
        raise EmptyCorpus("cannot compute activation stats over zero traces")
    total = len(traces)
    disagreements = sum(1 for t in traces if "S3" in t.stage_path)
    stress_failures = sum(1 for t in traces if "S4" in t.stage_path)
    debates = sum(
        1 for t in traces if "S4" in t.stage_path and len(t.debate_turns) > 0
    )
    return ActivationStats(
        total=total,
        disagreements=disagreements,
        stress_failures=stress_failures,
        debates=debates,
        disagreement_rate=disagreements / total,
        stress_failure_rate=stress_failures / max(disagreements, 1),
        debate_rate=debates / total,
    )
