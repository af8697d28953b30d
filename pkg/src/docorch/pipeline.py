"""The five-stage state machine with conditional gating and trace capture.

Stage flow: S1 think, S2 route/orchestrate/mask/execute, then either skip
straight to S5 when the expert agrees with the thinker, or stress-test (S3)
and, on failure, debate (S4). S5 (sanity checking) always runs.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .backend import Backend
from .core import AgentKind, Answer, AnswerOrigin, Document, Question, answers_equal
from .errors import DocorchError, PipelineError
from .execution import (
    ExecutionPlan,
    MaskConfig,
    ThinkerOutput,
    count_answer_occurrences,
    execute_chain,
    mask_answer,
    orchestrate,
    think,
)
from .refinement import sanity_check
from .router import ActivationVector, DecodeConfig, route
from .verification import (
    DebateOutcome,
    DebateTurn,
    StressOutcome,
    debate,
    stress_test,
)

STAGES = ("S1", "S2", "S3", "S4", "S5")

FLAG_UNION_FALLBACK = "UnionFallback"
FLAG_REFINEMENT_REJECTED = "RefinementRejected"
FLAG_DEBATE_EARLY_EXIT = "DebateEarlyExit"

# Roles beyond the nine specialists that a pipeline config must resolve.
SUPPORT_ROLES = (
    "thinker",
    "router",
    "debate",
    "eval",
    "thesis",
    "antithesis",
    "judge",
    "sanity",
)


@dataclass(frozen=True)
class PipelineConfig:
    backends: Mapping[str, Backend]
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    mask: MaskConfig = field(default_factory=MaskConfig)
    stress_turns: int = 2
    debate_turns: int = 3

    def __post_init__(self):
        if self.stress_turns <= 0 or self.debate_turns <= 0:
            raise ValueError("turn budgets must be positive")
        missing = [
            role
            for role in (*SUPPORT_ROLES, *(k.label for k in AgentKind))
            if role not in self.backends
        ]
        if missing:
            raise ValueError(f"pipeline config missing backends for: {missing}")

    def for_run(self) -> "PipelineConfig":
        """A copy with per-run backend sessions (isolates scripted counters)."""
        return PipelineConfig(
            backends={role: b.session() for role, b in self.backends.items()},
            decode=self.decode,
            mask=self.mask,
            stress_turns=self.stress_turns,
            debate_turns=self.debate_turns,
        )

    def specialist(self, kind: AgentKind) -> Backend:
        return self.backends[kind.label]


@dataclass(frozen=True)
class PipelineTrace:
    """Sealed per-run record of stage traversal and intermediate answers."""

    question_id: str
    document_id: str
    stage_path: tuple[str, ...]
    answers: Mapping[str, Optional[str]]  # keys a_T, a_E, a_D, a_C, a_F
    activation: Optional[ActivationVector]
    plan: tuple[str, ...]
    masked: bool
    stress: Optional[StressOutcome]
    debate_turns: tuple[DebateTurn, ...]
    timings_ms: Mapping[str, float]
    flags: frozenset[str]

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "document_id": self.document_id,
            "stage_path": list(self.stage_path),
            "answers": dict(self.answers),
            "activation": None
            if self.activation is None
            else {
                "bits": [int(b) for b in self.activation.bits],
                "fallback": self.activation.fallback,
                "candidates": [
                    {
                        "tokens": list(c.tokens),
                        "score": c.score,
                        "probability": c.probability,
                    }
                    for c in self.activation.provenance
                ],
            },
            "plan": list(self.plan),
            "masked": self.masked,
            "stress": None
            if self.stress is None
            else {
                "passed": self.stress.passed,
                "turns": [
                    {
                        "debate_question": t.debate_question,
                        "response": t.response,
                        "revised_answer": t.revised_answer,
                        "verdict": t.verdict.value,
                        "answer_drift": t.answer_drift,
                    }
                    for t in self.stress.turns
                ],
            },
            "debate_turns": [
                {
                    "reference": t.antithesis.reference,
                    "criticism": t.antithesis.criticism,
                    "conclusion": t.antithesis.conclusion,
                    "thesis_reply": t.thesis_reply,
                    "verdict": "continue"
                    if t.verdict.convinced is None
                    else t.verdict.convinced.winner.value,
                    "summary": t.verdict.summary,
                }
                for t in self.debate_turns
            ],
            "timings_ms": dict(self.timings_ms),
            "flags": sorted(self.flags),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, **kw)


class _Stopwatch:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def stage(self, name: str):
        return _StageTimer(self, name)


class _StageTimer:
    def __init__(self, watch: _Stopwatch, name: str):
        self._watch = watch
        self._name = name

    def __enter__(self):
        self._started = time.perf_counter()
        return self

    def __exit__(self, *exc):
        elapsed = (time.perf_counter() - self._started) * 1000.0
        self._watch.timings[self._name] = elapsed
        return False


class _RunState:
    """Mutable scratchpad for a single run, sealed into a trace at the end."""

    def __init__(self, question: Question, doc: Document):
        self.question = question
        self.doc = doc
        self.stage_path: list[str] = []
        self.answers: dict[str, Optional[str]] = {
            "a_T": None,
            "a_E": None,
            "a_D": None,
            "a_C": None,
            "a_F": None,
        }
        self.activation: Optional[ActivationVector] = None
        self.plan: tuple[str, ...] = ()
        self.masked = False
        self.stress: Optional[StressOutcome] = None
        self.debate_turns: tuple[DebateTurn, ...] = ()
        self.flags: set[str] = set()
        self.watch = _Stopwatch()

    def seal(self) -> PipelineTrace:
        return PipelineTrace(
            question_id=self.question.id,
            document_id=self.doc.id,
            stage_path=tuple(self.stage_path),
            answers=dict(self.answers),
            activation=self.activation,
            plan=self.plan,
            masked=self.masked,
            stress=self.stress,
            debate_turns=self.debate_turns,
            timings_ms=dict(self.watch.timings),
            flags=frozenset(self.flags),
        )


def _stage1(state: _RunState, config: PipelineConfig) -> ThinkerOutput:
    state.stage_path.append("S1")
    with state.watch.stage("S1"):
        thinker = think(state.question, state.doc, config.backends["thinker"])
    state.answers["a_T"] = thinker.answer.text
    return thinker


def _stage2(
    state: _RunState, config: PipelineConfig, thinker: ThinkerOutput
) -> tuple[Answer, ExecutionPlan]:
    state.stage_path.append("S2")
    with state.watch.stage("S2"):
        activation = route(
            state.question, state.doc, thinker.path, config.backends["router"],
            config.decode,
        )
        state.activation = activation
        if activation.fallback:
            state.flags.add(FLAG_UNION_FALLBACK)
        plan = orchestrate(activation, thinker.path, state.question, state.doc)
        state.plan = tuple(k.label for k in plan.order)
        occurrences = count_answer_occurrences(
            thinker.path, thinker.answer, config.mask
        )
        masked_path = mask_answer(thinker.path, thinker.answer, config.mask)
        state.masked = occurrences > config.mask.threshold
        expert = execute_chain(
            plan,
            state.question,
            state.doc,
            masked_path,
            {k: config.specialist(k) for k in plan.order},
        )
    state.answers["a_E"] = expert.text
    return expert, plan


def _stage3(
    state: _RunState, config: PipelineConfig, expert: Answer, plan: ExecutionPlan
) -> StressOutcome:
    state.stage_path.append("S3")
    with state.watch.stage("S3"):
        outcome = stress_test(
            state.question,
            state.doc,
            expert,
            config.specialist(plan.order[-1]),
            config.backends["debate"],
            config.backends["eval"],
            max_turns=config.stress_turns,
        )
    state.stress = outcome
    if outcome.passed:
        state.answers["a_D"] = outcome.settled_answer.text
    return outcome


def _stage4(state: _RunState, config: PipelineConfig, expert: Answer) -> DebateOutcome:
    state.stage_path.append("S4")
    with state.watch.stage("S4"):
        outcome = debate(
            state.question,
            state.doc,
            expert,
            config.backends["thesis"],
            config.backends["antithesis"],
            config.backends["judge"],
            max_turns=config.debate_turns,
        )
    state.debate_turns = outcome.turns
    if outcome.early_exit:
        state.flags.add(FLAG_DEBATE_EARLY_EXIT)
    state.answers["a_C"] = outcome.answer.text
    return outcome


def _stage5(state: _RunState, config: PipelineConfig, prev: Answer) -> Answer:
    state.stage_path.append("S5")
    with state.watch.stage("S5"):
        result = sanity_check(
            state.question, state.doc, prev, config.backends["sanity"]
        )
    if result.rejected:
        state.flags.add(FLAG_REFINEMENT_REJECTED)
    state.answers["a_F"] = result.answer.text
    return result.answer


def _guarded(stage: str, state: _RunState, fn, *args):
    try:
        return fn(state, *args)
    except DocorchError as exc:
        raise PipelineError(stage, exc, trace=state.seal()) from exc


def run(
    question: Question, doc: Document, config: PipelineConfig
) -> tuple[Answer, PipelineTrace]:
    """Full conditional pipeline; returns the final answer and its trace."""
    config = config.for_run()
    state = _RunState(question, doc)
    thinker = _guarded("S1", state, _stage1, config)
    expert, plan = _guarded("S2", state, _stage2, config, thinker)
    prev: Answer = expert
    if not answers_equal(expert.text, thinker.answer.text):
        stress = _guarded("S3", state, _stage3, config, expert, plan)
        if stress.passed:
            prev = stress.settled_answer
        else:
            outcome = _guarded("S4", state, _stage4, config, expert)
            prev = outcome.answer
    final = _guarded("S5", state, _stage5, config, prev)
    return final, state.seal()


def run_lite(
    question: Question, doc: Document, config: PipelineConfig
) -> tuple[Answer, PipelineTrace]:
    """Reduced pipeline: thinker, specialist chain, sanity check only."""
    config = config.for_run()
    state = _RunState(question, doc)
    thinker = _guarded("S1", state, _stage1, config)
    expert, _ = _guarded("S2", state, _stage2, config, thinker)
    final = _guarded("S5", state, _stage5, config, expert)
    return final, state.seal()
