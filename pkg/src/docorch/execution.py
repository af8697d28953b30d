"""Thinker stage and the orchestrated sequential specialist chain.

The thinker emits a reasoning path plus a preliminary answer; the chain runs
activated specialists in an order derived from where the reasoning path
first mentions each specialty. Before the last specialist sees the path,
occurrences of the preliminary answer are masked out if they appear often
enough to anchor it.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .backend import Backend
from .core import (
    AgentKind,
    Answer,
    AnswerOrigin,
    Document,
    Question,
    ReasoningPath,
    normalize_answer,
)
from .errors import ChainExecutionError, DocorchError, ParseError
from .prompts import ANSWER_TAG, specialist_request, thinker_request


@dataclass(frozen=True)
class ThinkerOutput:
    path: ReasoningPath
    answer: Answer


@dataclass(frozen=True)
class ExecutionPlan:
    order: tuple[AgentKind, ...]

    def __post_init__(self):
        if len(self.order) < 1:
            raise ValueError("execution plan must contain at least one agent")
        if len(set(self.order)) != len(self.order):
            raise ValueError("execution plan must not repeat agents")


@dataclass(frozen=True)
class MaskConfig:
    threshold: int = 2
    mask_token: str = "[MASKED]"

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("mask threshold must be non-negative")
        if not self.mask_token:
            raise ValueError("mask token must be non-empty")


# --------------------------------------------------------------------------
# Stage 1: thinker

_STEP_PREFIX = re.compile(r"^\s*(?:\d+[.)]\s*|[-*]\s+)")


def parse_thinker_reply(text: str) -> ThinkerOutput:
    """Split a thinker reply into numbered steps and the tagged answer line."""
    answer_text: Optional[str] = None
    steps: list[str] = []
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith(ANSWER_TAG):
            answer_text = stripped[len(ANSWER_TAG):].strip()
            break
        if stripped:
            steps.append(_STEP_PREFIX.sub("", stripped))
    if answer_text is None:
        raise ParseError(f"thinker reply has no '{ANSWER_TAG}' line")
    if not steps:
        raise ParseError("thinker reply contains no reasoning steps")
    return ThinkerOutput(
        path=ReasoningPath(steps=tuple(steps)),
        answer=Answer(text=answer_text, origin=AnswerOrigin.THINKER),
    )


def think(question: Question, doc: Document, backend: Backend) -> ThinkerOutput:
    response = backend.complete(thinker_request(question, doc))
    return parse_thinker_reply(response.text)


# --------------------------------------------------------------------------
# Orchestration

# Earliest mention of any keyword in the reasoning path decides an agent's
# position; unmentioned agents sort after mentioned ones by canonical index.
ORCHESTRATION_KEYWORDS: Mapping[AgentKind, tuple[str, ...]] = {
    AgentKind.FIGURE: ("figure", "chart", "diagram", "graph"),
    AgentKind.YESNO: ("yes", "no", "whether"),
    AgentKind.TABLE: ("table", "list", "row", "column", "cell"),
    AgentKind.LAYOUT: ("layout", "section", "header", "footer"),
    AgentKind.IMAGE: ("photo", "image", "picture"),
    AgentKind.OCR: ("handwrit", "ocr"),
    AgentKind.TEXT: ("paragraph", "text", "sentence"),
    AgentKind.FORM: ("form", "field"),
    AgentKind.OTHER: (),
}

_UNMENTIONED = 10**9


def _first_mention(kind: AgentKind, path: ReasoningPath) -> int:
    keywords = ORCHESTRATION_KEYWORDS[kind]
    for i, step in enumerate(path.steps):
        lowered = step.casefold()
        if any(kw in lowered for kw in keywords):
            return i
    return _UNMENTIONED


def orchestrate(
    active, path: ReasoningPath, question: Question, doc: Document
) -> ExecutionPlan:
    """Order activated agents by earliest reasoning-step mention.

    The catch-all agent has no keywords, so it always sorts last.
    """
    agents = list(active.agents())
    agents.sort(key=lambda k: (_first_mention(k, path), k.index))
    return ExecutionPlan(order=tuple(agents))


# --------------------------------------------------------------------------
# Reasoning-path masking


def _normalized_chars(step: str) -> list[tuple[str, int, int]]:
    """Normalized characters of a step with their source spans.

    The step is NFC-normalized first; each emitted character is a casefolded
    char or a single collapsed space, paired with the [start, end) span it
    came from in the NFC'd step.
    """
    chars: list[tuple[str, int, int]] = []
    pending_space: Optional[tuple[int, int]] = None
    for i, ch in enumerate(step):
        if ch.isspace():
            if pending_space is None:
                pending_space = (i, i + 1)
            else:
                pending_space = (pending_space[0], i + 1)
            continue
        if pending_space is not None:
            if chars:  # leading whitespace is trimmed, not collapsed
                chars.append((" ", pending_space[0], pending_space[1]))
            pending_space = None
        for folded in ch.casefold():
            chars.append((folded, i, i + 1))
    return chars


def _occurrences(step: str, needle: str, mask_token: str) -> list[tuple[int, int]]:
    """Spans (over the NFC'd step) of non-overlapping needle occurrences.

    Occurrences inside an already-placed mask token are not counted: the
    mask marker is metadata, not document content.
    """
    chars = _normalized_chars(step)
    text = "".join(c for c, _, _ in chars)
    mask_norm = normalize_answer(mask_token)
    blocked = [False] * len(text)
    if mask_norm:
        pos = 0
        while True:
            hit = text.find(mask_norm, pos)
            if hit < 0:
                break
            for j in range(hit, hit + len(mask_norm)):
                blocked[j] = True
            pos = hit + len(mask_norm)
    spans: list[tuple[int, int]] = []
    pos = 0
    while True:
        hit = text.find(needle, pos)
        if hit < 0:
            break
        end = hit + len(needle)
        if any(blocked[hit:end]):
            pos = hit + 1
            continue
        spans.append((chars[hit][1], chars[end - 1][2]))
        pos = end
    return spans


def mask_answer(
    path: ReasoningPath, answer: Answer, cfg: MaskConfig
) -> ReasoningPath:
    """Mask every occurrence of the answer when it appears more than ``threshold`` times.

    Counting is case/whitespace-insensitive over normalized step text; when
    the count stays within the threshold the input path is returned
    unchanged. An empty answer never masks.
    """
    needle = normalize_answer(answer.text)
    if not needle:
        return path
    nfc_steps = [unicodedata.normalize("NFC", step) for step in path.steps]
    per_step = [_occurrences(step, needle, cfg.mask_token) for step in nfc_steps]
    total = sum(len(spans) for spans in per_step)
    if total <= cfg.threshold:
        return path
    masked_steps = []
    for step, spans in zip(nfc_steps, per_step):
        out = []
        cursor = 0
        for start, end in spans:
            out.append(step[cursor:start])
            out.append(cfg.mask_token)
            cursor = end
        out.append(step[cursor:])
        masked_steps.append("".join(out))
    return ReasoningPath(steps=tuple(masked_steps))


def count_answer_occurrences(
    path: ReasoningPath, answer: Answer, cfg: MaskConfig
) -> int:
    """How many maskable occurrences of the answer the path contains."""
    needle = normalize_answer(answer.text)
    if not needle:
        return 0
    return sum(
        len(_occurrences(unicodedata.normalize("NFC", step), needle, cfg.mask_token))
        for step in path.steps
    )


# --------------------------------------------------------------------------
# Stage 2: sequential chain


def extract_tagged_answer(text: str, required: bool) -> str:
    """The value of the last ANSWER-tagged line, or the whole text if optional."""
    answer = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith(ANSWER_TAG):
            answer = stripped[len(ANSWER_TAG):].strip()
    if answer is not None:
        return answer
    if required:
        raise ParseError(f"reply has no '{ANSWER_TAG}' line")
    return text.strip()


def execute_chain(
    plan: ExecutionPlan,
    question: Question,
    doc: Document,
    masked_path: ReasoningPath,
    backends: Mapping[AgentKind, Backend],
) -> Answer:
    """Run the specialists sequentially, handing each its predecessor's answer.

    Only the last agent sees the (masked) reasoning path; the first agent
    receives no predecessor slot at all.
    """
    missing = [k.label for k in plan.order if k not in backends]
    if missing:
        raise ValueError(f"no endpoint configured for agents: {missing}")
    predecessor: Optional[str] = None
    for i, kind in enumerate(plan.order):
        is_final = i == len(plan.order) - 1
        request = specialist_request(
            kind,
            question,
            doc,
            predecessor,
            masked_path if is_final else None,
        )
        try:
            response = backends[kind].complete(request)
            predecessor = extract_tagged_answer(response.text, required=is_final)
        except DocorchError as exc:
            raise ChainExecutionError(kind.label, exc) from exc
    return Answer(text=predecessor, origin=AnswerOrigin.EXPERT)
