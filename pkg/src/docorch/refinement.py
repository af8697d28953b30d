"""Formatting-fidelity repair of the final answer.

The sanity agent may only insert missing spaces and adjust punctuation to
match the document's conventions. Its output is diffed against the input
character by character; any edit outside those two classes rejects the
whole refinement, so the agent can never silently rewrite an answer.
"""

from __future__ import annotations

import difflib
import enum
import unicodedata
from dataclasses import dataclass

from .backend import Backend
from .core import Answer, AnswerOrigin, Document, Question
from .errors import ParseError
from .prompts import FINAL_TAG, sanity_request

# Punctuation characters the refiner may insert, remove, or substitute:
# Unicode P* categories plus a few ASCII symbols common in answers.
EXTRA_PUNCTUATION = frozenset(",.;:'\"-()/&%")


def is_punctuation(ch: str) -> bool:
    return ch in EXTRA_PUNCTUATION or unicodedata.category(ch).startswith("P")


class EditKind(enum.Enum):
    SPACE_INSERTION = "space_insertion"
    PUNCTUATION_ADJUSTMENT = "punctuation_adjustment"


@dataclass(frozen=True)
class Edit:
    kind: EditKind
    before: str
    after: str


@dataclass(frozen=True)
class RefinementResult:
    answer: Answer
    changed: bool
    edits: tuple[Edit, ...]
    rejected: bool = False

    def __post_init__(self):
        if self.changed != bool(self.edits):
            raise ValueError("changed flag must mirror a non-empty edit list")


def classify_edits(before: str, after: str) -> tuple[Edit, ...] | None:
    """Character-level edit list between two strings, or None if any edit
    falls outside the two permitted classes.

    Permitted: insertion of whitespace, and insertion/removal/substitution
    of punctuation (optionally with accompanying spaces on the inserted
    side). Space removal is not permitted.
    """
    edits: list[Edit] = []
    matcher = difflib.SequenceMatcher(a=before, b=after, autojunk=False)
    for op, i1, i2, j1, j2 in matcher.get_opcodes():
        if op == "equal":
            continue
        removed = before[i1:i2]
        inserted = after[j1:j2]
        if op == "insert":
            if all(ch.isspace() for ch in inserted):
                edits.append(Edit(EditKind.SPACE_INSERTION, "", inserted))
            elif all(ch.isspace() or is_punctuation(ch) for ch in inserted):
                edits.append(Edit(EditKind.PUNCTUATION_ADJUSTMENT, "", inserted))
            else:
                return None
        elif op == "delete":
            if removed and all(is_punctuation(ch) for ch in removed):
                edits.append(Edit(EditKind.PUNCTUATION_ADJUSTMENT, removed, ""))
            else:
                return None
        else:  # replace
            if all(is_punctuation(ch) for ch in removed) and all(
                ch.isspace() or is_punctuation(ch) for ch in inserted
            ):
                edits.append(Edit(EditKind.PUNCTUATION_ADJUSTMENT, removed, inserted))
            else:
                return None
    return tuple(edits)


def _alnum_subsequence(text: str) -> str:
    return "".join(ch for ch in text if ch.isalnum())


def parse_sanity_reply(text: str) -> str:
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith(FINAL_TAG):
            return stripped[len(FINAL_TAG):].strip()
    raise ParseError(f"sanity reply has no '{FINAL_TAG}' line")


def sanity_check(
    question: Question,
    doc: Document,
    prev_answer: Answer,
    backend: Backend,
) -> RefinementResult:
    """Ask the sanity agent for a repaired answer and guard the result.

    A proposed answer whose diff strays beyond space insertion and
    punctuation adjustment is rejected; the previous answer stands and the
    rejection is flagged for the trace.
    """
    if not prev_answer.text:
        raise ValueError("sanity check requires a non-empty answer")
    reply = backend.complete(sanity_request(question, doc, prev_answer.text))
    proposed = parse_sanity_reply(reply.text)
    edits = classify_edits(prev_answer.text, proposed)
    if edits is None or _alnum_subsequence(proposed) != _alnum_subsequence(
        prev_answer.text
    ):
        return RefinementResult(
            answer=Answer(text=prev_answer.text, origin=AnswerOrigin.FINAL),
            changed=False,
            edits=(),
            rejected=True,
        )
    return RefinementResult(
        answer=Answer(text=proposed, origin=AnswerOrigin.FINAL),
        changed=bool(edits),
        edits=edits,
    )
