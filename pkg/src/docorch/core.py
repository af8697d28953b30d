"""Domain types shared by every stage, plus answer comparison primitives.

Every conditional branch in the pipeline (early termination, stress-test
maintenance checks, debate early exit) funnels through ``answers_equal`` /
``answer_contained``, so the normalization rules live here and nowhere else.
"""

from __future__ import annotations

import enum
import unicodedata
from dataclasses import dataclass, field

RECOGNIZED_MIME_TYPES = frozenset(
    {
        "image/png",
        "image/jpeg",
        "image/webp",
        "image/gif",
        "image/bmp",
        "image/tiff",
    }
)


class AnswerOrigin(enum.Enum):
    """Which stage produced an answer."""

    THINKER = "thinker"
    EXPERT = "expert"
    STRESS_TEST = "stress_test"
    DEBATE = "debate"
    FINAL = "final"


class AgentKind(enum.Enum):
    """The fixed roster of nine content specialists.

    The enum value doubles as the canonical lowercase label; member order
    fixes the bijection onto indices 0..8.
    """

    FIGURE = "figure"
    YESNO = "yesno"
    TABLE = "table"
    LAYOUT = "layout"
    IMAGE = "image"
    OCR = "ocr"
    TEXT = "text"
    FORM = "form"
    OTHER = "other"

    @property
    def label(self) -> str:
        return self.value

    @property
    def index(self) -> int:
        return _AGENT_INDEX[self]

    @classmethod
    def from_index(cls, i: int) -> "AgentKind":
        return _AGENT_ORDER[i]

    @classmethod
    def from_label(cls, label: str) -> "AgentKind":
        return cls(label)


_AGENT_ORDER = tuple(AgentKind)
_AGENT_INDEX = {kind: i for i, kind in enumerate(_AGENT_ORDER)}

AGENT_LABELS = tuple(kind.label for kind in _AGENT_ORDER)


@dataclass(frozen=True)
class Document:
    """A single-page document image, treated as an opaque payload."""

    id: str
    image_bytes: bytes
    mime_type: str = "image/png"

    def __post_init__(self):
        if not self.image_bytes:
            raise ValueError("document image payload must be non-empty")
        if self.mime_type not in RECOGNIZED_MIME_TYPES:
            raise ValueError(f"unrecognized image mime type: {self.mime_type!r}")


@dataclass(frozen=True)
class Question:
    id: str
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("question text must be non-empty")


@dataclass(frozen=True)
class Answer:
    """An answer attributed to the stage that produced it.

    Empty text is tolerated only for a thinker that explicitly failed to
    produce an answer; every other origin must carry content.
    """

    text: str
    origin: AnswerOrigin

    def __post_init__(self):
        if not self.text and self.origin is not AnswerOrigin.THINKER:
            raise ValueError(f"empty answer text with origin {self.origin}")


@dataclass(frozen=True)
class ReasoningPath:
    """Ordered reasoning steps, preserved in generation order."""

    steps: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.steps) < 1:
            raise ValueError("reasoning path must contain at least one step")
        if not isinstance(self.steps, tuple):
            object.__setattr__(self, "steps", tuple(self.steps))


def normalize_answer(text: str) -> str:
    """Canonical answer form: NFC, case-folded, whitespace trimmed/collapsed."""
    folded = unicodedata.normalize("NFC", text).casefold()
    return " ".join(folded.split())


def answers_equal(a: str, b: str) -> bool:
    """Equality up to case, whitespace, and Unicode composition."""
    return normalize_answer(a) == normalize_answer(b)


def answer_contained(inner: str, outer: str) -> bool:
    """Substring containment after normalization of both sides."""
    return normalize_answer(inner) in normalize_answer(outer)
