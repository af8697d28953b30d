"""Self-verification: adversarial stress testing and structured debate.

Stage 3 interrogates the expert answer for up to two turns; a single failed
turn escalates to stage 4, where an antithesis agent argues an alternative
against a thesis defender over at most three turns, refereed by a judge.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Optional

from .backend import Backend
from .core import (
    Answer,
    AnswerOrigin,
    Document,
    Question,
    answer_contained,
    answers_equal,
)
from .errors import ParseError
from .execution import extract_tagged_answer
from . import prompts


class TurnVerdict(enum.Enum):
    PASS = "pass"
    FAIL = "fail"


@dataclass(frozen=True)
class StressTurn:
    debate_question: str
    response: str
    revised_answer: str
    verdict: TurnVerdict
    # Set when the turn failed because the revised answer drifted from the
    # original, independent of the evaluation agent's verdict.
    answer_drift: bool = False


@dataclass(frozen=True)
class StressOutcome:
    passed: bool
    turns: tuple[StressTurn, ...]
    settled_answer: Optional[Answer] = None

    def __post_init__(self):
        if len(self.turns) not in (1, 2):
            raise ValueError("stress testing records one or two turns")
        if self.passed and self.settled_answer is None:
            raise ValueError("a passed stress test must settle an answer")
        if not self.passed and self.settled_answer is not None:
            raise ValueError("a failed stress test settles no answer")


@dataclass(frozen=True)
class StructuredArgument:
    reference: str
    criticism: str
    conclusion: str


class DebateSide(enum.Enum):
    THESIS = "thesis"
    ANTITHESIS = "antithesis"


@dataclass(frozen=True)
class Convinced:
    winner: DebateSide
    answer: str

    def __post_init__(self):
        if not self.answer:
            raise ValueError("a convincement verdict must carry an answer")


@dataclass(frozen=True)
class JudgeVerdict:
    convinced: Optional[Convinced]
    summary: str


@dataclass(frozen=True)
class DebateTurn:
    antithesis: StructuredArgument
    thesis_reply: str
    verdict: JudgeVerdict


class DebateResolution(enum.Enum):
    EARLY_EXIT = "early_exit"
    CONVINCED = "convinced"
    FINAL_JUDGMENT = "final_judgment"


@dataclass(frozen=True)
class DebateOutcome:
    answer: Answer
    turns: tuple[DebateTurn, ...]
    resolution: DebateResolution
    alternative: str = ""

    @property
    def early_exit(self) -> bool:
        return self.resolution is DebateResolution.EARLY_EXIT


# --------------------------------------------------------------------------
# Stage 3: stress testing


def _parse_eval_verdict(text: str) -> TurnVerdict:
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.upper().startswith(prompts.VERDICT_TAG):
            value = stripped[len(prompts.VERDICT_TAG):].strip().upper()
            if value == "PASS":
                return TurnVerdict.PASS
            if value == "FAIL":
                return TurnVerdict.FAIL
            raise ParseError(f"evaluation verdict must be PASS or FAIL, got {value!r}")
    raise ParseError(f"evaluation reply has no '{prompts.VERDICT_TAG}' line")


def stress_test(
    question: Question,
    doc: Document,
    expert_answer: Answer,
    final_agent_backend: Backend,
    debate_backend: Backend,
    eval_backend: Backend,
    max_turns: int = 2,
) -> StressOutcome:
    """Interrogate the expert answer for up to two turns.

    Each turn regenerates the follow-up question from the original expert
    answer, asks the final specialist to respond and restate its answer, and
    has the evaluation agent judge coherence, topicality, and answer
    maintenance. The first failure short-circuits. A turn also fails
    outright if the restated answer drifts from the original, regardless of
    the evaluation verdict.
    """
    a_e = expert_answer.text
    turns: list[StressTurn] = []
    passed = True
    for _ in range(max_turns):
        q_debate = debate_backend.complete(
            prompts.stress_question_request(question, doc, a_e)
        ).text.strip()
        reply = final_agent_backend.complete(
            prompts.stress_specialist_request(q_debate, question, doc, a_e)
        ).text
        revised = extract_tagged_answer(reply, required=True)
        response_body = reply.rsplit(prompts.ANSWER_TAG, 1)[0].strip()
        verdict = _parse_eval_verdict(
            eval_backend.complete(
                prompts.stress_eval_request(q_debate, response_body, a_e, revised)
            ).text
        )
        drift = not answers_equal(revised, a_e)
        if drift:
            verdict = TurnVerdict.FAIL
        turns.append(
            StressTurn(
                debate_question=q_debate,
                response=response_body,
                revised_answer=revised,
                verdict=verdict,
                answer_drift=drift,
            )
        )
        if verdict is TurnVerdict.FAIL:
            passed = False
            break
    settled = (
        Answer(text=a_e, origin=AnswerOrigin.STRESS_TEST) if passed else None
    )
    return StressOutcome(passed=passed, turns=tuple(turns), settled_answer=settled)


# --------------------------------------------------------------------------
# Stage 4: structured debate

_SECTION_TAGS = ("REFERENCE", "CRITICISM", "CONCLUSION")
_TAG_RE = re.compile(r"\[(REFERENCE|CRITICISM|CONCLUSION)\]")


def parse_argument(text: str) -> StructuredArgument:
    """Extract the three bracket-tagged sections, in any order."""
    matches = list(_TAG_RE.finditer(text))
    sections: dict[str, str] = {}
    for i, match in enumerate(matches):
        start = match.end()
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        sections.setdefault(match.group(1), text[start:end].strip())
    missing = [tag for tag in _SECTION_TAGS if not sections.get(tag)]
    if missing:
        raise ParseError(f"argument missing section(s): {', '.join(missing)}")
    return StructuredArgument(
        reference=sections["REFERENCE"],
        criticism=sections["CRITICISM"],
        conclusion=sections["CONCLUSION"],
    )


def _parse_judge_reply(text: str, allow_continue: bool) -> tuple[str, str]:
    verdict: Optional[str] = None
    summary = ""
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.upper().startswith(prompts.VERDICT_TAG):
            verdict = stripped[len(prompts.VERDICT_TAG):].strip().upper()
        elif stripped.upper().startswith(prompts.SUMMARY_TAG):
            summary = stripped[len(prompts.SUMMARY_TAG):].strip()
    if verdict is None:
        raise ParseError(f"judge reply has no '{prompts.VERDICT_TAG}' line")
    allowed = {"THESIS", "ANTITHESIS"} | ({"CONTINUE"} if allow_continue else set())
    if verdict not in allowed:
        raise ParseError(f"judge verdict {verdict!r} not in {sorted(allowed)}")
    return verdict, summary


def _extract_side_answer(text: str) -> str:
    """Best-effort answer from a side's text: tagged line, else the text itself."""
    return extract_tagged_answer(text, required=False)


def judge_turn(
    thesis_reply: str,
    antithesis_arg: StructuredArgument,
    judge_backend: Backend,
) -> JudgeVerdict:
    """One refereeing pass over both conclusions.

    CONTINUE yields no convincement; THESIS/ANTITHESIS name the side whose
    answer stands, extracted from that side's own text.
    """
    reply = judge_backend.complete(
        prompts.judge_turn_request(thesis_reply, antithesis_arg.conclusion)
    ).text
    verdict, summary = _parse_judge_reply(reply, allow_continue=True)
    if verdict == "CONTINUE":
        return JudgeVerdict(convinced=None, summary=summary)
    if verdict == "THESIS":
        answer = _extract_side_answer(thesis_reply)
        side = DebateSide.THESIS
    else:
        answer = _extract_side_answer(antithesis_arg.conclusion)
        side = DebateSide.ANTITHESIS
    return JudgeVerdict(convinced=Convinced(winner=side, answer=answer), summary=summary)


def _transcript_text(turns: list[DebateTurn]) -> str:
    parts = []
    for t, turn in enumerate(turns, start=1):
        parts.append(
            f"Turn {t}\n"
            f"Antithesis reference: {turn.antithesis.reference}\n"
            f"Antithesis criticism: {turn.antithesis.criticism}\n"
            f"Antithesis conclusion: {turn.antithesis.conclusion}\n"
            f"Thesis reply: {turn.thesis_reply}"
        )
    return "\n\n".join(parts)


def debate(
    question: Question,
    doc: Document,
    expert_answer: Answer,
    thesis_backend: Backend,
    antithesis_backend: Backend,
    judge_backend: Backend,
    max_turns: int = 3,
) -> DebateOutcome:
    """Thesis/antithesis debate over the expert answer.

    The antithesis first proposes an alternative; when the alternative is
    the expert answer (or contains it) the debate exits immediately with the
    expert answer. Otherwise up to three turns run: the thesis sees only the
    reference and criticism of each antithesis argument, never its
    conclusion, and the judge may end the debate early by declaring a side
    convinced. After the turn budget, the judge rules on the full transcript.
    """
    a_e = expert_answer.text
    proposal = antithesis_backend.complete(
        prompts.antithesis_proposal_request(question, doc, a_e)
    ).text
    a_alt = extract_tagged_answer(proposal, required=False)
    if answers_equal(a_alt, a_e) or answer_contained(a_e, a_alt):
        return DebateOutcome(
            answer=Answer(text=a_e, origin=AnswerOrigin.DEBATE),
            turns=(),
            resolution=DebateResolution.EARLY_EXIT,
            alternative=a_alt,
        )

    summary = ""
    turns: list[DebateTurn] = []
    for _ in range(max_turns):
        arg = parse_argument(
            antithesis_backend.complete(
                prompts.antithesis_argument_request(question, doc, a_e, summary)
            ).text
        )
        thesis_reply = thesis_backend.complete(
            prompts.thesis_request(
                question, doc, a_e, arg.reference, arg.criticism, summary
            )
        ).text
        verdict = judge_turn(thesis_reply, arg, judge_backend)
        turns.append(DebateTurn(antithesis=arg, thesis_reply=thesis_reply,
                                verdict=verdict))
        summary = verdict.summary
        if verdict.convinced is not None:
            winner = verdict.convinced.winner
            text = a_e if winner is DebateSide.THESIS else a_alt
            return DebateOutcome(
                answer=Answer(text=text, origin=AnswerOrigin.DEBATE),
                turns=tuple(turns),
                resolution=DebateResolution.CONVINCED,
                alternative=a_alt,
            )

    final = judge_backend.complete(
        prompts.judge_final_request(_transcript_text(turns))
    ).text
    verdict, _ = _parse_judge_reply(final, allow_continue=False)
    text = a_e if verdict == "THESIS" else a_alt
    return DebateOutcome(
        answer=Answer(text=text, origin=AnswerOrigin.DEBATE),
        turns=tuple(turns),
        resolution=DebateResolution.FINAL_JUDGMENT,
        alternative=a_alt,
    )
