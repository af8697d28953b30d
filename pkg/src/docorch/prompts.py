"""Prompt templates for every agent role.

These strings are part of the engine's external surface: tests assert on
their content (information hiding, masking) and operators can read them to
understand exactly what each agent sees. Changing a template is a
behavioral change and should be treated like one.
"""

from __future__ import annotations

from .backend import ChatMessage, ChatRequest, Role
from .core import AGENT_LABELS, AgentKind, Document, Question, ReasoningPath

ANSWER_TAG = "ANSWER:"
FINAL_TAG = "FINAL:"
VERDICT_TAG = "VERDICT:"
SUMMARY_TAG = "SUMMARY:"

THINKER_SYSTEM = (
    "You are the thinker agent for document question answering. Read the "
    "document image and the question. Reply with numbered reasoning steps, "
    "one per line, describing how to find the answer, then a final line "
    f"'{ANSWER_TAG} <your answer>'."
)

ROUTER_SYSTEM = (
    "You are the routing agent. Given the question, the reasoning steps and "
    "the document, emit the labels of the specialist agents that must run, "
    "chosen from: " + ", ".join(AGENT_LABELS) + "."
)

SPECIALIST_SYSTEM = (
    "You are the {label} specialist for document question answering. Answer "
    "the question from the document image. End your reply with a line "
    f"'{ANSWER_TAG} <your answer>'."
)

STRESS_QUESTION_SYSTEM = (
    "You are the stress-test interrogator. Given the question, the document "
    "and a candidate answer, produce one challenging follow-up question that "
    "probes whether the candidate answer is correct."
)

STRESS_SPECIALIST_SYSTEM = (
    "You previously answered a document question. Answer the follow-up "
    "question below, then restate your answer to the original question on a "
    f"final line '{ANSWER_TAG} <your answer>'."
)

STRESS_EVAL_SYSTEM = (
    "You are the evaluation agent. Judge whether the specialist's response "
    "is coherent, stays on topic, and maintains its original answer. Reply "
    f"with a single line '{VERDICT_TAG} PASS' or '{VERDICT_TAG} FAIL'."
)

ANTITHESIS_PROPOSAL_SYSTEM = (
    "You are the antithesis agent. Given the question, the document and the "
    "current answer, propose an alternative answer you believe is more "
    f"likely correct. Reply with a final line '{ANSWER_TAG} <alternative>'."
)

ANTITHESIS_ARGUMENT_SYSTEM = (
    "You are the antithesis agent arguing against the current answer. Reply "
    "with three bracket-tagged sections: [REFERENCE] evidence from the "
    "document, [CRITICISM] critique of the current answer, [CONCLUSION] your "
    "proposed answer and reasoning."
)

THESIS_SYSTEM = (
    "You are the thesis agent defending the current answer. Address the "
    "opponent's evidence and criticism below and defend your position."
)

JUDGE_TURN_SYSTEM = (
    "You are the judge of a structured debate. Read both positions. Decide "
    "whether either side has been convinced to change its position. Reply "
    f"with '{VERDICT_TAG} CONTINUE', '{VERDICT_TAG} THESIS' or "
    f"'{VERDICT_TAG} ANTITHESIS', then a line '{SUMMARY_TAG} <summary of the "
    "discussion for the next turn>'."
)

JUDGE_FINAL_SYSTEM = (
    "You are the judge of a concluded debate. Analyze the full transcript "
    "and decide which side demonstrated greater confidence. You must pick a "
    f"side: reply with '{VERDICT_TAG} THESIS' or '{VERDICT_TAG} ANTITHESIS'."
)

SANITY_SYSTEM = (
    "You are the sanity checker. Compare the answer to the document's "
    "formatting. You may ONLY insert missing spaces and adjust punctuation "
    "to match the document; never change letters or digits. Reply with a "
    f"single line '{FINAL_TAG} <the answer>'."
)


def _request(system: str, user: str, doc: Document | None, **kw) -> ChatRequest:
    return ChatRequest(
        messages=(
            ChatMessage(Role.SYSTEM, system),
            ChatMessage(Role.USER, user, image=doc),
        ),
        **kw,
    )


def _numbered(path: ReasoningPath) -> str:
    return "\n".join(f"{i + 1}. {step}" for i, step in enumerate(path.steps))


def thinker_request(question: Question, doc: Document) -> ChatRequest:
    return _request(THINKER_SYSTEM, f"Question: {question.text}", doc)


def router_request(
    question: Question, doc: Document, path: ReasoningPath
) -> ChatRequest:
    user = f"Question: {question.text}\nReasoning steps:\n{_numbered(path)}"
    return _request(ROUTER_SYSTEM, user, doc, want_logprobs=True, max_tokens=8)


def specialist_request(
    kind: AgentKind,
    question: Question,
    doc: Document,
    predecessor: str | None,
    masked_path: ReasoningPath | None,
) -> ChatRequest:
    parts = [f"Question: {question.text}"]
    if predecessor is not None:
        parts.append(f"Previous agent's answer: {predecessor}")
    if masked_path is not None:
        parts.append(f"Reasoning steps:\n{_numbered(masked_path)}")
    return _request(
        SPECIALIST_SYSTEM.format(label=kind.label), "\n".join(parts), doc
    )


def stress_question_request(
    question: Question, doc: Document, answer: str
) -> ChatRequest:
    user = f"Question: {question.text}\nCandidate answer: {answer}"
    return _request(STRESS_QUESTION_SYSTEM, user, doc)


def stress_specialist_request(
    debate_question: str, question: Question, doc: Document, answer: str
) -> ChatRequest:
    user = (
        f"Original question: {question.text}\n"
        f"Your answer: {answer}\n"
        f"Follow-up question: {debate_question}"
    )
    return _request(STRESS_SPECIALIST_SYSTEM, user, doc)


def stress_eval_request(
    debate_question: str, response: str, answer: str, revised: str
) -> ChatRequest:
    user = (
        f"Follow-up question: {debate_question}\n"
        f"Specialist response: {response}\n"
        f"Original answer: {answer}\n"
        f"Revised answer: {revised}"
    )
    return _request(STRESS_EVAL_SYSTEM, user, None)


def antithesis_proposal_request(
    question: Question, doc: Document, answer: str
) -> ChatRequest:
    user = f"Question: {question.text}\nCurrent answer: {answer}"
    return _request(ANTITHESIS_PROPOSAL_SYSTEM, user, doc)


def antithesis_argument_request(
    question: Question, doc: Document, answer: str, summary: str
) -> ChatRequest:
    user = f"Question: {question.text}\nCurrent answer: {answer}"
    if summary:
        user += f"\nDiscussion so far: {summary}"
    return _request(ANTITHESIS_ARGUMENT_SYSTEM, user, doc)


def thesis_request(
    question: Question,
    doc: Document,
    answer: str,
    reference: str,
    criticism: str,
    summary: str,
) -> ChatRequest:
    user = (
        f"Question: {question.text}\n"
        f"Your answer: {answer}\n"
        f"Opponent's evidence: {reference}\n"
        f"Opponent's criticism: {criticism}"
    )
    if summary:
        user += f"\nDiscussion so far: {summary}"
    return _request(THESIS_SYSTEM, user, doc)


def judge_turn_request(thesis_reply: str, antithesis_conclusion: str) -> ChatRequest:
    user = (
        f"Thesis position: {thesis_reply}\n"
        f"Antithesis conclusion: {antithesis_conclusion}"
    )
    return _request(JUDGE_TURN_SYSTEM, user, None)


def judge_final_request(transcript_text: str) -> ChatRequest:
    return _request(JUDGE_FINAL_SYSTEM, f"Transcript:\n{transcript_text}", None)


def sanity_request(question: Question, doc: Document, answer: str) -> ChatRequest:
    user = f"Question: {question.text}\nAnswer to check: {answer}"
    return _request(SANITY_SYSTEM, user, doc)
