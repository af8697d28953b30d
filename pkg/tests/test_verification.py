import pytest

from conftest import PNG_BYTES
from docorch.backend import ScriptedBackend, ScriptedReply
from docorch.core import Answer, AnswerOrigin, Document, Question
from docorch.errors import ParseError
from docorch.verification import (
    DebateResolution,
    DebateSide,
    StructuredArgument,
    TurnVerdict,
    debate,
    judge_turn,
    parse_argument,
    stress_test,
)


def expert(text="GSU, 1977"):
    return Answer(text=text, origin=AnswerOrigin.EXPERT)


ARG = "[REFERENCE] line 4 says X [CRITICISM] thesis ignored X [CONCLUSION] answer is Y"


class TestParseArgument:
    def test_three_sections(self):
        arg = parse_argument(ARG)
        assert arg == StructuredArgument(
            reference="line 4 says X",
            criticism="thesis ignored X",
            conclusion="answer is Y",
        )

    def test_order_insensitive(self):
        reordered = (
            "[CONCLUSION] answer is Y [REFERENCE] line 4 says X "
            "[CRITICISM] thesis ignored X"
        )
        assert parse_argument(reordered) == parse_argument(ARG)

    def test_surrounding_prose_tolerated(self):
        noisy = f"Let me respond.\n{ARG}\nThat is all."
        arg = parse_argument(noisy)
        assert arg.reference == "line 4 says X"

    def test_missing_section_named(self):
        with pytest.raises(ParseError, match="CRITICISM"):
            parse_argument("[REFERENCE] r [CONCLUSION] c")


class TestJudgeTurn:
    def _arg(self, conclusion="B"):
        return StructuredArgument(reference="r", criticism="c",
                                  conclusion=conclusion)

    def test_continue_verdict(self):
        judge = ScriptedBackend(
            "judge", ["VERDICT: CONTINUE\nSUMMARY: both hold positions"]
        )
        verdict = judge_turn("I maintain A", self._arg(), judge)
        assert verdict.convinced is None
        assert verdict.summary == "both hold positions"

    def test_antithesis_verdict_carries_conclusion_answer(self):
        judge = ScriptedBackend("judge", ["VERDICT: ANTITHESIS\nSUMMARY: done"])
        verdict = judge_turn("I maintain A", self._arg("B"), judge)
        assert verdict.convinced.winner is DebateSide.ANTITHESIS
        assert verdict.convinced.answer == "B"

    def test_missing_verdict_line_is_parse_error(self):
        judge = ScriptedBackend("judge", ["no verdict whatsoever"])
        with pytest.raises(ParseError):
            judge_turn("t", self._arg(), judge)


class TestStressTest:
    def _run(self, eval_verdicts, specialist_replies=None, expert_answer=None):
        expert_answer = expert_answer or expert()
        n = len(eval_verdicts)
        specialist = ScriptedBackend(
            "table",
            specialist_replies
            or [f"reasoned reply\nANSWER: {expert_answer.text}"] * n,
        )
        debate_agent = ScriptedBackend(
            "debate", [f"challenge {i}" for i in range(n)]
        )
        eval_agent = ScriptedBackend(
            "eval", [f"VERDICT: {v}" for v in eval_verdicts]
        )
        question = Question(id="q", text="what year?")
        doc = Document(id="d", image_bytes=PNG_BYTES)
        return stress_test(question, doc, expert_answer, specialist,
                           debate_agent, eval_agent)

    def test_both_turns_pass(self):
        outcome = self._run(["PASS", "PASS"])
        assert outcome.passed
        assert len(outcome.turns) == 2
        assert outcome.settled_answer.text == expert().text
        assert outcome.settled_answer.origin is AnswerOrigin.STRESS_TEST

    def test_first_turn_fail_short_circuits(self):
        outcome = self._run(["FAIL"])
        assert not outcome.passed
        assert len(outcome.turns) == 1
        assert outcome.settled_answer is None

    def test_pass_then_fail(self):
        outcome = self._run(["PASS", "FAIL"])
        assert not outcome.passed
        assert len(outcome.turns) == 2

    def test_answer_drift_fails_turn_despite_eval_pass(self):
        outcome = self._run(
            ["PASS"],
            specialist_replies=["explanation\nANSWER: something else"],
        )
        assert not outcome.passed
        assert outcome.turns[0].answer_drift
        assert outcome.turns[0].verdict is TurnVerdict.FAIL

    def test_followup_regenerated_from_original_answer_each_turn(self):
        expert_answer = expert("1977")
        specialist = ScriptedBackend(
            "table", ["r1\nANSWER: 1977", "r2\nANSWER: 1977"]
        )
        debate_agent = ScriptedBackend(
            "debate",
            [
                ScriptedReply(text="q1", require_contains=("1977",)),
                ScriptedReply(text="q2", require_contains=("1977",)),
            ],
        )
        eval_agent = ScriptedBackend("eval", ["VERDICT: PASS", "VERDICT: PASS"])
        outcome = stress_test(
            Question(id="q", text="when?"),
            Document(id="d", image_bytes=PNG_BYTES),
            expert_answer, specialist, debate_agent, eval_agent,
        )
        assert outcome.passed
        assert len(debate_agent.requests) == 2


class TestDebate:
    def _backends(self, proposal, turns, final=None):
        """turns: list of (arg_text, thesis_reply, judge_reply)."""
        antithesis = ScriptedBackend(
            "antithesis", [proposal] + [t[0] for t in turns]
        )
        thesis_replies = [t[1] for t in turns]
        thesis = ScriptedBackend("thesis", thesis_replies)
        judge_replies = [t[2] for t in turns]
        if final is not None:
            judge_replies.append(final)
        judge = ScriptedBackend("judge", judge_replies)
        return thesis, antithesis, judge

    def _debate(self, question, doc, proposal, turns, final=None, a_e="GSU, 1977"):
        thesis, antithesis, judge = self._backends(proposal, turns, final)
        return debate(question, doc, expert(a_e), thesis, antithesis, judge)

    def test_identical_alternative_exits_early(self, question, doc):
        outcome = self._debate(question, doc, "ANSWER: gsu,  1977", [])
        assert outcome.resolution is DebateResolution.EARLY_EXIT
        assert outcome.answer.text == "GSU, 1977"
        assert outcome.answer.origin is AnswerOrigin.DEBATE
        assert outcome.turns == ()

    def test_containing_alternative_exits_early(self, question, doc):
        outcome = self._debate(question, doc, "ANSWER: founded at GSU, 1977", [])
        assert outcome.resolution is DebateResolution.EARLY_EXIT
        assert outcome.answer.text == "GSU, 1977"

    def test_convinced_at_turn_two(self, question, doc):
        arg = "[REFERENCE] r [CRITICISM] c [CONCLUSION] 1984"
        turns = [
            (arg, "I stand by GSU, 1977", "VERDICT: CONTINUE\nSUMMARY: s1"),
            (arg, "still confident", "VERDICT: ANTITHESIS\nSUMMARY: s2"),
        ]
        outcome = self._debate(question, doc, "ANSWER: 1984", turns)
        assert outcome.resolution is DebateResolution.CONVINCED
        assert outcome.answer.text == "1984"
        assert len(outcome.turns) == 2

    def test_three_unconvinced_turns_then_thesis_final_judgment(self, question, doc):
        arg = "[REFERENCE] r [CRITICISM] c [CONCLUSION] 1984"
        cont = "VERDICT: CONTINUE\nSUMMARY: s"
        turns = [(arg, "defense", cont)] * 3
        outcome = self._debate(question, doc, "ANSWER: 1984", turns,
                               final="VERDICT: THESIS")
        assert outcome.resolution is DebateResolution.FINAL_JUDGMENT
        assert outcome.answer.text == "GSU, 1977"
        assert len(outcome.turns) == 3

    def test_thesis_never_sees_antithesis_conclusion(self, question, doc):
        secret = "the secret conclusion content"
        arg = f"[REFERENCE] evidence [CRITICISM] critique [CONCLUSION] {secret}"
        thesis = ScriptedBackend(
            "thesis",
            [ScriptedReply(
                text="defense",
                require_contains=("evidence", "critique"),
                require_absent=(secret,),
            )],
        )
        antithesis = ScriptedBackend("antithesis", ["ANSWER: 1984", arg])
        judge = ScriptedBackend("judge", ["VERDICT: ANTITHESIS\nSUMMARY: s"])
        outcome = debate(question, doc, expert(), thesis, antithesis, judge)
        assert outcome.answer.text == "1984"

    def test_early_exit_makes_no_further_backend_calls(self, question, doc):
        thesis = ScriptedBackend("thesis", [])
        antithesis = ScriptedBackend("antithesis", ["ANSWER: GSU, 1977"])
        judge = ScriptedBackend("judge", [])
        outcome = debate(question, doc, expert(), thesis, antithesis, judge)
        assert outcome.early_exit
        assert len(antithesis.requests) == 1
        assert len(thesis.requests) == 0
        assert len(judge.requests) == 0

    def test_judge_summary_flows_into_next_turn(self, question, doc):
        marker = "summary-marker-xyz"
        arg = "[REFERENCE] r [CRITICISM] c [CONCLUSION] 1984"
        antithesis = ScriptedBackend(
            "antithesis",
            [
                "ANSWER: 1984",
                ScriptedReply(text=arg, require_absent=(marker,)),
                ScriptedReply(text=arg, require_contains=(marker,)),
            ],
        )
        thesis = ScriptedBackend("thesis", ["d1", "d2"])
        judge = ScriptedBackend(
            "judge",
            [
                f"VERDICT: CONTINUE\nSUMMARY: {marker}",
                "VERDICT: THESIS\nSUMMARY: done",
            ],
        )
        outcome = debate(question, doc, expert(), thesis, antithesis, judge)
        assert outcome.answer.text == "GSU, 1977"

    def test_judge_parse_failure_never_silently_defaults(self, question, doc):
        arg = "[REFERENCE] r [CRITICISM] c [CONCLUSION] 1984"
        turns = [(arg, "defense", "I refuse to follow the format")]
        with pytest.raises(ParseError):
            self._debate(question, doc, "ANSWER: 1984", turns)
