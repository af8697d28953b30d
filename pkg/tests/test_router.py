import math
import random

import pytest

from conftest import label_tree
from docorch.backend import ChatMessage, ChatRequest, Role, ScriptedOracle
from docorch.core import AgentKind, ReasoningPath
from docorch.errors import UnscriptedRequestError
from docorch.router import (
    ActivationVector,
    DecodeCandidate,
    DecodeConfig,
    decode_agents,
    extract_activation,
    route,
    turbo_dfs,
)

CONTEXT = ChatRequest(messages=(ChatMessage(Role.USER, "ctx"),))


def brute_force_decode(tree, config):
    """Independent enumeration: all complete sequences filtered by the
    threshold rule, plus the fully greedy sequence."""

    def scaled_nll(entries, temperature):
        # renormalize, then softmax with temperature, computed naively
        total = sum(p for _, p in entries)
        probs = [(t, p / total) for t, p in entries]
        denom = sum(p ** (1.0 / temperature) for _, p in probs)
        return [(t, -math.log(p ** (1.0 / temperature) / denom)) for t, p in probs]

    def all_sequences(prefix, score):
        entries = tree[tuple(prefix)]
        out = []
        for token, nll in scaled_nll(entries, config.temperature):
            seq = prefix + (token,)
            total = score + nll
            if token.strip() == "" or len(seq) >= config.max_new_tokens:
                out.append((seq, total))
            else:
                out.extend(all_sequences(seq, total))
        return out

    def greedy_sequence():
        prefix, score = (), 0.0
        while True:
            entries = scaled_nll(tree[prefix], config.temperature)
            token, nll = min(entries, key=lambda e: (e[1], e[0]))
            prefix, score = prefix + (token,), score + nll
            if token.strip() == "" or len(prefix) >= config.max_new_tokens:
                return prefix, score

    threshold = -math.log(config.min_prob)
    kept = {seq: s for seq, s in all_sequences((), 0.0) if s <= threshold}
    greedy, greedy_score = greedy_sequence()
    kept.setdefault(greedy, greedy_score)
    return kept


def random_tree(rng):
    vocab_size = rng.randint(1, 10)
    vocab = [chr(ord("a") + i) for i in range(vocab_size)]
    if rng.random() < 0.3:
        vocab.append(" ")  # end-of-label token
    depth = rng.randint(1, 3)
    tree = {}

    def fill(prefix):
        weights = [rng.random() + 1e-3 for _ in vocab]
        total = sum(weights)
        tree[prefix] = [(t, w / total) for t, w in zip(vocab, weights)]
        if len(prefix) + 1 < depth:
            for token in vocab:
                if token.strip():
                    fill(prefix + (token,))

    fill(())
    return tree, depth


class TestTurboDfs:
    def test_degenerate_single_token(self):
        oracle = ScriptedOracle({(): [("only", 1.0)]})
        config = DecodeConfig(min_prob=0.02, max_new_tokens=1, temperature=1.0)
        candidates = turbo_dfs(oracle, CONTEXT, config)
        assert len(candidates) == 1
        assert candidates[0].tokens == ("only",)
        assert candidates[0].score == pytest.approx(0.0, abs=1e-12)
        assert candidates[0].probability == pytest.approx(1.0, abs=1e-12)

    def _two_level_oracle(self):
        return ScriptedOracle(
            {
                (): [("x", 0.9), ("y", 0.1)],
                ("x",): [("x", 0.5), ("y", 0.5)],
                ("y",): [("x", 0.5), ("y", 0.5)],
            }
        )

    def test_exhaustive_two_level_all_retained(self):
        config = DecodeConfig(min_prob=0.04, max_new_tokens=2, temperature=1.0)
        candidates = turbo_dfs(self._two_level_oracle(), CONTEXT, config)
        got = {c.tokens: c.probability for c in candidates}
        assert got[("x", "x")] == pytest.approx(0.45, abs=1e-9)
        assert got[("x", "y")] == pytest.approx(0.45, abs=1e-9)
        assert got[("y", "x")] == pytest.approx(0.05, abs=1e-9)
        assert got[("y", "y")] == pytest.approx(0.05, abs=1e-9)
        # sorted ascending by score, ties lexicographic
        assert [c.tokens for c in candidates] == [
            ("x", "x"), ("x", "y"), ("y", "x"), ("y", "y"),
        ]

    def test_threshold_prunes_low_probability_branches(self):
        config = DecodeConfig(min_prob=0.06, max_new_tokens=2, temperature=1.0)
        candidates = turbo_dfs(self._two_level_oracle(), CONTEXT, config)
        assert {c.tokens for c in candidates} == {("x", "x"), ("x", "y")}

    def test_greedy_sequence_survives_any_threshold(self):
        oracle = ScriptedOracle(
            {(): [("x", 0.6), ("y", 0.4)], ("x",): [("x", 0.5), ("y", 0.5)]}
        )
        config = DecodeConfig(min_prob=0.9, max_new_tokens=2, temperature=1.0)
        candidates = turbo_dfs(oracle, CONTEXT, config)
        assert [c.tokens for c in candidates] == [("x", "x")]

    def test_end_token_terminates_sequence(self):
        oracle = ScriptedOracle(
            {(): [(" ", 0.7), ("x", 0.3)], ("x",): [(" ", 1.0)]}
        )
        config = DecodeConfig(min_prob=0.01, max_new_tokens=3, temperature=1.0)
        candidates = turbo_dfs(oracle, CONTEXT, config)
        assert {c.tokens for c in candidates} == {(" ",), ("x", " ")}

    def test_oracle_error_propagates(self):
        oracle = ScriptedOracle({})
        with pytest.raises(UnscriptedRequestError):
            turbo_dfs(oracle, CONTEXT, DecodeConfig())

    def test_brute_force_equivalence_randomized(self):
        rng = random.Random(20260826)
        for _ in range(200):
            tree, depth = random_tree(rng)
            config = DecodeConfig(
                min_prob=rng.uniform(0.01, 0.3),
                max_new_tokens=depth,
                temperature=rng.uniform(0.5, 1.5),
            )
            expected = brute_force_decode(tree, config)
            got = turbo_dfs(ScriptedOracle(tree), CONTEXT, config)
            assert {c.tokens for c in got} == set(expected)
            for cand in got:
                assert cand.score == pytest.approx(
                    expected[cand.tokens], abs=1e-9
                )

    def test_min_prob_monotonicity(self):
        rng = random.Random(7)
        for _ in range(50):
            tree, depth = random_tree(rng)
            temp = rng.uniform(0.5, 1.5)
            lo, hi = sorted((rng.uniform(0.01, 0.3), rng.uniform(0.01, 0.3)))
            loose = turbo_dfs(
                ScriptedOracle(tree), CONTEXT,
                DecodeConfig(min_prob=lo, max_new_tokens=depth, temperature=temp),
            )
            tight = turbo_dfs(
                ScriptedOracle(tree), CONTEXT,
                DecodeConfig(min_prob=hi, max_new_tokens=depth, temperature=temp),
            )
            assert {c.tokens for c in tight} <= {c.tokens for c in loose}

    def test_score_additivity_recomputed_per_step(self):
        tree = {
            (): [("a", 0.5), ("b", 0.3), ("c", 0.2)],
            ("a",): [("a", 0.6), ("b", 0.4)],
            ("b",): [("a", 0.9), ("b", 0.1)],
            ("c",): [("a", 0.5), ("b", 0.5)],
        }
        config = DecodeConfig(min_prob=0.01, max_new_tokens=2, temperature=0.8)

        def step_nll(prefix, token):
            entries = tree[prefix]
            denom = sum(p ** (1 / config.temperature) for _, p in entries)
            prob = dict(entries)[token] ** (1 / config.temperature) / denom
            return -math.log(prob)

        for cand in turbo_dfs(ScriptedOracle(tree), CONTEXT, config):
            total = sum(
                step_nll(cand.tokens[:i], cand.tokens[i])
                for i in range(len(cand.tokens))
            )
            assert cand.score == pytest.approx(total, abs=1e-9)

    def test_probability_score_coherence(self):
        rng = random.Random(13)
        for _ in range(20):
            tree, depth = random_tree(rng)
            config = DecodeConfig(min_prob=0.05, max_new_tokens=depth)
            for cand in turbo_dfs(ScriptedOracle(tree), CONTEXT, config):
                assert abs(cand.probability - math.exp(-cand.score)) < 1e-12


class TestDecodeAgents:
    def test_exact_label(self):
        assert decode_agents(["table"]) == {AgentKind.TABLE}

    def test_split_and_match(self):
        assert decode_agents(["table", " figure"]) == {
            AgentKind.TABLE,
            AgentKind.FIGURE,
        }

    def test_no_match_empty_set(self):
        assert decode_agents(["banana"]) == set()

    def test_comma_separated_and_case_insensitive(self):
        assert decode_agents(["Table,OCR"]) == {AgentKind.TABLE, AgentKind.OCR}


def cand(text, p):
    return DecodeCandidate(tokens=(text,), score=-math.log(p))


class TestExtractActivation:
    def test_threshold_then_union(self):
        candidates = [cand("table", 0.60), cand("table figure", 0.25),
                      cand("ocr", 0.01)]
        vector = extract_activation(candidates, DecodeConfig(min_prob=0.02))
        assert set(vector.agents()) == {AgentKind.TABLE, AgentKind.FIGURE}
        assert not vector.fallback

    def test_singleton_union(self):
        vector = extract_activation([cand("table", 1.0)], DecodeConfig())
        assert vector.agents() == (AgentKind.TABLE,)

    def test_empty_union_falls_back_to_other(self):
        vector = extract_activation([cand("banana", 0.9)], DecodeConfig())
        assert vector.agents() == (AgentKind.OTHER,)
        assert vector.fallback

    def test_union_monotone_under_added_candidate(self):
        config = DecodeConfig(min_prob=0.02)
        base = [cand("table", 0.6)]
        grown = base + [cand("figure", 0.3)]
        before = set(extract_activation(base, config).agents())
        after = set(extract_activation(grown, config).agents())
        assert before <= after

    def test_vector_requires_a_set_bit(self):
        with pytest.raises(ValueError):
            ActivationVector(bits=(False,) * 9)


class TestRoute:
    def test_deterministic_single_label(self, question, doc):
        path = ReasoningPath(steps=("check the table",))
        vector = route(question, doc, path, ScriptedOracle(label_tree("table")),
                       DecodeConfig())
        assert vector.agents() == (AgentKind.TABLE,)

    def test_two_level_union(self, question, doc):
        tree = {
            (): [("table", 0.9), ("figure", 0.1)],
            ("table",): [(" table", 0.5), (" figure", 0.5)],
            ("figure",): [(" table", 0.5), (" figure", 0.5)],
        }
        vector = route(
            question, doc, ReasoningPath(steps=("s",)),
            ScriptedOracle(tree),
            DecodeConfig(min_prob=0.04, max_new_tokens=2, temperature=1.0),
        )
        assert set(vector.agents()) == {AgentKind.TABLE, AgentKind.FIGURE}

    def test_oracle_error_propagates_without_partial_vector(self, question, doc):
        with pytest.raises(UnscriptedRequestError):
            route(question, doc, ReasoningPath(steps=("s",)),
                  ScriptedOracle({}), DecodeConfig())
