"""Agent selection by constrained decoding.

The router's label head is decoded with a score-guided depth-first
enumeration over token continuations: branches are pruned once their
cumulative negative log-likelihood exceeds -log(min_prob), except along the
greedy spine, which always survives so at least one complete sequence is
returned. The activation vector is then the union of agent labels decoded
from every candidate above the probability floor.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

from .backend import Backend, ChatRequest, TokenDistribution
from .core import AgentKind, Document, Question, ReasoningPath
from .errors import EmptyDistribution
from .prompts import router_request


@dataclass(frozen=True)
class DecodeConfig:
    min_prob: float = 0.02
    max_new_tokens: int = 3
    temperature: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.min_prob < 1.0:
            raise ValueError("min_prob must lie in (0, 1)")
        if self.max_new_tokens <= 0:
            raise ValueError("max_new_tokens must be positive")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass(frozen=True)
class DecodeCandidate:
    tokens: tuple[str, ...]
    score: float  # cumulative NLL, non-negative

    @property
    def probability(self) -> float:
        return math.exp(-self.score)

    @property
    def text(self) -> str:
        return "".join(self.tokens)


@dataclass(frozen=True)
class ActivationVector:
    """9-slot binary agent selection with its ranked-candidate provenance."""

    bits: tuple[bool, ...]
    provenance: tuple[DecodeCandidate, ...] = ()
    fallback: bool = False

    def __post_init__(self):
        if len(self.bits) != 9:
            raise ValueError("activation vector must have exactly 9 slots")
        if not any(self.bits):
            raise ValueError("activation vector must have at least one bit set")

    def agents(self) -> tuple[AgentKind, ...]:
        return tuple(
            AgentKind.from_index(i) for i, bit in enumerate(self.bits) if bit
        )

    @classmethod
    def from_agents(
        cls,
        agents: Sequence[AgentKind],
        provenance: Sequence[DecodeCandidate] = (),
        fallback: bool = False,
    ) -> "ActivationVector":
        active = set(agents)
        bits = tuple(AgentKind.from_index(i) in active for i in range(9))
        return cls(bits=bits, provenance=tuple(provenance), fallback=fallback)


def _scaled_nlls(
    dist: TokenDistribution, temperature: float
) -> list[tuple[str, float]]:
    """Per-token NLLs after renormalization and temperature scaling.

    Renormalizing the (possibly top-k truncated) distribution and applying
    softmax-with-temperature in log space; the renormalization constant
    cancels inside the softmax.
    """
    if not dist.entries:
        raise EmptyDistribution("oracle returned an empty distribution")
    scaled = [(token, math.log(p) / temperature) for token, p in dist.entries]
    m = max(lp for _, lp in scaled)
    lse = m + math.log(sum(math.exp(lp - m) for _, lp in scaled))
    return [(token, -(lp - lse)) for token, lp in scaled]


def _is_end_token(token: str) -> bool:
    # Whitespace-only or empty tokens terminate a label sequence.
    return token.strip() == ""


def turbo_dfs(
    oracle: Backend, context: ChatRequest, config: DecodeConfig
) -> list[DecodeCandidate]:
    """Enumerate token continuations under the NLL threshold.

    Emits every complete sequence (terminated by an end-of-label token or at
    ``max_new_tokens``) whose cumulative score stays within
    -log(min_prob), plus the fully greedy continuation regardless of score.
    Output is sorted ascending by score, ties broken by token text.
    """
    threshold = -math.log(config.min_prob)
    out: list[DecodeCandidate] = []

    def explore(prefix: tuple[str, ...], score: float, on_greedy_spine: bool):
        dist = oracle.next_token_distribution(list(prefix), context)
        entries = _scaled_nlls(dist, config.temperature)
        greedy_token = min(entries, key=lambda e: (e[1], e[0]))[0]
        for token, nll in entries:
            new_score = score + nll
            is_greedy = token == greedy_token
            if new_score > threshold and not (on_greedy_spine and is_greedy):
                continue
            tokens = prefix + (token,)
            if _is_end_token(token) or len(tokens) >= config.max_new_tokens:
                out.append(DecodeCandidate(tokens=tokens, score=new_score))
            else:
                explore(tokens, new_score, on_greedy_spine and is_greedy)

    explore((), 0.0, True)
    out.sort(key=lambda c: (c.score, c.tokens))
    return out


_LABEL_BY_FOLD = {kind.label: kind for kind in AgentKind}
_SPLIT = re.compile(r"[\s,]+")


def decode_agents(tokens: Sequence[str]) -> set[AgentKind]:
    """Map a token sequence to the agent labels it spells out.

    Tokens are concatenated, split on whitespace and commas, and matched
    case-insensitively against the nine canonical labels; unmatched pieces
    are ignored.
    """
    text = "".join(tokens)
    found = set()
    for piece in _SPLIT.split(text):
        kind = _LABEL_BY_FOLD.get(piece.casefold())
        if kind is not None:
            found.add(kind)
    return found


def extract_activation(
    candidates: Sequence[DecodeCandidate], config: DecodeConfig
) -> ActivationVector:
    """Union of decoded labels over candidates with probability >= min_prob.

    An empty union falls back to the catch-all agent and flags it, so the
    chain always has at least one specialist to run.
    """
    union: set[AgentKind] = set()
    for cand in candidates:
        if cand.probability >= config.min_prob:
            union |= decode_agents(cand.tokens)
    if not union:
        return ActivationVector.from_agents(
            [AgentKind.OTHER], provenance=candidates, fallback=True
        )
    return ActivationVector.from_agents(sorted(union, key=lambda k: k.index),
                                        provenance=candidates)


def route(
    question: Question,
    doc: Document,
    path: ReasoningPath,
    oracle: Backend,
    config: DecodeConfig,
) -> ActivationVector:
    """Stage-2 agent selection from (question, reasoning path, document)."""
    context = router_request(question, doc, path)
    candidates = turbo_dfs(oracle, context, config)
    return extract_activation(candidates, config)
