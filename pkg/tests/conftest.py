import base64

import pytest

from docorch.backend import ScriptedBackend, ScriptedOracle, ScriptedReply
from docorch.core import AgentKind, Document, Question
from docorch.execution import MaskConfig
from docorch.pipeline import SUPPORT_ROLES, PipelineConfig
from docorch.router import DecodeConfig

# 1x1 transparent PNG
PNG_BYTES = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mP8"
    "z8BQDwAEhQGAhKmMIQAAAABJRU5ErkJggg=="
)


# Verdict lines appended by the acceptance tests, echoed after the run.
ACCEPTANCE_VERDICTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture
def doc():
    return Document(id="doc-1", image_bytes=PNG_BYTES, mime_type="image/png")


@pytest.fixture
def question():
    return Question(id="q-1", text="What is the total revenue in Q3?")


def label_tree(label):
    """Oracle tree that deterministically emits one agent label."""
    return {(): [(label, 1.0)], (label,): [(" ", 1.0)]}


def scripted_config(
    thinker=(),
    router_tree=None,
    sanity=(),
    debate=(),
    eval_=(),
    thesis=(),
    antithesis=(),
    judge=(),
    specialists=None,
    decode=None,
    mask=None,
):
    """Fully scripted pipeline config; unused roles hard-error when called."""
    replies = {
        "thinker": thinker,
        "sanity": sanity,
        "debate": debate,
        "eval": eval_,
        "thesis": thesis,
        "antithesis": antithesis,
        "judge": judge,
    }
    backends = {
        role: ScriptedBackend(role, replies.get(role, ()))
        for role in SUPPORT_ROLES
        if role != "router"
    }
    backends["router"] = ScriptedOracle(router_tree or label_tree("table"))
    specialists = specialists or {}
    for kind in AgentKind:
        backends[kind.label] = ScriptedBackend(
            kind.label, specialists.get(kind.label, ())
        )
    return PipelineConfig(
        backends=backends,
        decode=decode or DecodeConfig(),
        mask=mask or MaskConfig(),
    )


__all__ = [
    "PNG_BYTES",
    "label_tree",
    "scripted_config",
    "ScriptedBackend",
    "ScriptedOracle",
    "ScriptedReply",
]
