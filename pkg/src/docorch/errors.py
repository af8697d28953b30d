"""Exception hierarchy shared across the orchestration engine."""

from __future__ import annotations


class DocorchError(Exception):
    """Base class for all engine errors."""


class TransportError(DocorchError):
    """Network-level failure talking to an inference endpoint (after retries)."""


class ProtocolError(DocorchError):
    """The endpoint replied, but the payload did not match the wire schema."""


class ModelRefusal(DocorchError):
    """The endpoint reported an error finish reason for the generation."""


class UnsupportedCapability(DocorchError):
    """The endpoint cannot serve the requested feature (e.g. logprobs)."""


class UnscriptedRequestError(DocorchError):
    """A scripted backend received a request it has no canned reply for."""


class ScriptAssertionError(DocorchError):
    """A scripted reply's declared expectations about the request were violated."""


class ParseError(DocorchError):
    """A model reply did not contain the tagged structure a stage requires."""


class OracleError(DocorchError):
    """The next-token-distribution oracle failed for an explored prefix."""


class EmptyDistribution(DocorchError):
    """The oracle returned a distribution with no tokens."""


class EmptyCorpus(DocorchError):
    """Corpus-level scoring was asked to aggregate zero records."""


class ChainExecutionError(DocorchError):
    """An agent in the sequential chain failed; carries the failing agent."""

    def __init__(self, agent: str, cause: Exception):
        super().__init__(f"agent '{agent}' failed: {cause}")
        self.agent = agent
        self.cause = cause


class PipelineError(DocorchError):
    """A stage failed; carries the stage name and the partial trace."""

    def __init__(self, stage: str, cause: Exception, trace=None):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.trace = trace
