"""Agent invocation backends.

Two implementations sit behind one small surface: an HTTP client for
chat-completions-style inference endpoints, and a scripted backend that
replays canned responses deterministically for tests and offline runs.
Both expose plain text completion and, for the router, the next-token
distribution oracle.
"""

from __future__ import annotations

import base64
import enum
import hashlib
import math
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import httpx

from .core import Document
from .errors import (
    ModelRefusal,
    ProtocolError,
    ScriptAssertionError,
    TransportError,
    UnscriptedRequestError,
    UnsupportedCapability,
)


class Role(enum.Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    text: str
    image: Optional[Document] = None


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    model_name: str = ""
    temperature: float = 0.0
    max_tokens: int = 1024
    want_logprobs: bool = False

    def __post_init__(self):
        if not isinstance(self.messages, tuple):
            object.__setattr__(self, "messages", tuple(self.messages))
        if not any(m.role is Role.USER for m in self.messages):
            raise ValueError("a chat request needs at least one user message")
        if sum(1 for m in self.messages if m.image is not None) > 1:
            raise ValueError("at most one image per request")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def joined_text(self) -> str:
        """All message texts concatenated; used for fingerprints and assertions."""
        return "\n".join(m.text for m in self.messages)

    def fingerprint(self) -> str:
        return hashlib.sha256(self.joined_text().encode("utf-8")).hexdigest()[:16]


class FinishReason(enum.Enum):
    STOP = "stop"
    LENGTH = "length"
    ERROR = "error"


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: FinishReason = FinishReason.STOP
    latency_ms: int = 0
    error_detail: str = ""

    def __post_init__(self):
        if self.latency_ms < 0:
            raise ValueError("latency must be non-negative")
        if self.finish_reason is FinishReason.ERROR and not self.error_detail:
            object.__setattr__(self, "error_detail", "unspecified endpoint error")


@dataclass(frozen=True)
class TokenDistribution:
    """Top-k truncated next-token distribution; probabilities strictly positive."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if not isinstance(self.entries, tuple):
            object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        total = 0.0
        for token, prob in self.entries:
            if not 0.0 < prob <= 1.0:
                raise ValueError(f"probability out of (0,1] for token {token!r}")
            if token in seen:
                raise ValueError(f"duplicate token {token!r} in distribution")
            seen.add(token)
            total += prob
        if total > 1.0 + 1e-6:
            raise ValueError(f"probabilities sum to {total} > 1")


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model: str
    timeout_ms: int = 60_000
    retries: int = 3
    auth_env: str = ""
    top_logprobs: int = 20


class Backend:
    """Uniform invocation surface. Subclasses implement the two calls."""

    def complete(self, request: ChatRequest) -> ChatResponse:
        raise NotImplementedError

    def next_token_distribution(
        self, prefix: Sequence[str], context: ChatRequest
    ) -> TokenDistribution:
        raise NotImplementedError

    def session(self) -> "Backend":
        """A per-pipeline-run view of this backend.

        Stateless backends return themselves; scripted backends return a
        fresh copy so per-scenario counters stay isolated per run.
        """
        return self


# --------------------------------------------------------------------------
# HTTP backend


def _encode_image(doc: Document) -> str:
    b64 = base64.b64encode(doc.image_bytes).decode("ascii")
    return f"data:{doc.mime_type};base64,{b64}"


def serialize_request(request: ChatRequest, config: EndpointConfig) -> dict:
    """Wire JSON body for a chat request (role-tagged multi-part messages)."""
    messages = []
    for msg in request.messages:
        content = [{"type": "text", "text": msg.text}]
        if msg.image is not None:
            content.append({"type": "image", "image_data": _encode_image(msg.image)})
        messages.append({"role": msg.role.value, "content": content})
    body = {
        "model": request.model_name or config.model,
        "messages": messages,
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
        "logprobs": request.want_logprobs,
    }
    if request.want_logprobs:
        body["top_logprobs"] = config.top_logprobs
    return body


def _extract_text_and_finish(payload: dict) -> tuple[str, FinishReason, dict]:
    """Pull generated text and finish reason from either wire shape.

    Accepts the OpenAI-style ``choices`` envelope or a flat
    ``{"text", "finish_reason"}`` document.
    """
    try:
        if "choices" in payload:
            choice = payload["choices"][0]
            message = choice.get("message", {})
            text = message.get("content", choice.get("text", ""))
            finish = choice.get("finish_reason", "stop")
            extra = choice.get("logprobs") or {}
        else:
            text = payload["text"]
            finish = payload.get("finish_reason", "stop")
            extra = payload.get("logprobs") or {}
    except (KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(f"malformed endpoint reply: {exc}") from exc
    if not isinstance(text, str):
        raise ProtocolError("endpoint reply text is not a string")
    try:
        reason = FinishReason(finish)
    except ValueError as exc:
        raise ProtocolError(f"unknown finish reason {finish!r}") from exc
    return text, reason, extra


class HttpBackend(Backend):
    """Chat-completions client with bounded retries on transport failure.

    Retries never apply to protocol errors or model refusals; those are
    semantic failures a retry would only mask.
    """

    def __init__(
        self,
        config: EndpointConfig,
        transport: Optional[httpx.BaseTransport] = None,
        backoff_s: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._backoff_s = backoff_s
        self._sleep = sleep
        self._client = httpx.Client(
            timeout=config.timeout_ms / 1000.0, transport=transport
        )

    def _headers(self) -> dict:
        headers = {"content-type": "application/json"}
        if self.config.auth_env:
            token = os.environ.get(self.config.auth_env, "")
            if token:
                headers["authorization"] = f"Bearer {token}"
        return headers

    def _post(self, body: dict) -> dict:
        last_exc: Exception | None = None
        for attempt in range(self.config.retries):
            if attempt:
                self._sleep(self._backoff_s * (2 ** (attempt - 1)))
            try:
                resp = self._client.post(
                    self.config.url, json=body, headers=self._headers()
                )
            except httpx.TransportError as exc:
                last_exc = exc
                continue
            if resp.status_code >= 500:
                last_exc = TransportError(f"server error {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise ProtocolError(f"endpoint rejected request: {resp.status_code}")
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"non-JSON endpoint reply: {exc}") from exc
        raise TransportError(
            f"request failed after {self.config.retries} attempts: {last_exc}"
        )

    def complete(self, request: ChatRequest) -> ChatResponse:
        body = serialize_request(request, self.config)
        started = time.perf_counter()
        payload = self._post(body)
        latency_ms = int((time.perf_counter() - started) * 1000)
        text, reason, _ = _extract_text_and_finish(payload)
        if reason is FinishReason.ERROR:
            raise ModelRefusal(payload.get("error", "endpoint reported an error"))
        return ChatResponse(text=text, finish_reason=reason, latency_ms=latency_ms)

    def next_token_distribution(
        self, prefix: Sequence[str], context: ChatRequest
    ) -> TokenDistribution:
        body = serialize_request(
            ChatRequest(
                messages=context.messages,
                model_name=context.model_name,
                temperature=context.temperature,
                max_tokens=1,
                want_logprobs=True,
            ),
            self.config,
        )
        body["continuation_prefix"] = list(prefix)
        payload = self._post(body)
        _, _, logprobs = _extract_text_and_finish(payload)
        top = logprobs.get("top_logprobs") if isinstance(logprobs, dict) else None
        if not top:
            raise UnsupportedCapability(
                f"endpoint {self.config.url} returned no top_logprobs"
            )
        first = top[0]
        try:
            entries = tuple(
                (str(token), math.exp(float(lp))) for token, lp in first.items()
            )
        except (AttributeError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed top_logprobs: {exc}") from exc
        return TokenDistribution(entries=entries)


# --------------------------------------------------------------------------
# Scripted backend


@dataclass(frozen=True)
class ScriptedReply:
    """One canned reply, with optional assertions about the incoming request."""

    text: str
    finish_reason: FinishReason = FinishReason.STOP
    require_contains: tuple[str, ...] = ()
    require_absent: tuple[str, ...] = ()
    expect_fingerprint: str = ""


class ScriptedBackend(Backend):
    """Replays canned replies for one agent role, in call order.

    A lookup miss (more calls than scripted replies) is a hard error; the
    scripted scenario must be total over the calls a test makes.
    """

    def __init__(self, role: str, replies: Sequence[ScriptedReply | str]):
        self.role = role
        self.replies = tuple(
            r if isinstance(r, ScriptedReply) else ScriptedReply(text=r)
            for r in replies
        )
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    def session(self) -> "ScriptedBackend":
        return ScriptedBackend(self.role, self.replies)

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            ordinal = len(self.requests)
            self.requests.append(request)
        if ordinal >= len(self.replies):
            raise UnscriptedRequestError(
                f"unscripted request: role={self.role} ordinal={ordinal} "
                f"fingerprint={request.fingerprint()}"
            )
        reply = self.replies[ordinal]
        joined = request.joined_text()
        for fragment in reply.require_contains:
            if fragment not in joined:
                raise ScriptAssertionError(
                    f"role={self.role} ordinal={ordinal}: expected fragment "
                    f"{fragment!r} missing from request"
                )
        for fragment in reply.require_absent:
            if fragment in joined:
                raise ScriptAssertionError(
                    f"role={self.role} ordinal={ordinal}: forbidden fragment "
                    f"{fragment!r} present in request"
                )
        if reply.expect_fingerprint and reply.expect_fingerprint != request.fingerprint():
            raise ScriptAssertionError(
                f"role={self.role} ordinal={ordinal}: fingerprint mismatch"
            )
        if reply.finish_reason is FinishReason.ERROR:
            raise ModelRefusal(f"scripted refusal: role={self.role} ordinal={ordinal}")
        return ChatResponse(text=reply.text, finish_reason=reply.finish_reason)

    def next_token_distribution(
        self, prefix: Sequence[str], context: ChatRequest
    ) -> TokenDistribution:
        raise UnsupportedCapability(
            f"scripted backend for role {self.role!r} has no token oracle; "
            "use ScriptedOracle"
        )


class ScriptedOracle(Backend):
    """Deterministic next-token oracle over an explicit prefix tree.

    ``tree`` maps a token-prefix tuple to the distribution observed at that
    node. Unscripted prefixes are a hard error.
    """

    def __init__(self, tree: dict[tuple[str, ...], Sequence[tuple[str, float]]]):
        self.tree = {tuple(k): tuple(v) for k, v in tree.items()}

    def next_token_distribution(
        self, prefix: Sequence[str], context: ChatRequest
    ) -> TokenDistribution:
        key = tuple(prefix)
        if key not in self.tree:
            raise UnscriptedRequestError(f"unscripted oracle prefix: {key!r}")
        return TokenDistribution(entries=tuple(self.tree[key]))

    def complete(self, request: ChatRequest) -> ChatResponse:
        raise UnsupportedCapability("ScriptedOracle only serves token distributions")
