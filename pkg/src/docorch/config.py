"""Configuration file loading.

A single YAML document maps agent roles to endpoints and sets the decode
and masking hyperparameters. Backends come in three kinds:

- ``http``: a chat-completions endpoint (url, model, timeout, retries,
  auth token env var name).
- ``scripted``: canned replies consumed in call order; for tests and
  offline verification.
- ``scripted_oracle``: an explicit token prefix tree serving next-token
  distributions; only meaningful for the ``router`` role.

Unlisted specialist roles fall back to the ``specialist_default`` entry
when present. Secrets never appear in the file, only env var names.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .backend import (
    Backend,
    EndpointConfig,
    HttpBackend,
    ScriptedBackend,
    ScriptedOracle,
    ScriptedReply,
)
from .core import AgentKind
from .execution import MaskConfig
from .pipeline import SUPPORT_ROLES, PipelineConfig
from .router import DecodeConfig


class ConfigError(ValueError):
    pass


def _build_backend(role: str, spec: dict) -> Backend:
    kind = spec.get("kind")
    if kind == "http":
        try:
            endpoint = EndpointConfig(
                url=spec["url"],
                model=spec["model"],
                timeout_ms=int(spec.get("timeout_ms", 60_000)),
                retries=int(spec.get("retries", 3)),
                auth_env=spec.get("auth_env", ""),
                top_logprobs=int(spec.get("top_logprobs", 20)),
            )
        except KeyError as exc:
            raise ConfigError(f"backend {role!r}: missing key {exc}") from exc
        return HttpBackend(endpoint)
    if kind == "scripted":
        replies = []
        for item in spec.get("responses") or []:
            if isinstance(item, str):
                replies.append(ScriptedReply(text=item))
            else:
                replies.append(
                    ScriptedReply(
                        text=item["text"],
                        require_contains=tuple(item.get("require_contains", [])),
                        require_absent=tuple(item.get("require_absent", [])),
                    )
                )
        return ScriptedBackend(role, replies)
    if kind == "scripted_oracle":
        tree = {}
        for node in spec.get("tree") or []:
            prefix = tuple(node.get("prefix", []))
            tree[prefix] = [(str(t), float(p)) for t, p in node["tokens"]]
        return ScriptedOracle(tree)
    raise ConfigError(f"backend {role!r}: unknown kind {kind!r}")


def parse_config(data: dict) -> PipelineConfig:
    if not isinstance(data, dict) or "backends" not in data:
        raise ConfigError("config must be a mapping with a 'backends' section")
    raw = data["backends"]
    default_spec = raw.get("specialist_default")
    backends: dict[str, Backend] = {}
    for role in SUPPORT_ROLES:
        spec = raw.get(role)
        if spec is None:
            raise ConfigError(f"missing backend for role {role!r}")
        backends[role] = _build_backend(role, spec)
    for kind in AgentKind:
        spec = raw.get(kind.label, default_spec)
        if spec is None:
            raise ConfigError(f"missing backend for specialist {kind.label!r}")
        backends[kind.label] = _build_backend(kind.label, spec)
    decode = DecodeConfig(**data.get("decode", {}))
    mask = MaskConfig(**data.get("mask", {}))
    return PipelineConfig(
        backends=backends,
        decode=decode,
        mask=mask,
        stress_turns=int(data.get("stress_turns", 2)),
        debate_turns=int(data.get("debate_turns", 3)),
    )


def load_config(path: str | Path) -> PipelineConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    return parse_config(data)
