"""Chat-completion clients: a live HTTP client and deterministic mocks.

The simulator only ever talks to a `ModelClient`.  Mocks are scripted
policies over the message history so the whole test suite runs without
network access; the live client speaks a chat-completions-style endpoint
with the auth token pulled from an environment variable (never logged).
"""

from __future__ import annotations

import json
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field


class TransportError(RuntimeError):
    """Network-level failure talking to the model endpoint."""


class ModelTimeout(TransportError):
    """The model endpoint did not answer within the configured timeout."""


Message = dict  # {"role": "system"|"user"|"assistant", "content": str}


class ModelClient:
    kind = "abstract"

    def complete(self, messages: list[Message]) -> str:
        raise NotImplementedError


class MockClient(ModelClient):
    """Deterministic client driven by a policy callable."""

    kind = "mock"

    def __init__(self, policy):
        self._policy = policy
        self.calls = 0

    def complete(self, messages: list[Message]) -> str:
        reply = self._policy(messages, self.calls)
        self.calls += 1
        return reply


@dataclass
class SequencePolicy:
    """Reply with scripted responses in order; empty string when exhausted."""

    responses: list[str]
    repeat_last: bool = False
    _served: int = field(default=0, init=False)

    def __call__(self, messages: list[Message], call_index: int) -> str:
        if self._served < len(self.responses):
            reply = self.responses[self._served]
            self._served += 1
            return reply
        if self.repeat_last and self.responses:
            return self.responses[-1]
        return ""


@dataclass
class Rule:
    respond: str
    if_contains: tuple[str, ...] = ()
    once: bool = False
    spent: bool = field(default=False, init=False)


class RuleTablePolicy:
    """Ordered (predicate -> response) rules over the latest user prompt."""

    def __init__(self, rules: list[Rule], default: str = ""):
        self.rules = rules
        self.default = default

    def __call__(self, messages: list[Message], call_index: int) -> str:
        prompt = _last_user_content(messages)
        for rule in self.rules:
            if rule.spent:
                continue
            if all(frag in prompt for frag in rule.if_contains):
                if rule.once:
                    rule.spent = True
                return rule.respond
        return self.default


_CORRECTION_RE = re.compile(
    r"The final action executed by the robot was: ([A-Za-z-]+) '([^']+)'"
)
_CORRECTION_MARK = "corrected the robot's action by pushing it to:"

_STATE_CORE_PREFIXES = (
    "The robot is currently holding",
    "The human is holding",
    "The robot is approaching",
    "The human is approaching",
    "The available actions are",
)


def state_core(prompt: str) -> str:
    """The state-describing lines of a user prompt, correction/result dropped."""
    kept = [
        line.strip()
        for line in prompt.splitlines()
        if line.strip().startswith(_STATE_CORE_PREFIXES)
    ]
    return "\n".join(kept)


class RecallPolicy:
    """Answer from remembered corrections when the same state reappears.

    Scans prior user prompts for one with an identical state core whose
    following prompt announces a human correction, and replies with that
    corrected action.  `window` limits how far back it looks (None means
    unlimited, i.e. perfect recall).
    """

    def __init__(self, default: str, window: int | None = None):
        self.default = default
        self.window = window

    def __call__(self, messages: list[Message], call_index: int) -> str:
        prompts = [m["content"] for m in messages if m["role"] == "user"]
        if not prompts:
            return self.default
        current = prompts[-1]
        core = state_core(current)
        last = len(prompts) - 1
        lo = 0 if self.window is None else max(0, last - self.window)
        for j in range(last - 1, lo - 1, -1):
            if state_core(prompts[j]) != core:
                continue
            follower = prompts[j + 1]
            if _CORRECTION_MARK not in follower:
                continue
            m = _CORRECTION_RE.search(follower)
            if m:
                return f"# {m.group(1)} ; {m.group(2)} &"
        return self.default


@dataclass
class LiveClientConfig:
    endpoint: str
    model: str
    token_env: str = "NUDGESIM_API_TOKEN"
    timeout: float = 30.0
    temperature: float = 0.0


class LiveClient(ModelClient):
    """Chat-completions HTTP client (OpenAI-style request/response shape)."""

    kind = "live"

    def __init__(self, cfg: LiveClientConfig):
        self.cfg = cfg

    def complete(self, messages: list[Message]) -> str:
        token = os.environ.get(self.cfg.token_env, "")
        payload = json.dumps(
            {
                "model": self.cfg.model,
                "messages": messages,
                "temperature": self.cfg.temperature,
            }
        ).encode()
        req = urllib.request.Request(
            self.cfg.endpoint,
            data=payload,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {token}",
            },
        )
        try:
            with urllib.request.urlopen(req, timeout=self.cfg.timeout) as resp:
                body = json.loads(resp.read().decode())
        except TimeoutError as exc:
            raise ModelTimeout(str(exc)) from exc
        except urllib.error.URLError as exc:
            if isinstance(getattr(exc, "reason", None), TimeoutError):
                raise ModelTimeout(str(exc)) from exc
            raise TransportError(str(exc)) from exc
        except OSError as exc:
            raise TransportError(str(exc)) from exc
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion response: {exc}") from exc


def _last_user_content(messages: list[Message]) -> str:
    for m in reversed(messages):
        if m["role"] == "user":
            return m["content"]
    return ""


def policy_from_spec(spec: dict):
    """Build a mock policy from a structured description (scenario files)."""
    kind = spec.get("kind", "sequence")
    if kind == "sequence":
        return SequencePolicy(list(spec.get("responses", [])), bool(spec.get("repeat_last", False)))
    if kind == "rules":
        rules = [
            Rule(
                respond=r["respond"],
                if_contains=tuple(r.get("if_contains", [])),
                once=bool(r.get("once", False)),
            )
            for r in spec.get("rules", [])
        ]
        return RuleTablePolicy(rules, spec.get("default", ""))
    if kind == "recall":
        window = spec.get("window")
        return RecallPolicy(spec.get("default", ""), window)
    raise ValueError(f"unknown mock policy kind {kind!r}")


def client_from_spec(spec: dict) -> ModelClient:
    """Build a client from a scenario's `llm` section."""
    kind = spec.get("kind", "mock")
    if kind == "mock":
        policy_spec = spec.get("policy", {"kind": "sequence", "responses": []})
        if isinstance(policy_spec, str):
            with open(policy_spec, encoding="utf-8") as fh:
                policy_spec = json.load(fh)
        return MockClient(policy_from_spec(policy_spec))
    if kind == "live":
        return LiveClient(
            LiveClientConfig(
                endpoint=spec["endpoint"],
                model=spec["model"],
                token_env=spec.get("token_env", "NUDGESIM_API_TOKEN"),
                timeout=float(spec.get("timeout", 30.0)),
            )
        )
    raise ValueError(f"unknown client kind {kind!r}")
