"""Chat-completion gateway with a scripted backend and an HTTP backend.

Script files are JSON lists of ``{"role", "match", "response"}`` objects. An
entry fires when the calling agent has that role and ``match`` occurs as a
literal substring of the latest history entry. Two entries for the same role
whose patterns contain one another could both fire on one message, so such
pairs are rejected at load time.
"""

from __future__ import annotations

import json
import logging
import os
import socket
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .errors import (
    AmbiguousTrigger,
    MalformedResponse,
    NoScriptMatch,
    NonSuccessStatus,
    ParseError,
    TransportError,
)
from .tools import ToolSchema

logger = logging.getLogger(__name__)

AGENT_ROLES = ("Manager", "Planner", "Writer", "Executor")
API_KEY_ENV = "LLM_API_KEY"


@dataclass(frozen=True)
class ChatContext:
    agent: str
    system_prompt: str
    history: tuple[tuple[str, str], ...]
    available_tools: tuple[ToolSchema, ...] = ()

    @property
    def latest(self) -> str:
        return self.history[-1][1]


class Backend(Protocol):
    def complete(self, ctx: ChatContext) -> str: ...


def complete(backend: Backend, ctx: ChatContext) -> str:
    if not ctx.history:
        raise ValueError("chat context has no history")
    return backend.complete(ctx)


# --- scripted backend -------------------------------------------------------------

@dataclass(frozen=True)
class ScriptEntry:
    role: str
    match: str
    response: str
    line: int = 0

    def fires(self, role: str, message: str) -> bool:
        return role == self.role and self.match in message


def _iter_array(document: str):
    """Yield (line, element) for a top-level JSON array, keeping source lines."""
    decoder = json.JSONDecoder()
    pos = 0

    def skip_ws(i):
        while i < len(document) and document[i] in " \t\r\n":
            i += 1
        return i

    def line_of(i):
        return document.count("\n", 0, i) + 1

    pos = skip_ws(pos)
    if pos == len(document):
        return
    if document[pos] != "[":
        raise ParseError("script must be a JSON list", line_of(pos))
    pos = skip_ws(pos + 1)
    if pos < len(document) and document[pos] == "]":
        pos += 1
    else:
        while True:
            try:
                value, end = decoder.raw_decode(document, pos)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, exc.lineno) from None
            yield line_of(pos), value
            pos = skip_ws(end)
            if pos < len(document) and document[pos] == ",":
                pos = skip_ws(pos + 1)
                continue
            if pos < len(document) and document[pos] == "]":
                pos += 1
                break
            raise ParseError("expected ',' or ']'", line_of(pos))
    if skip_ws(pos) != len(document):
        raise ParseError("trailing data after script list", line_of(pos))


def load_script(document: str) -> list[ScriptEntry]:
    entries: list[ScriptEntry] = []
    for line, obj in _iter_array(document):
        if not isinstance(obj, dict):
            raise ParseError("script entry must be an object", line)
        missing = [k for k in ("role", "match", "response") if not isinstance(obj.get(k), str)]
        if missing:
            raise ParseError(f"script entry needs string field(s): {', '.join(missing)}", line)
        if obj["role"] not in AGENT_ROLES:
            raise ParseError(f"unknown role {obj['role']!r}", line)
        entries.append(ScriptEntry(obj["role"], obj["match"], obj["response"], line))
    for i, a in enumerate(entries):
        for b in entries[i + 1:]:
            if a.role == b.role and (a.match in b.match or b.match in a.match):
                raise AmbiguousTrigger(
                    f"entries at lines {a.line} and {b.line} ({a.role}: {a.match!r} / {b.match!r}) "
                    "can match the same message")
    return entries


@dataclass
class ScriptedBackend:
    entries: Sequence[ScriptEntry] = ()

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        with open(path, encoding="utf-8") as fh:
            return cls(load_script(fh.read()))

    def complete(self, ctx: ChatContext) -> str:
        latest = ctx.latest
        hits = [e for e in self.entries if e.fires(ctx.agent, latest)]
        if not hits:
            raise NoScriptMatch(f"no {ctx.agent} entry matches {latest[:80]!r}")
        if len(hits) > 1:
            raise AmbiguousTrigger(f"{len(hits)} {ctx.agent} entries match {latest[:80]!r}")
        return hits[0].response


# --- HTTP backend ------------------------------------------------------------------

def build_request_body(model: str, ctx: ChatContext, temperature: float = 0.0) -> dict:
    messages = [{"role": "system", "content": ctx.system_prompt}]
    for label, content in ctx.history:
        if label == ctx.agent:
            messages.append({"role": "assistant", "content": content})
        else:
            messages.append({"role": "user", "content": f"{label}: {content}"})
    body = {"model": model, "messages": messages, "temperature": temperature}
    if ctx.available_tools:
        body["tools"] = [t.to_function_schema() for t in ctx.available_tools]
    return body


def _render_tool_calls(calls, tools: Sequence[ToolSchema]) -> str:
    """Turn function-calling output into an action block."""
    order = {t.name: [p.name for p in t.params] for t in tools}
    lines = []
    for call in calls:
        fn = call["function"]
        raw_args = fn.get("arguments") or "{}"
        args = json.loads(raw_args) if isinstance(raw_args, str) else raw_args
        if not isinstance(args, dict):
            raise MalformedResponse("tool call arguments must be an object")
        names = order.get(fn["name"], list(args))
        rendered = [json.dumps(args[n]) for n in names if n in args]
        lines.append(f"{fn['name']}({', '.join(rendered)})")
    return "```action\n" + "\n".join(lines) + "\n```"


def parse_response(payload: bytes, tools: Sequence[ToolSchema] = ()) -> str:
    try:
        doc = json.loads(payload)
        message = doc["choices"][0]["message"]
        content = message.get("content")
        if content is None and message.get("tool_calls"):
            return _render_tool_calls(message["tool_calls"], tools)
    except (ValueError, KeyError, IndexError, TypeError, AttributeError) as exc:
        raise MalformedResponse(f"unexpected completion payload: {exc}") from None
    if not isinstance(content, str):
        raise MalformedResponse("choices[0].message.content is not a string")
    return content


@dataclass
class HttpBackend:
    """Chat-completions client: POST ``endpoint`` with a bearer token from ``LLM_API_KEY``."""

    endpoint: str
    model: str
    temperature: float = 0.0
    timeout: float = 60.0
    api_key_env: str = API_KEY_ENV
    extra_headers: dict = field(default_factory=dict)

    def complete(self, ctx: ChatContext) -> str:
        body = json.dumps(build_request_body(self.model, ctx, self.temperature)).encode()
        headers = {"Content-Type": "application/json", **self.extra_headers}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        req = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = resp.read()
        except urllib.error.HTTPError as exc:
            raise NonSuccessStatus(exc.code, exc.read().decode("utf-8", "replace")) from None
        except (urllib.error.URLError, socket.timeout, ConnectionError) as exc:
            raise TransportError(f"{self.endpoint}: {exc}") from None
        return parse_response(payload, ctx.available_tools)
