"""Tool registry, function-calling schemas and the action-script language.

Writers emit action scripts; executors run them. A script is a newline
separated list of tool calls::

    [binding =] tool(arg, ...)

Arguments are double-quoted string literals (JSON escapes), bare numbers, or
bare identifiers naming a binding made by an earlier line (or an earlier
script in the same chat, when the executor passes its environment). Blank
lines and lines starting with ``#`` are ignored. There are no keyword
arguments, conditionals or loops.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from .errors import (
    ArityMismatch,
    DuplicateTool,
    OrchestrationError,
    ScriptSyntaxError,
    TypeMismatch,
    UndefinedBinding,
    UnknownTool,
)

logger = logging.getLogger(__name__)

SEMANTIC_TYPES = ("string", "number", "integer", "path-descriptor")

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_LINE_RE = re.compile(rf"^\s*(?:(?P<bind>{_IDENT})\s*=\s*)?(?P<tool>{_IDENT})\s*\((?P<args>.*)\)\s*$")
_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<string>"(?:[^"\\]|\\.)*")
      | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<comma>,)
    )""",
    re.VERBOSE,
)
_FENCE_RE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class Param:
    name: str
    type: str
    required: bool = True

    def __post_init__(self):
        if self.type not in SEMANTIC_TYPES:
            raise ValueError(f"unknown semantic type {self.type!r} for parameter {self.name!r}")


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    params: tuple[Param, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if not re.fullmatch(_IDENT, self.name):
            raise ValueError(f"tool name {self.name!r} is not an identifier")
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in tool {self.name!r}")
        seen_optional = False
        for p in self.params:
            if not p.required:
                seen_optional = True
            elif seen_optional:
                raise ValueError(f"required parameter {p.name!r} follows an optional one in {self.name!r}")

    @property
    def min_arity(self) -> int:
        return sum(1 for p in self.params if p.required)

    def to_function_schema(self) -> dict:
        """Serialize in the chat-completions ``tools`` format."""
        properties = {}
        for p in self.params:
            if p.type == "path-descriptor":
                properties[p.name] = {"type": "string", "format": "path-descriptor"}
            else:
                properties[p.name] = {"type": p.type}
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": properties,
                    "required": [p.name for p in self.params if p.required],
                },
            },
        }

    @classmethod
    def from_function_schema(cls, doc: Mapping) -> "ToolSchema":
        fn = doc["function"]
        parameters = fn.get("parameters", {})
        required = set(parameters.get("required", []))
        params = []
        for name, prop in parameters.get("properties", {}).items():
            sem = "path-descriptor" if prop.get("format") == "path-descriptor" else prop["type"]
            params.append(Param(name, sem, name in required))
        return cls(fn["name"], fn.get("description", ""), tuple(params))


@dataclass(frozen=True)
class Ref:
    """Reference to a binding inside an action script."""

    name: str


@dataclass(frozen=True)
class ScriptStep:
    tool: str
    args: tuple[tuple[str, Any], ...]
    binding: str | None = None
    line: int = 0

    @property
    def arg_map(self) -> dict[str, Any]:
        return dict(self.args)

    def to_text(self) -> str:
        rendered = []
        for _, value in self.args:
            if isinstance(value, Ref):
                rendered.append(value.name)
            elif isinstance(value, str):
                rendered.append(json.dumps(value))
            else:
                rendered.append(repr(value))
        call = f"{self.tool}({', '.join(rendered)})"
        return f"{self.binding} = {call}" if self.binding else call


@dataclass(frozen=True)
class ActionScript:
    steps: tuple[ScriptStep, ...] = ()

    def __len__(self):
        return len(self.steps)

    def to_text(self) -> str:
        return "\n".join(step.to_text() for step in self.steps)


@dataclass
class StepResult:
    step_index: int
    status: str
    value: Any = None
    error_kind: str | None = None
    raw: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.status not in ("ok", "error"):
            raise ValueError(f"bad status {self.status!r}")
        if (self.status == "error") != (self.error_kind is not None):
            raise ValueError("error_kind must be set exactly when status is 'error'")

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        return {"step": self.step_index, "status": self.status,
                "value": self.value, "error_kind": self.error_kind}

    @classmethod
    def from_dict(cls, d: Mapping) -> "StepResult":
        return cls(d["step"], d["status"], d.get("value"), d.get("error_kind"))


@dataclass
class _Tool:
    schema: ToolSchema
    handler: Callable[..., Any]


@dataclass
class ToolRegistry:
    """Name -> (schema, handler). Populate once, then treat as read-only."""

    _tools: dict[str, _Tool] = field(default_factory=dict)

    def register(self, schema: ToolSchema, handler: Callable[..., Any]) -> "ToolRegistry":
        if schema.name in self._tools:
            raise DuplicateTool(f"tool {schema.name!r} is already registered")
        self._tools[schema.name] = _Tool(schema, handler)
        return self

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def schema(self, name: str) -> ToolSchema:
        try:
            return self._tools[name].schema
        except KeyError:
            raise UnknownTool(f"unknown tool {name!r}") from None

    def handler(self, name: str) -> Callable[..., Any]:
        try:
            return self._tools[name].handler
        except KeyError:
            raise UnknownTool(f"unknown tool {name!r}") from None

    def schemas(self) -> list[ToolSchema]:
        return [t.schema for t in self._tools.values()]

    def names(self) -> list[str]:
        return list(self._tools)

    def function_schemas(self) -> list[dict]:
        return [s.to_function_schema() for s in self.schemas()]

    def describe(self) -> str:
        lines = []
        for s in self.schemas():
            sig = ", ".join(p.name if p.required else f"[{p.name}]" for p in s.params)
            lines.append(f"- {s.name}({sig}): {s.description}")
        return "\n".join(lines)


def register_tool(registry: ToolRegistry, schema: ToolSchema, handler: Callable[..., Any]) -> ToolRegistry:
    return registry.register(schema, handler)


# --- parsing -------------------------------------------------------------------

def extract_action_block(content: str) -> str | None:
    """Return the body of the first fenced block in ``content``, if any."""
    m = _FENCE_RE.search(content)
    return m.group(1) if m else None


def _tokenize_args(text: str, lineno: int) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise ScriptSyntaxError(f"unexpected input at {text[pos:pos + 20]!r}", lineno)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
        pos = m.end()
    return tokens


def _split_args(tokens: list[tuple[str, str]], lineno: int) -> list[tuple[str, str]]:
    if not tokens:
        return []
    args = []
    expect_value = True
    for kind, text in tokens:
        if expect_value:
            if kind == "comma":
                raise ScriptSyntaxError("missing argument before ','", lineno)
            args.append((kind, text))
        elif kind != "comma":
            raise ScriptSyntaxError(f"expected ',' before {text!r}", lineno)
        expect_value = not expect_value
    if expect_value:
        raise ScriptSyntaxError("trailing ','", lineno)
    return args


def _literal(kind: str, text: str, param: Param, tool: str, lineno: int) -> Any:
    if kind == "string":
        value = json.loads(text)
        if param.type in ("string", "path-descriptor"):
            return value
        raise TypeMismatch(f"line {lineno}: {tool}.{param.name} expects {param.type}, got string")
    # number token
    if param.type == "integer":
        if re.fullmatch(r"[+-]?\d+", text):
            return int(text)
        raise TypeMismatch(f"line {lineno}: {tool}.{param.name} expects integer, got {text}")
    if param.type == "number":
        value = float(text)
        if not math.isfinite(value):
            raise TypeMismatch(f"line {lineno}: {tool}.{param.name} must be finite")
        return value
    raise TypeMismatch(f"line {lineno}: {tool}.{param.name} expects {param.type}, got number")


def parse_action_script(text: str, registry: ToolRegistry, known: Iterable[str] = ()) -> ActionScript:
    """Parse action-script text against ``registry``.

    ``known`` names bindings that already exist in the executor's environment.
    Raises ScriptSyntaxError, UnknownTool, ArityMismatch, UndefinedBinding or
    TypeMismatch.
    """
    defined = set(known)
    steps = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE_RE.match(line)
        if not m:
            raise ScriptSyntaxError(f"expected '[name =] tool(args)', got {line!r}", lineno)
        tool = m.group("tool")
        if tool not in registry:
            raise UnknownTool(f"line {lineno}: unknown tool {tool!r}")
        schema = registry.schema(tool)
        raw_args = _split_args(_tokenize_args(m.group("args"), lineno), lineno)
        if not schema.min_arity <= len(raw_args) <= len(schema.params):
            want = (str(schema.min_arity) if schema.min_arity == len(schema.params)
                    else f"{schema.min_arity}-{len(schema.params)}")
            raise ArityMismatch(f"line {lineno}: {tool} takes {want} argument(s), got {len(raw_args)}")
        args = []
        for param, (kind, tok) in zip(schema.params, raw_args):
            if kind == "ident":
                if tok not in defined:
                    raise UndefinedBinding(f"line {lineno}: {tok!r} is not bound")
                args.append((param.name, Ref(tok)))
            else:
                args.append((param.name, _literal(kind, tok, param, tool, lineno)))
        binding = m.group("bind")
        steps.append(ScriptStep(tool, tuple(args), binding, lineno))
        if binding:
            defined.add(binding)
    return ActionScript(tuple(steps))


# --- execution -------------------------------------------------------------------

def _coerce(value: Any, param: Param, tool: str) -> Any:
    """Check a resolved binding value against the parameter's semantic type."""
    t = param.type
    if t == "string" and isinstance(value, str):
        return value
    if t == "integer" and isinstance(value, int) and not isinstance(value, bool):
        return value
    if t == "number" and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if t == "path-descriptor" and (isinstance(value, str) or getattr(value, "is_path", False)):
        return value
    raise TypeMismatch(f"{tool}.{param.name} expects {t}, got {type(value).__name__}")


def to_payload(value: Any) -> Any:
    """JSON-friendly form of a handler return value."""
    if hasattr(value, "to_payload"):
        return value.to_payload()
    if isinstance(value, float):
        return round(value, 6)
    if isinstance(value, (list, tuple)):
        return [to_payload(v) for v in value]
    if isinstance(value, dict):
        return {str(k): to_payload(v) for k, v in value.items()}
    return value


def run_action_script(script: ActionScript, registry: ToolRegistry,
                      env: dict[str, Any] | None = None) -> list[StepResult]:
    """Run ``script`` step by step, halting after the first failing step.

    Bindings are written into ``env`` (a fresh dict when omitted) so that an
    executor can carry them across scripts.
    """
    env = {} if env is None else env
    results = []
    for i, step in enumerate(script.steps):
        try:
            schema = registry.schema(step.tool)
            params = {p.name: p for p in schema.params}
            kwargs = {}
            for name, value in step.args:
                if isinstance(value, Ref):
                    if value.name not in env:
                        raise UndefinedBinding(f"{value.name!r} is not bound")
                    value = _coerce(env[value.name], params[name], step.tool)
                kwargs[name] = value
            out = registry.handler(step.tool)(**kwargs)
        except OrchestrationError as exc:
            results.append(StepResult(i, "error", str(exc), exc.kind))
            break
        except Exception as exc:  # noqa: BLE001 - a crashing handler is still a step failure
            logger.exception("tool %s crashed", step.tool)
            results.append(StepResult(i, "error", str(exc), type(exc).__name__))
            break
        if step.binding:
            env[step.binding] = out
        results.append(StepResult(i, "ok", to_payload(out), raw=out))
    return results


def describe_value(value: Any) -> str:
    """Short human-readable rendering used in executor messages."""
    if hasattr(value, "describe"):
        return value.describe()
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(describe_value(v) for v in value) + "]"
    if isinstance(value, dict):
        return json.dumps(to_payload(value), sort_keys=True)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)
