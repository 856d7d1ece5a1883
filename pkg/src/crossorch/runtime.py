"""Agents, the group-chat turn loop and the manager's speaker policy.

A group holds four agents. The manager never speaks except to end a chat
abnormally; it only picks the next speaker. With a scripted backend the pick
follows a fixed table (see ``select_next_agent``); with an LLM manager the
backend names the next role.

Writers are steered by a directive appended to their context, e.g.
``[otn] Step 2 of 5: ...``. Directives are not transcript messages.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Sequence

from .errors import (
    ActionScriptError,
    OrchestrationError,
    ParseError,
    UnknownRole,
    UnparseablePlan,
)
from .llm import Backend, ChatContext, complete
from .tools import (
    ActionScript,
    StepResult,
    ToolRegistry,
    describe_value,
    extract_action_block,
    parse_action_script,
    run_action_script,
)

logger = logging.getLogger(__name__)

TERMINATE = "TERMINATE"
DEFAULT_MAX_TURNS = 40
DEFAULT_RETRY_BUDGET = 2

# terminal error kinds written by the manager
TURN_LIMIT = "TurnLimit"
RETRY_EXHAUSTED = "RetryExhausted"
BACKEND_FAILURE = "BackendFailure"


class Role(str, Enum):
    ADMIN = "Admin"
    MANAGER = "Manager"
    PLANNER = "Planner"
    WRITER = "Writer"
    EXECUTOR = "Executor"


AGENT_ROLES = (Role.MANAGER, Role.PLANNER, Role.WRITER, Role.EXECUTOR)

# Every consecutive (sender, sender) pair the scripted policy can produce.
# Executor -> Planner only occurs for a request forwarded by another group's executor.
POLICY_TRANSITIONS = frozenset({
    (Role.ADMIN, Role.PLANNER),
    (Role.EXECUTOR, Role.PLANNER),
    (Role.PLANNER, Role.WRITER),
    (Role.WRITER, Role.EXECUTOR),
    (Role.EXECUTOR, Role.WRITER),
}) | {(r, Role.MANAGER) for r in Role if r is not Role.MANAGER}

PROMPTS = {
    Role.MANAGER: (
        "You manage a chat group of a Planner, a Writer and an Executor. "
        "Given the conversation, name the agent that should speak next."),
    Role.PLANNER: (
        "You are the Planner. Split the request into numbered steps, one per line, "
        "formatted as 'N. description'. Every step is carried out by the Writer and the Executor.\n"
        "Available tools:\n{tools}"),
    Role.WRITER: (
        "You are the Writer. Carry out the current step. To call tools, reply with a fenced block\n"
        "```action\n[name =] tool(arg, ...)\n```\n"
        "using double-quoted strings, bare numbers and names bound by earlier calls. "
        "For pure reasoning steps answer in plain text. When all steps are done, summarize and "
        "end with TERMINATE.\nAvailable tools:\n{tools}"),
}


@dataclass
class Message:
    turn_index: int
    group_id: str
    sender: Role
    content: str
    action_script: ActionScript | None = None
    tool_results: list[StepResult] | None = None
    is_terminal: bool = False
    error_kind: str | None = None
    origin: str | None = None
    chat: int = 1
    # action text of a message loaded from disk, where no registry is at hand to re-parse it
    action_text: str | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.action_script is not None and self.sender is not Role.WRITER:
            raise ValueError("only writers attach action scripts")
        if self.tool_results is not None and self.sender is not Role.EXECUTOR:
            raise ValueError("only executors attach tool results")

    @property
    def failed(self) -> bool:
        return self.sender is Role.EXECUTOR and self.error_kind is not None

    def to_dict(self) -> dict:
        return {
            "group": self.group_id,
            "chat": self.chat,
            "turn": self.turn_index,
            "sender": self.sender.value,
            "origin": self.origin,
            "content": self.content,
            "action": self.action_script.to_text() if self.action_script is not None else self.action_text,
            "tool_results": ([r.to_dict() for r in self.tool_results]
                             if self.tool_results is not None else None),
            "terminal": self.is_terminal,
            "error_kind": self.error_kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Message":
        results = d.get("tool_results")
        return cls(
            turn_index=d["turn"], group_id=d["group"], sender=Role(d["sender"]),
            content=d["content"],
            tool_results=[StepResult.from_dict(r) for r in results] if results is not None else None,
            is_terminal=d.get("terminal", False), error_kind=d.get("error_kind"),
            origin=d.get("origin"), chat=d.get("chat", 1), action_text=d.get("action"),
        )


Transcript = list[Message]


def transcript_to_jsonl(messages: Iterable[Message]) -> str:
    return "".join(json.dumps(m.to_dict()) + "\n" for m in messages)


def load_transcript(text: str) -> Transcript:
    if not text.strip():
        raise ParseError("transcript is empty")
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(Message.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"bad transcript record: {exc}", lineno) from None
    return out


# --- plans ---------------------------------------------------------------------

@dataclass(frozen=True)
class PlanStep:
    number: int
    description: str
    role: Role = Role.WRITER


@dataclass
class Plan:
    steps: list[PlanStep]
    cursor: int = 0
    text: str = ""

    def __len__(self):
        return len(self.steps)

    @property
    def complete(self) -> bool:
        return self.cursor >= len(self.steps)

    @property
    def current(self) -> PlanStep | None:
        return None if self.complete else self.steps[self.cursor]

    def advance(self) -> None:
        if not self.complete:
            self.cursor += 1


_STEP_RE = re.compile(r"^\s*(\d+)\.\s+(\S.*?)\s*$")


def parse_plan(text: str) -> Plan:
    """Numbered lines ``N. text`` become steps; other lines are commentary.

    The numbers must run 1..N without gaps.
    """
    steps = []
    for line in text.splitlines():
        m = _STEP_RE.match(line)
        if m:
            steps.append(PlanStep(int(m.group(1)), m.group(2)))
    if not steps:
        raise UnparseablePlan("no numbered steps in planner output")
    numbers = [s.number for s in steps]
    if numbers != list(range(1, len(steps) + 1)):
        raise UnparseablePlan(f"step numbers {numbers} are not 1..{len(steps)}")
    return Plan(steps, 0, text)


# --- agents ---------------------------------------------------------------------

def _history(messages: Sequence[Message]) -> tuple[tuple[str, str], ...]:
    return tuple((m.sender.value, m.content) for m in messages)


class ManagerAgent:
    """Chooses speakers. ``backend=None`` means the deterministic policy."""

    role = Role.MANAGER

    def __init__(self, backend: Backend | None = None):
        self.backend = backend

    def select_next_agent(self, history: Sequence[Message], plan: Plan | None,
                          bound: Iterable[Role] = AGENT_ROLES) -> Role:
        if self.backend is None:
            return select_next_agent(history, plan)
        names = ", ".join(r.value for r in (Role.PLANNER, Role.WRITER, Role.EXECUTOR))
        ctx = ChatContext(
            Role.MANAGER.value, PROMPTS[Role.MANAGER],
            _history(history) + (("Instruction", f"Who speaks next? Answer with one of: {names}."),))
        return parse_role(complete(self.backend, ctx), bound)


def parse_role(text: str, bound: Iterable[Role]) -> Role:
    speakers = set(bound) & {Role.PLANNER, Role.WRITER, Role.EXECUTOR}
    m = re.search(r"\b(Admin|Manager|Planner|Writer|Executor)\b", text)
    if m is None:
        raise UnknownRole(f"no role named in {text[:80]!r}")
    role = Role(m.group(1))
    if role not in speakers:
        raise UnknownRole(f"{role.value} is not a speaking agent of this group")
    return role


def select_next_agent(history: Sequence[Message], plan: Plan | None = None) -> Role:
    """Deterministic speaker policy.

    request -> Planner; Planner -> Writer; Writer -> Executor;
    Executor (success, error or plan complete) -> Writer.
    """
    if not history:
        raise ValueError("history is empty")
    last = history[-1]
    if last.is_terminal:
        raise ValueError("the chat has already terminated")
    if len(history) == 1:
        return Role.PLANNER
    if last.sender is Role.PLANNER:
        return Role.WRITER
    if last.sender is Role.WRITER:
        return Role.EXECUTOR
    if last.sender is Role.EXECUTOR:
        return Role.WRITER
    raise ValueError(f"no policy entry after a {last.sender.value} message")


class PlannerAgent:
    role = Role.PLANNER

    def __init__(self, backend: Backend, tools: str = ""):
        self.backend = backend
        self.system_prompt = PROMPTS[Role.PLANNER].format(tools=tools or "(none)")

    def make_plan(self, request: str, domain_context: str = "",
                  history: Sequence[Message] = ()) -> Plan:
        if not request.strip():
            raise ValueError("request is empty")
        prompt = self.system_prompt + (f"\n{domain_context}" if domain_context else "")
        hist = _history(history) or ((Role.ADMIN.value, request),)
        return parse_plan(complete(self.backend, ChatContext(Role.PLANNER.value, prompt, hist)))


class WriterAgent:
    role = Role.WRITER

    def __init__(self, backend: Backend, registry: ToolRegistry):
        self.backend = backend
        self.registry = registry
        self.system_prompt = PROMPTS[Role.WRITER].format(tools=registry.describe() or "(none)")

    def compose_action(self, step: PlanStep | None, context: Sequence[Message],
                       directive: str | None = None, known: Iterable[str] = ()) -> Message:
        """Ask the backend for the step's action.

        Raises ActionScriptError (with ``content`` set to the raw reply) when
        the reply holds an action block that does not parse.
        """
        if directive is None:
            directive = f"Step {step.number}: {step.description}" if step else "Continue."
        ctx = ChatContext(Role.WRITER.value, self.system_prompt,
                          _history(context) + (("Manager", directive),),
                          tuple(self.registry.schemas()))
        text = complete(self.backend, ctx)
        group = context[-1].group_id if context else ""
        block = extract_action_block(text)
        script = None
        if block is not None:
            try:
                script = parse_action_script(block, self.registry, known)
            except ActionScriptError as exc:
                exc.content = text
                raise
        return Message(len(context), group, Role.WRITER, text, action_script=script)


class ExecutorAgent:
    """Runs writer action blocks. Bindings persist for the rest of the chat."""

    role = Role.EXECUTOR

    def __init__(self, registry: ToolRegistry):
        self.registry = registry
        self.env: dict[str, Any] = {}

    def reset(self) -> None:
        self.env = {}

    def execute_message(self, msg: Message, turn_index: int | None = None) -> Message:
        if msg.sender is not Role.WRITER:
            raise ValueError("the executor only runs writer messages")
        turn = msg.turn_index + 1 if turn_index is None else turn_index
        block = extract_action_block(msg.content)
        if block is None:
            return Message(turn, msg.group_id, Role.EXECUTOR,
                           "exitcode: 0 (no action block; nothing to execute)",
                           tool_results=[], chat=msg.chat)
        script = None
        try:
            script = parse_action_script(block, self.registry, self.env.keys())
        except ActionScriptError as exc:
            results = [StepResult(0, "error", str(exc), exc.kind)]
        else:
            results = run_action_script(script, self.registry, self.env)
        error = next((r for r in results if not r.ok), None)
        lines = [f"exitcode: {1 if error else 0} ({'execution failed' if error else 'execution succeeded'})"]
        for r in results:
            call = script.steps[r.step_index].to_text() if script is not None else "parse"
            detail = describe_value(r.raw) if r.ok else f"{r.error_kind}: {r.value}"
            lines.append(f"[{r.step_index}] {call} -> {detail}")
        return Message(turn, msg.group_id, Role.EXECUTOR, "\n".join(lines), tool_results=results,
                       error_kind=error.error_kind if error else None, chat=msg.chat)


# --- group chat -------------------------------------------------------------------

@dataclass
class GroupChat:
    group_id: str
    agents: dict[Role, Any]
    max_turns: int = DEFAULT_MAX_TURNS
    retry_budget: int = DEFAULT_RETRY_BUDGET
    transcript: Transcript = field(default_factory=list)
    plan: Plan | None = None
    domain_context: str = ""
    on_message: Callable[[Message], None] | None = None
    chats_run: int = 0

    def __post_init__(self):
        if self.max_turns < 1 or self.retry_budget < 1:
            raise ValueError("max_turns and retry_budget must be positive")


def build_group(group_id: str, backend: Backend, registry: ToolRegistry, *,
                max_turns: int = DEFAULT_MAX_TURNS, retry_budget: int = DEFAULT_RETRY_BUDGET,
                llm_manager: bool = False, domain_context: str = "",
                on_message: Callable[[Message], None] | None = None) -> GroupChat:
    tools = registry.describe()
    agents = {
        Role.MANAGER: ManagerAgent(backend if llm_manager else None),
        Role.PLANNER: PlannerAgent(backend, tools),
        Role.WRITER: WriterAgent(backend, registry),
        Role.EXECUTOR: ExecutorAgent(registry),
    }
    return GroupChat(group_id, agents, max_turns, retry_budget,
                     domain_context=domain_context, on_message=on_message)


def writer_directive(group_id: str, plan: Plan | None, last: Message) -> str:
    tag = f"[{group_id}]"
    if plan is None:
        return f"{tag} No plan is available; respond to the request directly."
    n = len(plan)
    if last.failed and not plan.complete:
        detail = last.tool_results[-1].value if last.tool_results else ""
        return (f"{tag} Step {plan.cursor + 1} of {n} failed ({last.error_kind}): {detail} "
                "Fix the action and try again.")
    if plan.complete:
        return f"{tag} All {n} steps completed. Summarize the results and finish with {TERMINATE}."
    return f"{tag} Step {plan.cursor + 1} of {n}: {plan.current.description}"


class _Chat:
    """State for one run of a group chat."""

    def __init__(self, group: GroupChat, request: str, origin: str | None):
        self.group = group
        self.request = request
        self.origin = origin
        self.repairs = 0

    def push(self, msg: Message) -> Message:
        g = self.group
        msg.turn_index = len(g.transcript)
        msg.group_id = g.group_id
        msg.chat = g.chats_run
        g.transcript.append(msg)
        if g.on_message is not None:
            g.on_message(msg)
        return msg

    def terminate(self, kind: str, detail: str) -> Message:
        return self.push(Message(0, "", Role.MANAGER, f"TERMINATED: {kind}: {detail}",
                                 is_terminal=True, error_kind=kind))

    def speak(self, role: Role) -> Message:
        g = self.group
        last = g.transcript[-1]
        if role is Role.PLANNER:
            g.plan = g.agents[Role.PLANNER].make_plan(self.request, g.domain_context, g.transcript)
            self.repairs = 0
            return Message(0, "", Role.PLANNER, g.plan.text)
        if role is Role.WRITER:
            writer = g.agents[Role.WRITER]
            directive = writer_directive(g.group_id, g.plan, last)
            step = g.plan.current if g.plan else None
            known = g.agents[Role.EXECUTOR].env.keys()
            try:
                msg = writer.compose_action(step, g.transcript, directive, known)
            except ActionScriptError as exc:
                # the executor re-parses the block and reports the same error
                msg = Message(0, "", Role.WRITER, exc.content)
            if g.plan is not None and g.plan.complete and TERMINATE in msg.content:
                msg.is_terminal = True
            return msg
        if role is Role.EXECUTOR:
            writer_msg = next((m for m in reversed(g.transcript) if m.sender is Role.WRITER), None)
            if writer_msg is None:
                return Message(0, "", Role.EXECUTOR, "exitcode: 0 (no writer message to execute)",
                               tool_results=[])
            return g.agents[Role.EXECUTOR].execute_message(writer_msg)
        raise UnknownRole(f"{role.value} cannot speak")

    def after_executor(self, msg: Message) -> None:
        g = self.group
        if msg.failed:
            if self.repairs >= g.retry_budget:
                step = g.plan.cursor + 1 if g.plan else "?"
                self.terminate(RETRY_EXHAUSTED,
                               f"step {step} still failing ({msg.error_kind}) after {self.repairs} repair(s)")
            else:
                self.repairs += 1
        elif g.plan is not None and not g.plan.complete:
            g.plan.advance()
            self.repairs = 0


def run_group_chat(group: GroupChat, request: str, origin: str | None = None) -> Transcript:
    """Run one chat to termination and return its transcript.

    ``origin`` names the group whose executor forwarded the request; without
    it the request comes from the Admin.
    """
    if not request or not request.strip():
        raise ValueError("request must be non-empty")
    missing = [r.value for r in AGENT_ROLES if r not in group.agents]
    if missing:
        raise ValueError(f"group {group.group_id} lacks agents: {', '.join(missing)}")

    group.chats_run += 1
    group.transcript = []
    group.plan = None
    group.agents[Role.EXECUTOR].reset()
    chat = _Chat(group, request, origin)
    sender = Role.EXECUTOR if origin else Role.ADMIN
    chat.push(Message(0, group.group_id, sender, request, origin=origin))
    manager = group.agents[Role.MANAGER]

    while not group.transcript[-1].is_terminal:
        n = len(group.transcript)
        if n >= group.max_turns:
            last = group.transcript[-1]
            last.is_terminal, last.error_kind = True, TURN_LIMIT
            break
        if n == group.max_turns - 1:
            chat.terminate(TURN_LIMIT, f"max_turns={group.max_turns} reached")
            break
        try:
            role = manager.select_next_agent(group.transcript, group.plan, group.agents.keys())
            msg = chat.speak(role)
        except OrchestrationError as exc:
            # backend failures, unknown roles, unparseable plans, ambiguous script triggers
            chat.terminate(BACKEND_FAILURE, f"{exc.kind}: {exc}")
            break
        chat.push(msg)
        if msg.sender is Role.EXECUTOR:
            chat.after_executor(msg)
    return list(group.transcript)
