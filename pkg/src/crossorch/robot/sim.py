"""Port-level simulation of the fiber-switching robot.

There is no kinematics here: the arm is a point that can move anywhere inside
an axis-aligned workspace box, and plug/unplug require the point to sit on the
port (within 1 mm). All operations are pure; they return new state objects and
raise a RobotError subclass when a precondition fails.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

from ..errors import (
    HandsFull,
    NotAtPort,
    NotHoldingFiber,
    OutOfWorkspace,
    ParseError,
    PortEmpty,
    PortOccupied,
    RobotError,
    UnknownPort,
    ValidationError,
)

AT_PORT_TOLERANCE_M = 1e-3

Vec3 = tuple[float, float, float]


class Gripper(str, Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass(frozen=True)
class Workspace:
    min: Vec3
    max: Vec3

    def contains(self, p: Vec3) -> bool:
        return all(lo <= x <= hi for lo, x, hi in zip(self.min, p, self.max))

    @property
    def center(self) -> Vec3:
        return tuple((lo + hi) / 2.0 for lo, hi in zip(self.min, self.max))


@dataclass(frozen=True, eq=False)
class PortPanel:
    ports: Mapping[str, str | None]
    positions: Mapping[str, Vec3]

    def __post_init__(self):
        object.__setattr__(self, "ports", MappingProxyType(dict(self.ports)))
        object.__setattr__(self, "positions", MappingProxyType(dict(self.positions)))
        if set(self.ports) != set(self.positions):
            raise ValidationError("every port needs exactly one position")
        fibers = [f for f in self.ports.values() if f is not None]
        if len(set(fibers)) != len(fibers):
            raise ValidationError("a fiber may occupy at most one port")

    def __eq__(self, other):
        if not isinstance(other, PortPanel):
            return NotImplemented
        return dict(self.ports) == dict(other.ports) and dict(self.positions) == dict(other.positions)

    __hash__ = None

    def with_port(self, label: str, fiber: str | None) -> "PortPanel":
        ports = dict(self.ports)
        ports[label] = fiber
        return PortPanel(ports, self.positions)

    def fibers(self) -> list[str]:
        return sorted(f for f in self.ports.values() if f is not None)

    def port_of(self, fiber: str) -> str | None:
        for label, f in self.ports.items():
            if f == fiber:
                return label
        return None


@dataclass(frozen=True)
class RobotState:
    location: Vec3
    gripper: Gripper = Gripper.OPEN
    holding: str | None = None
    holding_from: str | None = None

    def __post_init__(self):
        if self.holding is not None and self.gripper is not Gripper.CLOSED:
            raise ValidationError("holding a fiber requires a closed gripper")


@dataclass(frozen=True)
class RobotCommand:
    verb: str
    target: str | Vec3

    VERBS = ("locate_port", "move_to", "unplug", "plug")

    def __post_init__(self):
        if self.verb not in self.VERBS:
            raise ValueError(f"unknown verb {self.verb!r}")
        if self.verb == "move_to":
            if isinstance(self.target, str) or len(self.target) != 3:
                raise ValueError("move_to needs three coordinates")
            object.__setattr__(self, "target", tuple(float(x) for x in self.target))
        elif not isinstance(self.target, str):
            raise ValueError(f"{self.verb} needs a port label")

    def __str__(self):
        if self.verb == "move_to":
            return "move_to(" + ", ".join(f"{x:g}" for x in self.target) + ")"
        return f"{self.verb}({self.target})"


@dataclass(frozen=True)
class FiberSwitched:
    fiber: str
    from_port: str
    to_port: str

    def to_payload(self) -> dict:
        return {"fiber": self.fiber, "from_port": self.from_port, "to_port": self.to_port}


def locate_port(panel: PortPanel, label: str) -> Vec3:
    try:
        return panel.positions[label]
    except KeyError:
        raise UnknownPort(f"unknown port {label!r}") from None


def move_to(state: RobotState, target: Sequence[float], workspace: Workspace) -> RobotState:
    target = tuple(float(x) for x in target)
    if len(target) != 3 or not all(math.isfinite(x) for x in target):
        raise OutOfWorkspace(f"bad target {target!r}")
    if not workspace.contains(target):
        raise OutOfWorkspace(f"target {target} is outside the workspace")
    return replace(state, location=target)


def at_port(state: RobotState, panel: PortPanel, label: str) -> bool:
    return math.dist(state.location, locate_port(panel, label)) <= AT_PORT_TOLERANCE_M


def _require_at(state: RobotState, panel: PortPanel, label: str) -> None:
    if not at_port(state, panel, label):
        raise NotAtPort(f"robot is not at port {label}")


def unplug(state: RobotState, panel: PortPanel, label: str) -> tuple[RobotState, PortPanel]:
    _require_at(state, panel, label)
    fiber = panel.ports[label]
    if fiber is None:
        raise PortEmpty(f"port {label} is empty")
    if state.holding is not None:
        raise HandsFull(f"already holding fiber {state.holding}")
    state = replace(state, gripper=Gripper.CLOSED, holding=fiber, holding_from=label)
    return state, panel.with_port(label, None)


def plug(state: RobotState, panel: PortPanel, label: str) -> tuple[RobotState, PortPanel]:
    _require_at(state, panel, label)
    if panel.ports[label] is not None:
        raise PortOccupied(f"port {label} already holds fiber {panel.ports[label]}")
    if state.holding is None:
        raise NotHoldingFiber("gripper is empty")
    panel = panel.with_port(label, state.holding)
    return replace(state, gripper=Gripper.OPEN, holding=None, holding_from=None), panel


@dataclass
class CommandResult:
    index: int
    command: RobotCommand
    ok: bool
    value: object = None
    error_kind: str | None = None
    message: str = ""


@dataclass
class SequenceOutcome:
    state: RobotState
    panel: PortPanel
    results: list[CommandResult] = field(default_factory=list)
    events: list[FiberSwitched] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)


def apply_command(state: RobotState, panel: PortPanel, cmd: RobotCommand, workspace: Workspace,
                  auto_approach: bool = True):
    """Apply one command; returns (state, panel, value, event)."""
    if cmd.verb == "locate_port":
        return state, panel, locate_port(panel, cmd.target), None
    if cmd.verb == "move_to":
        return move_to(state, cmd.target, workspace), panel, None, None
    label = cmd.target
    pos = locate_port(panel, label)
    if auto_approach and not at_port(state, panel, label):
        state = move_to(state, pos, workspace)
    if cmd.verb == "unplug":
        state, panel = unplug(state, panel, label)
        return state, panel, state.holding, None
    origin, fiber = state.holding_from, state.holding
    state, panel = plug(state, panel, label)
    event = FiberSwitched(fiber, origin, label) if origin is not None and origin != label else None
    return state, panel, fiber, event


def execute_command_sequence(state: RobotState, panel: PortPanel, commands: Iterable[RobotCommand],
                             workspace: Workspace, auto_approach: bool = True) -> SequenceOutcome:
    """Apply ``commands`` in order, stopping at the first failure.

    With ``auto_approach`` a move to the port is inserted before plug/unplug
    whenever the arm is not already there.
    """
    out = SequenceOutcome(state, panel)
    for i, cmd in enumerate(commands):
        try:
            s, p, value, event = apply_command(out.state, out.panel, cmd, workspace, auto_approach)
        except RobotError as exc:
            out.results.append(CommandResult(i, cmd, False, None, exc.kind, str(exc)))
            break
        out.state, out.panel = s, p
        out.results.append(CommandResult(i, cmd, True, value))
        if event is not None:
            out.events.append(event)
    return out


def _vec3(value, where: str) -> Vec3:
    if (not isinstance(value, (list, tuple)) or len(value) != 3
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)):
        raise ParseError(f"{where}: expected [x, y, z]")
    return tuple(float(x) for x in value)


@dataclass(frozen=True)
class PanelConfig:
    panel: PortPanel
    workspace: Workspace
    home: Vec3

    def initial_state(self) -> RobotState:
        return RobotState(self.home)


def load_panel(document: str) -> PanelConfig:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
    if not isinstance(doc, dict) or "ports" not in doc or "workspace" not in doc:
        raise ParseError("panel document needs 'ports' and 'workspace'")
    ports, positions = {}, {}
    for i, entry in enumerate(doc["ports"]):
        label = entry.get("label") if isinstance(entry, dict) else None
        if not isinstance(label, str) or not label:
            raise ParseError(f"ports[{i}]: needs a string 'label'")
        if label in ports:
            raise ValidationError(f"duplicate port label {label!r}")
        fiber = entry.get("fiber")
        if fiber is not None and not isinstance(fiber, str):
            raise ParseError(f"port {label}: 'fiber' must be a string or null")
        ports[label] = fiber
        positions[label] = _vec3(entry.get("position"), f"port {label}")
    ws = doc["workspace"]
    workspace = Workspace(_vec3(ws.get("min"), "workspace.min"), _vec3(ws.get("max"), "workspace.max"))
    if not all(lo <= hi for lo, hi in zip(workspace.min, workspace.max)):
        raise ValidationError("workspace min must not exceed max")
    home = _vec3(doc["home"], "home") if "home" in doc else workspace.center
    if not workspace.contains(home):
        raise ValidationError("home position is outside the workspace")
    return PanelConfig(PortPanel(ports, positions), workspace, home)


class RobotController:
    """Owns the live robot and panel state for the robotic chat group.

    Fiber-switch events are forwarded to every subscribed listener after the
    state has been committed.
    """

    def __init__(self, config: PanelConfig):
        self.workspace = config.workspace
        self.state = config.initial_state()
        self.panel = config.panel
        self._lock = threading.Lock()
        self._listeners: list[Callable[[FiberSwitched], None]] = []
        self.events: list[FiberSwitched] = []

    def subscribe(self, listener: Callable[[FiberSwitched], None]) -> None:
        self._listeners.append(listener)

    def execute(self, commands: Iterable[RobotCommand], auto_approach: bool = True) -> SequenceOutcome:
        with self._lock:
            out = execute_command_sequence(self.state, self.panel, commands, self.workspace, auto_approach)
            self.state, self.panel = out.state, out.panel
            self.events.extend(out.events)
        for event in out.events:
            for listener in self._listeners:
                listener(event)
        return out

    def run_one(self, verb: str, target) -> object:
        """Run a single command and return its value, raising on failure."""
        out = self.execute([RobotCommand(verb, target)])
        res = out.results[0]
        if not res.ok:
            raise _ERRORS[res.error_kind](res.message)
        return res.value


_ERRORS = {cls.kind: cls for cls in (UnknownPort, OutOfWorkspace, NotAtPort, PortEmpty, HandsFull,
                                     PortOccupied, NotHoldingFiber)}
