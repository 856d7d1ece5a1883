"""Executor-to-executor link between chat groups, plus fiber-switch propagation.

Each registered group owns a bounded FIFO inbox. Sequence numbers are
assigned per (from, to) channel under one lock, so delivery order always
matches seq order. The bridge also counts outstanding deliveries; the
orchestrator uses that to detect when every group has gone idle.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
from dataclasses import dataclass, replace
from typing import Callable, Mapping

from .errors import (
    OrchestrationError,
    ParseError,
    QueueFull,
    UnknownGroup,
    UnmappedPort,
    ValidationError,
)
from .otn.topology import Topology, TopologyStore
from .robot.sim import FiberSwitched
from .tools import Param, ToolRegistry, ToolSchema

logger = logging.getLogger(__name__)

KINDS = ("task_request", "result_report", "event")
DEFAULT_QUEUE_CAP = 64


@dataclass(frozen=True)
class CrossDomainMessage:
    seq: int
    from_group: str
    to_group: str
    content: str
    kind: str = "task_request"

    def to_dict(self) -> dict:
        return {"seq": self.seq, "from": self.from_group, "to": self.to_group,
                "kind": self.kind, "content": self.content}


@dataclass(frozen=True)
class DeliveryReceipt:
    seq: int
    from_group: str
    to_group: str
    kind: str

    def to_payload(self) -> dict:
        return {"seq": self.seq, "from": self.from_group, "to": self.to_group, "kind": self.kind}

    def describe(self) -> str:
        return f"delivered {self.kind} #{self.seq} from {self.from_group} to {self.to_group}"


class Bridge:
    def __init__(self, queue_cap: int = DEFAULT_QUEUE_CAP):
        self.queue_cap = queue_cap
        self._inboxes: dict[str, queue.Queue] = {}
        self._seq: dict[tuple[str, str], int] = {}
        self._lock = threading.Lock()
        self._idle = threading.Condition(self._lock)
        self._outstanding = 0
        self.log: list[CrossDomainMessage] = []

    def register_group(self, name: str) -> None:
        with self._lock:
            if name in self._inboxes:
                raise ValueError(f"group {name!r} already registered")
            self._inboxes[name] = queue.Queue(maxsize=self.queue_cap)

    @property
    def groups(self) -> list[str]:
        return list(self._inboxes)

    def send(self, from_group: str, to_group: str, content: str,
             kind: str = "task_request") -> DeliveryReceipt:
        if kind not in KINDS:
            raise ValidationError(f"unknown message kind {kind!r}")
        with self._lock:
            inbox = self._inboxes.get(to_group)
            if inbox is None:
                raise UnknownGroup(f"no chat group named {to_group!r}")
            channel = (from_group, to_group)
            seq = self._seq.get(channel, 0) + 1
            msg = CrossDomainMessage(seq, from_group, to_group, content, kind)
            try:
                inbox.put_nowait(msg)
            except queue.Full:
                raise QueueFull(f"inbox of {to_group!r} is full ({self.queue_cap})") from None
            self._seq[channel] = seq
            self._outstanding += 1
            self.log.append(msg)
        logger.debug("bridge %s -> %s #%d (%s)", from_group, to_group, seq, kind)
        return DeliveryReceipt(seq, from_group, to_group, kind)

    def receive(self, group: str, timeout: float | None = None) -> CrossDomainMessage | None:
        """Next message for ``group`` or None on timeout. Call ``done()`` once handled."""
        inbox = self._inboxes.get(group)
        if inbox is None:
            raise UnknownGroup(f"no chat group named {group!r}")
        try:
            return inbox.get(timeout=timeout) if timeout is not None else inbox.get_nowait()
        except queue.Empty:
            return None

    def done(self) -> None:
        with self._idle:
            self._outstanding -= 1
            if self._outstanding == 0:
                self._idle.notify_all()

    def wait_idle(self, timeout: float | None = None) -> bool:
        with self._idle:
            return self._idle.wait_for(lambda: self._outstanding == 0, timeout)


def send_to_group(bridge: Bridge, from_executor: str, to_group: str, content: str,
                  kind: str = "task_request") -> DeliveryReceipt:
    return bridge.send(from_executor, to_group, content, kind)


SEND_TO_GROUP = ToolSchema(
    "send_to_group",
    "Send a message to another chat group through the executor link. "
    "kind is task_request (default) or result_report.",
    (Param("group", "string"), Param("content", "string"), Param("kind", "string", required=False)),
)


def register_send_tool(registry: ToolRegistry, bridge: Bridge, group: str) -> ToolRegistry:
    """Give ``group``'s executor the only cross-group send capability."""

    sender = group

    def handler(group: str, content: str, kind: str = "task_request"):
        return send_to_group(bridge, sender, group, content, kind)

    return registry.register(SEND_TO_GROUP, handler)


# --- fiber switch propagation ------------------------------------------------

@dataclass(frozen=True)
class PortBinding:
    """A fiber in ``port`` lands the ``side`` end of ``link`` on ``node``."""

    link: str
    side: str
    node: str


def load_mapping(document: str) -> dict[str, PortBinding]:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("mapping must be an object of port label -> binding")
    out = {}
    for port, entry in doc.items():
        if not isinstance(entry, dict) or not all(isinstance(entry.get(k), str) for k in ("link", "side", "node")):
            raise ParseError(f"port {port}: needs string 'link', 'side' and 'node'")
        if entry["side"] not in ("a", "b"):
            raise ParseError(f"port {port}: side must be 'a' or 'b'")
        out[port] = PortBinding(entry["link"], entry["side"], entry["node"])
    return out


def check_mapping(mapping: Mapping[str, PortBinding], topology: Topology) -> None:
    for port, binding in mapping.items():
        try:
            topology.link(binding.link)
            topology.node(binding.node)
        except KeyError as exc:
            raise ValidationError(f"mapping for port {port} references unknown {exc.args[0]!r}") from None


def rewire(topology: Topology, event: FiberSwitched, mapping: Mapping[str, PortBinding]) -> Topology:
    for port in (event.from_port, event.to_port):
        if port not in mapping:
            raise UnmappedPort(f"port {port!r} has no topology mapping")
    src, dst = mapping[event.from_port], mapping[event.to_port]
    if (src.link, src.side) != (dst.link, dst.side):
        raise ValidationError(f"ports {event.from_port} and {event.to_port} carry different fiber ends")
    link = topology.link(src.link)
    current = getattr(link, src.side)
    if current != src.node:
        raise ValidationError(
            f"link {link.id} side {src.side} is on {current}, not on port {event.from_port}'s node {src.node}")
    links = tuple(replace(lk, **{src.side: dst.node}) if lk.id == link.id else lk for lk in topology.links)
    return replace(topology, links=links)


def apply_fiber_switch(event: FiberSwitched, mapping: Mapping[str, PortBinding],
                       store: TopologyStore) -> int:
    """Rewire the mapped link end and return the new topology version."""
    _, topo = store.snapshot()
    return store.replace(rewire(topo, event, mapping))


class FiberSwitchApplier:
    """Robot-event listener that keeps the OTN topology in step with the panel.

    Failures are recorded rather than raised: the physical move already
    happened, and the robot step should still report success.
    """

    def __init__(self, mapping: Mapping[str, PortBinding], store: TopologyStore,
                 notify: Callable[[FiberSwitched, int], None] | None = None):
        self.mapping = dict(mapping)
        self.store = store
        self.notify = notify
        self.applied: list[tuple[FiberSwitched, int]] = []
        self.failed: list[tuple[FiberSwitched, str]] = []

    def __call__(self, event: FiberSwitched) -> None:
        try:
            version = apply_fiber_switch(event, self.mapping, self.store)
        except OrchestrationError as exc:
            logger.warning("fiber switch %s not applied: %s", event, exc)
            self.failed.append((event, f"{exc.kind}: {exc}"))
            return
        self.applied.append((event, version))
        if self.notify is not None:
            self.notify(event, version)
