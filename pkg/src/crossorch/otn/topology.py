"""Optical topology model, JSON loader and the versioned topology store."""

from __future__ import annotations

import json
import math
import re
import threading
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from ..errors import NotLoaded, ParseError, ValidationError

_NODE_ID_RE = re.compile(r"[A-Za-z0-9_.:]+")


@dataclass(frozen=True)
class RoadmNode:
    id: str
    insertion_loss_db: float = 0.0


@dataclass(frozen=True)
class Span:
    length_km: float
    alpha_db_per_km: float = 0.2
    beta2_ps2_per_km: float = -21.27
    gamma_per_w_km: float = 1.27
    amp_nf_db: float = 5.0

    @property
    def loss_db(self) -> float:
        return self.alpha_db_per_km * self.length_km


@dataclass(frozen=True)
class FiberLink:
    id: str
    a: str
    b: str
    spans: tuple[Span, ...]

    @property
    def length_km(self) -> float:
        return math.fsum(s.length_km for s in self.spans)

    def other(self, node: str) -> str:
        return self.b if node == self.a else self.a


@dataclass(frozen=True)
class ChannelParams:
    center_freq_hz: float = 193.4e12
    symbol_rate_baud: float = 32e9
    launch_power_dbm: float = 0.0
    ref_bandwidth_hz: float = 12.5e9


@dataclass(frozen=True)
class Topology:
    nodes: tuple[RoadmNode, ...]
    links: tuple[FiberLink, ...]
    channel: ChannelParams = field(default_factory=ChannelParams)

    def node(self, node_id: str) -> RoadmNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def link(self, link_id: str) -> FiberLink:
        for link in self.links:
            if link.id == link_id:
                return link
        raise KeyError(link_id)

    def link_between(self, u: str, v: str) -> FiberLink | None:
        for link in self.links:
            if {link.a, link.b} == {u, v}:
                return link
        return None

    def adjacency(self) -> dict[str, list[tuple[str, FiberLink]]]:
        adj: dict[str, list[tuple[str, FiberLink]]] = {n.id: [] for n in self.nodes}
        for link in self.links:
            adj[link.a].append((link.b, link))
            adj[link.b].append((link.a, link))
        return adj

    def with_channel(self, **changes) -> "Topology":
        return replace(self, channel=replace(self.channel, **changes))

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.id, "insertion_loss_db": n.insertion_loss_db} for n in self.nodes],
            "links": [
                {
                    "id": link.id, "a": link.a, "b": link.b,
                    "spans": [
                        {"length_km": s.length_km, "alpha_db_per_km": s.alpha_db_per_km,
                         "beta2_ps2_per_km": s.beta2_ps2_per_km, "gamma_per_w_km": s.gamma_per_w_km,
                         "amp_nf_db": s.amp_nf_db}
                        for s in link.spans
                    ],
                }
                for link in self.links
            ],
            "channel": {
                "center_freq_hz": self.channel.center_freq_hz,
                "symbol_rate_baud": self.channel.symbol_rate_baud,
                "launch_power_dbm": self.channel.launch_power_dbm,
                "ref_bandwidth_hz": self.channel.ref_bandwidth_hz,
            },
        }


def validate_topology(topo: Topology) -> Topology:
    """Check every structural and physical invariant; raise ValidationError on the first failure."""
    ids = [n.id for n in topo.nodes]
    if not ids:
        raise ValidationError("topology has no nodes")
    if len(set(ids)) != len(ids):
        raise ValidationError("node ids must be unique")
    for n in topo.nodes:
        if not _NODE_ID_RE.fullmatch(n.id):
            raise ValidationError(f"node id {n.id!r} contains characters outside [A-Za-z0-9_.:]")
        if not (math.isfinite(n.insertion_loss_db) and n.insertion_loss_db >= 0):
            raise ValidationError(f"node {n.id}: insertion_loss_db must be >= 0")
    link_ids = [link.id for link in topo.links]
    if len(set(link_ids)) != len(link_ids):
        raise ValidationError("link ids must be unique")
    known = set(ids)
    pairs = set()
    for link in topo.links:
        for end in (link.a, link.b):
            if end not in known:
                raise ValidationError(f"link {link.id} references unknown node {end!r}")
        if link.a == link.b:
            raise ValidationError(f"link {link.id} is a self-loop on {link.a}")
        pair = frozenset((link.a, link.b))
        if pair in pairs:
            raise ValidationError(f"link {link.id} duplicates an existing {link.a}-{link.b} link")
        pairs.add(pair)
        if not link.spans:
            raise ValidationError(f"link {link.id} has no spans")
        for i, s in enumerate(link.spans):
            where = f"link {link.id} span {i}"
            if not (math.isfinite(s.length_km) and s.length_km > 0):
                raise ValidationError(f"{where}: length_km must be > 0")
            if not (math.isfinite(s.alpha_db_per_km) and s.alpha_db_per_km > 0):
                raise ValidationError(f"{where}: alpha_db_per_km must be > 0")
            if not math.isfinite(s.beta2_ps2_per_km):
                raise ValidationError(f"{where}: beta2_ps2_per_km must be finite")
            if not (math.isfinite(s.gamma_per_w_km) and s.gamma_per_w_km >= 0):
                raise ValidationError(f"{where}: gamma_per_w_km must be >= 0")
            if not (math.isfinite(s.amp_nf_db) and s.amp_nf_db > 0):
                raise ValidationError(f"{where}: amp_nf_db must be > 0")
    ch = topo.channel
    for name in ("center_freq_hz", "symbol_rate_baud", "ref_bandwidth_hz"):
        value = getattr(ch, name)
        if not (math.isfinite(value) and value > 0):
            raise ValidationError(f"channel {name} must be positive")
    if not math.isfinite(ch.launch_power_dbm):
        raise ValidationError("channel launch_power_dbm must be finite")
    # connectivity
    adj = topo.adjacency()
    seen = {ids[0]}
    stack = [ids[0]]
    while stack:
        for nxt, _ in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    if len(seen) != len(ids):
        missing = sorted(known - seen)
        raise ValidationError(f"topology is not connected; unreachable: {', '.join(missing)}")
    return topo


def _number(d: Mapping, key: str, where: str, default: Any = None) -> float:
    if key not in d:
        if default is None:
            raise ParseError(f"{where}: missing {key!r}")
        return default
    value = d[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: {key!r} must be a number")
    return float(value)


def topology_from_dict(doc: Mapping) -> Topology:
    if not isinstance(doc, Mapping):
        raise ParseError("topology document must be an object")
    try:
        raw_nodes = doc["nodes"]
        raw_links = doc["links"]
    except KeyError as exc:
        raise ParseError(f"missing top-level key {exc.args[0]!r}") from None
    nodes = []
    for i, n in enumerate(raw_nodes):
        if not isinstance(n, Mapping) or not isinstance(n.get("id"), str):
            raise ParseError(f"nodes[{i}]: needs a string 'id'")
        nodes.append(RoadmNode(n["id"], _number(n, "insertion_loss_db", f"node {n['id']}", 0.0)))
    links = []
    for i, raw in enumerate(raw_links):
        if not isinstance(raw, Mapping):
            raise ParseError(f"links[{i}]: must be an object")
        a, b = raw.get("a"), raw.get("b")
        if not isinstance(a, str) or not isinstance(b, str):
            raise ParseError(f"links[{i}]: 'a' and 'b' must be node ids")
        link_id = raw.get("id", f"{a}-{b}")
        spans = []
        for j, s in enumerate(raw.get("spans", [])):
            where = f"link {link_id} span {j}"
            if not isinstance(s, Mapping):
                raise ParseError(f"{where}: must be an object")
            defaults = Span(1.0)
            spans.append(Span(
                _number(s, "length_km", where),
                _number(s, "alpha_db_per_km", where, defaults.alpha_db_per_km),
                _number(s, "beta2_ps2_per_km", where, defaults.beta2_ps2_per_km),
                _number(s, "gamma_per_w_km", where, defaults.gamma_per_w_km),
                _number(s, "amp_nf_db", where, defaults.amp_nf_db),
            ))
        links.append(FiberLink(str(link_id), a, b, tuple(spans)))
    ch = doc.get("channel", {})
    default_ch = ChannelParams()
    channel = ChannelParams(
        _number(ch, "center_freq_hz", "channel", default_ch.center_freq_hz),
        _number(ch, "symbol_rate_baud", "channel", default_ch.symbol_rate_baud),
        _number(ch, "launch_power_dbm", "channel", default_ch.launch_power_dbm),
        _number(ch, "ref_bandwidth_hz", "channel", default_ch.ref_bandwidth_hz),
    )
    return Topology(tuple(nodes), tuple(links), channel)


def load_topology(document: str) -> Topology:
    """Parse and validate a topology JSON document."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
    return validate_topology(topology_from_dict(doc))


class TopologyStore:
    """Single-writer, multi-reader holder of the current topology.

    Readers get immutable snapshots; every accepted replacement bumps the
    version by one.
    """

    def __init__(self, topology: Topology | None = None):
        self._lock = threading.RLock()
        self._topology = validate_topology(topology) if topology is not None else None
        self._version = 0

    @classmethod
    def from_document(cls, document: str) -> "TopologyStore":
        return cls(load_topology(document))

    @property
    def loaded(self) -> bool:
        return self._topology is not None

    @property
    def version(self) -> int:
        return self._version

    def snapshot(self) -> tuple[int, Topology]:
        with self._lock:
            if self._topology is None:
                raise NotLoaded("no topology loaded")
            return self._version, self._topology

    @property
    def topology(self) -> Topology:
        return self.snapshot()[1]

    def load(self, topology: Topology) -> int:
        return self.replace(topology)

    def replace(self, topology: Topology) -> int:
        validate_topology(topology)
        with self._lock:
            if self._topology is not None:
                self._version += 1
            self._topology = topology
            return self._version


@dataclass(frozen=True)
class TopologySummary:
    version: int
    nodes: tuple[dict, ...]
    links: tuple[dict, ...]

    def to_payload(self) -> dict:
        return {"version": self.version, "nodes": list(self.nodes), "links": list(self.links)}

    def describe(self) -> str:
        links = ", ".join(f"{link['id']}:{link['a']}-{link['b']}({link['length_km']:g} km)"
                          for link in self.links)
        return f"{len(self.nodes)} nodes, {len(self.links)} links (version {self.version}): {links}"


def get_topology(store: TopologyStore) -> TopologySummary:
    version, topo = store.snapshot()
    return TopologySummary(
        version,
        tuple({"id": n.id, "insertion_loss_db": n.insertion_loss_db} for n in topo.nodes),
        tuple({"id": link.id, "a": link.a, "b": link.b, "length_km": link.length_km,
               "spans": len(link.spans)} for link in topo.links),
    )
