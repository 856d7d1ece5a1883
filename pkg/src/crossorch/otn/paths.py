"""Candidate paths: enumeration, validation and selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import networkx as nx

from ..errors import EmptyCandidates, InvalidEndpoints, InvalidPath, NoPath, NotEvaluated
from .topology import FiberLink, Topology


@dataclass(frozen=True)
class PathCandidate:
    nodes: tuple[str, ...]
    gsnr_db: float | None = None
    length_km: float | None = None

    is_path = True

    @classmethod
    def parse(cls, descriptor: "str | PathCandidate") -> "PathCandidate":
        """Accept ``"N1-N2-N3"`` or an existing candidate."""
        if isinstance(descriptor, PathCandidate):
            return descriptor
        parts = [p.strip() for p in descriptor.split("-")]
        if len(parts) < 2 or not all(parts):
            raise InvalidPath(f"bad path descriptor {descriptor!r}")
        return cls(tuple(parts))

    @property
    def label(self) -> str:
        return "-".join(self.nodes)

    def to_payload(self) -> dict:
        out: dict = {"path": self.label}
        if self.length_km is not None:
            out["length_km"] = round(self.length_km, 6)
        if self.gsnr_db is not None:
            out["gsnr_db"] = round(self.gsnr_db, 6)
        return out

    def describe(self) -> str:
        text = self.label
        if self.length_km is not None:
            text += f" ({self.length_km:g} km)"
        if self.gsnr_db is not None:
            text += f": GSNR {self.gsnr_db:.2f} dB"
        return text


def path_links(topology: Topology, path: PathCandidate) -> list[FiberLink]:
    """Links traversed by ``path``; raises InvalidPath if it is not a simple path of the topology."""
    if len(path.nodes) < 2:
        raise InvalidPath("a path needs at least two nodes")
    if len(set(path.nodes)) != len(path.nodes):
        raise InvalidPath(f"{path.label} repeats a node")
    known = set(topology.node_ids())
    for n in path.nodes:
        if n not in known:
            raise InvalidPath(f"{path.label}: unknown node {n!r}")
    links = []
    for u, v in zip(path.nodes, path.nodes[1:]):
        link = topology.link_between(u, v)
        if link is None:
            raise InvalidPath(f"{path.label}: no link between {u} and {v}")
        links.append(link)
    return links


def path_length_km(topology: Topology, path: PathCandidate) -> float:
    return math.fsum(s.length_km for link in path_links(topology, path) for s in link.spans)


def _graph(topology: Topology) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(topology.node_ids())
    for link in topology.links:
        g.add_edge(link.a, link.b, weight=link.length_km)
    return g


def enumerate_paths(topology: Topology, src: str, dst: str, k: int) -> list[PathCandidate]:
    """Up to ``k`` simple paths ordered by total fiber length, ties by node sequence.

    networkx yields paths in nondecreasing weight; we keep pulling until the
    length strictly exceeds the k-th one so that equal-length paths can be
    re-ordered lexicographically.
    """
    if k < 1:
        raise ValueError("k must be positive")
    known = set(topology.node_ids())
    if src == dst or src not in known or dst not in known:
        raise InvalidEndpoints(f"invalid endpoints {src!r} -> {dst!r}")
    g = _graph(topology)
    found: list[tuple[float, tuple[str, ...]]] = []
    try:
        for nodes in nx.shortest_simple_paths(g, src, dst, weight="weight"):
            cand = PathCandidate(tuple(nodes))
            length = path_length_km(topology, cand)
            if len(found) >= k and length > found[k - 1][0] + 1e-9:
                break
            found.append((length, cand.nodes))
            found.sort()
    except nx.NetworkXNoPath:
        pass
    if not found:
        raise NoPath(f"no path from {src} to {dst}")
    return [PathCandidate(nodes, length_km=length) for length, nodes in found[:k]]


def compare_paths(candidates: Sequence[PathCandidate]) -> PathCandidate:
    """Pick the highest GSNR; ties go to the shorter path, then the smaller node sequence."""
    if not candidates:
        raise EmptyCandidates("no candidates to compare")
    for c in candidates:
        if c.gsnr_db is None:
            raise NotEvaluated(f"{c.label} has no GSNR")

    def key(c: PathCandidate):
        length = c.length_km if c.length_km is not None else math.inf
        return (-c.gsnr_db, length, c.nodes)

    return min(candidates, key=key)


def with_gsnr(path: PathCandidate, gsnr_db: float, length_km: float) -> PathCandidate:
    return replace(path, gsnr_db=gsnr_db, length_km=length_km)
