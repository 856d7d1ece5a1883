"""Tools exposed to the OTN chat group."""

from __future__ import annotations

from ..tools import Param, ToolRegistry, ToolSchema
from .paths import PathCandidate, compare_paths, enumerate_paths
from .qot import evaluate_path
from .topology import TopologyStore, get_topology

GET_TOPOLOGY = ToolSchema(
    "get_topology", "Retrieve the current optical network topology (nodes, links, fiber lengths).")
ENUMERATE_PATHS = ToolSchema(
    "enumerate_paths", "List up to k simple paths between two ROADMs, shortest fiber length first.",
    (Param("src", "string"), Param("dst", "string"), Param("k", "integer", required=False)))
ESTIMATE_GSNR = ToolSchema(
    "estimate_gsnr", "Estimate the GSNR (dB) of a path given as 'N1-N2-...' or a bound path.",
    (Param("path", "path-descriptor"),))
COMPARE_PATHS = ToolSchema(
    "compare_paths", "Return the evaluated path with the higher GSNR.",
    (Param("first", "path-descriptor"), Param("second", "path-descriptor")))


def register_otn_tools(registry: ToolRegistry, store: TopologyStore) -> ToolRegistry:
    def _enumerate(src: str, dst: str, k: int = 5):
        return enumerate_paths(store.topology, src, dst, k)

    def _estimate(path):
        return evaluate_path(store.topology, path)

    def _compare(first, second):
        return compare_paths([PathCandidate.parse(first), PathCandidate.parse(second)])

    registry.register(GET_TOPOLOGY, lambda: get_topology(store))
    registry.register(ENUMERATE_PATHS, _enumerate)
    registry.register(ESTIMATE_GSNR, _estimate)
    registry.register(COMPARE_PATHS, _compare)
    return registry
