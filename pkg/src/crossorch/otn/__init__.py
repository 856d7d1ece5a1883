"""Simulated optical transport network domain."""

from .paths import PathCandidate, compare_paths, enumerate_paths
from .qot import AmplifiedSpan, estimate_gsnr, evaluate_path, gsnr_of_spans, optimal_launch_power_dbm
from .tools import register_otn_tools
from .topology import (
    ChannelParams,
    FiberLink,
    RoadmNode,
    Span,
    Topology,
    TopologyStore,
    get_topology,
    load_topology,
)

__all__ = [
    "AmplifiedSpan", "ChannelParams", "FiberLink", "PathCandidate", "RoadmNode", "Span", "Topology",
    "TopologyStore", "compare_paths", "enumerate_paths", "estimate_gsnr", "evaluate_path",
    "get_topology", "gsnr_of_spans", "load_topology", "optimal_launch_power_dbm", "register_otn_tools",
]
