"""Static design-space analysis for mixed-precision quantized networks on
scratchpad-based accelerators: graph modeling, cost decoration, tiling and
latency bounding, and hardware/implementation sweeps."""

from .costmodel import DecoratedGraph, MemoryFootprint, NodeCosts, decorate, decorate_report
from .errors import QnnPerfError
from .graph import (
    Edge,
    Graph,
    Node,
    NodeKind,
    TensorSpec,
    parse_graph,
    serialize,
    topological_order,
    validate_graph,
)
from .implconfig import ImplChoice, ImplConfig, bind_config, parse_impl_config
from .platform import Deadline, PlatformSpec, parse_platform
from .scheduler import LatencyReport, refine_and_schedule
from .sweep import SweepRow, SweepSpec, emit_report, pareto_filter, run_sweep

__version__ = "0.1.0"

__all__ = [
    "DecoratedGraph", "MemoryFootprint", "NodeCosts", "decorate",
    "decorate_report", "QnnPerfError", "Edge", "Graph", "Node", "NodeKind",
    "TensorSpec", "parse_graph", "serialize", "topological_order",
    "validate_graph", "ImplChoice", "ImplConfig", "bind_config",
    "parse_impl_config", "Deadline", "PlatformSpec", "parse_platform",
    "LatencyReport", "refine_and_schedule", "SweepRow", "SweepSpec",
    "emit_report", "pareto_filter", "run_sweep",
    "__version__",
]
