"""Compute-graph data model for quantized neural networks.

A network is a directed acyclic graph of typed operation nodes connected by
tensor-carrying edges. Feature maps use the HWC layout: a Conv node consumes
``(h_in, w_in, c_in)`` and produces ``(h_out, w_out, c_out)``. Graph inputs
and outputs are modeled as boundary edges whose ``src`` (resp. ``dst``) is
``None``; the graph lists them in order by edge index.

The native serialization is a single JSON document, see :func:`parse_graph`.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from math import prod
from typing import Optional, Union

from .errors import CycleError, GraphSyntaxError, SchemaError, ShapeError

FORMAT_VERSION = 1

#: Bit-widths accepted for tensors and implementation choices.
DEFAULT_BIT_WIDTHS = (2, 4, 8, 16, 32)


class NodeKind(str, Enum):
    QUANT = "Quant"
    CONV = "Conv"
    GEMM = "Gemm"
    MATMUL = "MatMul"
    ACT = "Act"
    MAXPOOL = "MaxPool"


@dataclass(frozen=True)
class TensorSpec:
    """Shape and per-element precision of the data carried by an edge."""

    dims: tuple[int, ...]
    bit_width: int

    @property
    def num_elements(self) -> int:
        return prod(self.dims)

    @property
    def bits(self) -> int:
        return self.num_elements * self.bit_width


@dataclass(frozen=True)
class ConvAttrs:
    c_in: int
    c_out: int
    k_h: int
    k_w: int
    h_in: int
    w_in: int
    h_out: int
    w_out: int
    stride: int = 1
    padding: int = 0
    depthwise: bool = False

    def spatial_consistent(self) -> bool:
        if self.stride < 1:
            return False
        h = (self.h_in + 2 * self.padding - self.k_h) // self.stride + 1
        w = (self.w_in + 2 * self.padding - self.k_w) // self.stride + 1
        return h == self.h_out and w == self.w_out


@dataclass(frozen=True)
class GemmAttrs:
    """Fully-connected layer: a matrix-vector product over flattened input."""

    in_features: int
    out_features: int


@dataclass(frozen=True)
class PoolAttrs:
    k_h: int
    k_w: int


@dataclass(frozen=True)
class QuantAttrs:
    """Requantization metadata: parameter counts, not values."""

    channels: int = 1


Attrs = Union[ConvAttrs, GemmAttrs, PoolAttrs, QuantAttrs, None]


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    attrs: Attrs = None


@dataclass(frozen=True)
class Edge:
    """Data dependency. ``src is None`` marks a graph input, ``dst is None``
    a graph output."""

    src: Optional[str]
    dst: Optional[str]
    tensor: TensorSpec


@dataclass
class Graph:
    nodes: list[Node] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)
    inputs: list[int] = field(default_factory=list)   # edge indices, src=None
    outputs: list[int] = field(default_factory=list)  # edge indices, dst=None

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def in_edges(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.dst == node_id]

    def out_edges(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.src == node_id]


@dataclass(frozen=True)
class Diagnostic:
    code: str
    subject: str
    message: str


# ---------------------------------------------------------------------------
# Parsing / serialization
# ---------------------------------------------------------------------------

_ATTR_FIELDS = {
    NodeKind.CONV: {
        "required": {"c_in", "c_out", "k_h", "k_w", "h_in", "w_in"},
        "optional": {"h_out", "w_out", "stride", "padding", "depthwise"},
    },
    NodeKind.GEMM: {"required": {"in_features", "out_features"}, "optional": set()},
    NodeKind.MATMUL: {"required": {"in_features", "out_features"}, "optional": set()},
    NodeKind.MAXPOOL: {"required": {"k_h", "k_w"}, "optional": set()},
    NodeKind.QUANT: {"required": set(), "optional": {"channels"}},
}


def _parse_attrs(kind: NodeKind, raw, node_id: str) -> Attrs:
    if kind is NodeKind.ACT:
        if raw not in (None, {}):
            raise SchemaError(f"node {node_id}: Act nodes take no attrs")
        return None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise SchemaError(f"node {node_id}: attrs must be an object")
    spec = _ATTR_FIELDS[kind]
    unknown = set(raw) - spec["required"] - spec["optional"]
    if unknown:
        raise SchemaError(f"node {node_id}: unknown attrs keys {sorted(unknown)}")
    missing = spec["required"] - set(raw)
    if missing:
        raise SchemaError(f"node {node_id}: missing attrs keys {sorted(missing)}")
    try:
        if kind is NodeKind.CONV:
            stride = raw.get("stride", 1)
            padding = raw.get("padding", 0)
            h_out = raw.get(
                "h_out", (raw["h_in"] + 2 * padding - raw["k_h"]) // max(stride, 1) + 1
            )
            w_out = raw.get(
                "w_out", (raw["w_in"] + 2 * padding - raw["k_w"]) // max(stride, 1) + 1
            )
            return ConvAttrs(
                c_in=int(raw["c_in"]), c_out=int(raw["c_out"]),
                k_h=int(raw["k_h"]), k_w=int(raw["k_w"]),
                h_in=int(raw["h_in"]), w_in=int(raw["w_in"]),
                h_out=int(h_out), w_out=int(w_out),
                stride=int(stride), padding=int(padding),
                depthwise=bool(raw.get("depthwise", False)),
            )
        if kind in (NodeKind.GEMM, NodeKind.MATMUL):
            return GemmAttrs(int(raw["in_features"]), int(raw["out_features"]))
        if kind is NodeKind.MAXPOOL:
            return PoolAttrs(k_h=int(raw["k_h"]), k_w=int(raw["k_w"]))
        if kind is NodeKind.QUANT:
            return QuantAttrs(channels=int(raw.get("channels", 1)))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"node {node_id}: bad attrs value ({exc})") from exc
    raise SchemaError(f"node {node_id}: unsupported kind {kind}")


def _attrs_to_json(node: Node):
    a = node.attrs
    if a is None:
        return None
    if isinstance(a, ConvAttrs):
        return {
            "c_in": a.c_in, "c_out": a.c_out, "k_h": a.k_h, "k_w": a.k_w,
            "h_in": a.h_in, "w_in": a.w_in, "h_out": a.h_out, "w_out": a.w_out,
            "stride": a.stride, "padding": a.padding, "depthwise": a.depthwise,
        }
    if isinstance(a, GemmAttrs):
        return {"in_features": a.in_features, "out_features": a.out_features}
    if isinstance(a, PoolAttrs):
        return {"k_h": a.k_h, "k_w": a.k_w}
    if isinstance(a, QuantAttrs):
        return {"channels": a.channels}
    raise TypeError(type(a))


def parse_graph_document(text: str) -> Graph:
    """Parse the JSON document into a Graph without structural validation.

    Only syntax and schema are checked; the result may still fail
    :func:`validate_graph`. Raises :class:`GraphSyntaxError` or
    :class:`SchemaError`.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphSyntaxError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("top-level value must be an object")
    expected = {"format_version", "nodes", "edges", "inputs", "outputs"}
    if set(doc) != expected:
        raise SchemaError(
            f"top-level keys must be exactly {sorted(expected)}, got {sorted(doc)}"
        )
    if doc["format_version"] != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {doc['format_version']!r}")

    nodes = []
    for raw in doc["nodes"]:
        if not isinstance(raw, dict) or set(raw) - {"id", "kind", "attrs"}:
            raise SchemaError(f"bad node entry: {raw!r}")
        if "id" not in raw or "kind" not in raw:
            raise SchemaError(f"node entry missing id/kind: {raw!r}")
        try:
            kind = NodeKind(raw["kind"])
        except ValueError:
            raise SchemaError(f"unknown node kind {raw['kind']!r}") from None
        nodes.append(Node(str(raw["id"]), kind, _parse_attrs(kind, raw.get("attrs"), raw["id"])))

    edges = []
    for raw in doc["edges"]:
        if not isinstance(raw, dict) or set(raw) != {"src", "dst", "dims", "bit_width"}:
            raise SchemaError(f"bad edge entry: {raw!r}")
        dims = raw["dims"]
        if not isinstance(dims, list) or not all(isinstance(d, int) for d in dims):
            raise SchemaError(f"edge dims must be a list of integers: {dims!r}")
        edges.append(
            Edge(raw["src"], raw["dst"], TensorSpec(tuple(dims), int(raw["bit_width"])))
        )

    for key in ("inputs", "outputs"):
        if not all(isinstance(i, int) and 0 <= i < len(edges) for i in doc[key]):
            raise SchemaError(f"{key} must list valid edge indices")

    return Graph(nodes=nodes, edges=edges,
                 inputs=list(doc["inputs"]), outputs=list(doc["outputs"]))


def parse_graph(text: str, bit_widths=DEFAULT_BIT_WIDTHS) -> Graph:
    """Parse the native JSON graph format.

    Schema (all keys required, unknown keys rejected)::

        {
          "format_version": 1,
          "nodes":  [{"id": str, "kind": str, "attrs": {...}}, ...],
          "edges":  [{"src": str|null, "dst": str|null,
                      "dims": [int, ...], "bit_width": int}, ...],
          "inputs":  [edge_index, ...],
          "outputs": [edge_index, ...]
        }

    Raises :class:`GraphSyntaxError`, :class:`SchemaError`,
    :class:`CycleError` or :class:`ShapeError`; any graph returned passes
    :func:`validate_graph` with zero diagnostics.
    """
    g = parse_graph_document(text)
    diags = validate_graph(g, bit_widths=bit_widths)
    if diags:
        d = diags[0]
        msg = f"{d.code} at {d.subject}: {d.message}"
        if d.code == "cycle":
            raise CycleError(msg)
        if d.code in ("shape", "bad-attrs"):
            raise ShapeError(msg)
        raise SchemaError(msg)
    return g


def serialize(g: Graph) -> str:
    """Serialize a graph to the native JSON format (inverse of parse_graph)."""
    doc = {
        "format_version": FORMAT_VERSION,
        "nodes": [
            {"id": n.id, "kind": n.kind.value, "attrs": _attrs_to_json(n)}
            for n in g.nodes
        ],
        "edges": [
            {"src": e.src, "dst": e.dst,
             "dims": list(e.tensor.dims), "bit_width": e.tensor.bit_width}
            for e in g.edges
        ],
        "inputs": list(g.inputs),
        "outputs": list(g.outputs),
    }
    return json.dumps(doc, indent=2)


# ---------------------------------------------------------------------------
# Structural checks
# ---------------------------------------------------------------------------

def topological_order(g: Graph) -> list[str]:
    """Node ids in dependency order; ties broken by lexicographic id."""
    ids = [n.id for n in g.nodes]
    indeg = {i: 0 for i in ids}
    succ = {i: [] for i in ids}
    for e in g.edges:
        if e.src in indeg and e.dst in indeg:
            succ[e.src].append(e.dst)
            indeg[e.dst] += 1
    ready = [i for i in ids if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for s in succ[nid]:
            indeg[s] -= 1
            if indeg[s] == 0:
                heapq.heappush(ready, s)
    if len(order) != len(ids):
        raise CycleError("graph contains a cycle")
    return order


def expected_output_dims(node: Node, in_dims: tuple[int, ...]):
    """Output shape implied by a node's attrs, or None when the input shape
    itself is inconsistent with the attrs."""
    a = node.attrs
    if node.kind is NodeKind.CONV:
        assert isinstance(a, ConvAttrs)
        if in_dims != (a.h_in, a.w_in, a.c_in):
            return None
        return (a.h_out, a.w_out, a.c_out)
    if node.kind in (NodeKind.GEMM, NodeKind.MATMUL):
        assert isinstance(a, GemmAttrs)
        if prod(in_dims) != a.in_features:
            return None
        return (a.out_features,)
    if node.kind is NodeKind.MAXPOOL:
        assert isinstance(a, PoolAttrs)
        if len(in_dims) != 3:
            return None
        h, w, c = in_dims
        if h < a.k_h or w < a.k_w:
            return None
        return (h // a.k_h, w // a.k_w, c)
    # Act and Quant are element-wise.
    return in_dims


def validate_graph(g: Graph, bit_widths=DEFAULT_BIT_WIDTHS) -> list[Diagnostic]:
    """Check every structural invariant; returns one diagnostic per violation
    (empty list means the graph is valid). Never raises."""
    diags: list[Diagnostic] = []
    seen = set()
    for n in g.nodes:
        if n.id in seen:
            diags.append(Diagnostic("duplicate-node", n.id, "node id not unique"))
        seen.add(n.id)
    ids = {n.id for n in g.nodes}

    for idx, e in enumerate(g.edges):
        subj = f"edge[{idx}]"
        if e.src is not None and e.src == e.dst:
            diags.append(Diagnostic("self-loop", subj, f"{e.src} -> {e.dst}"))
        for endpoint in (e.src, e.dst):
            if endpoint is not None and endpoint not in ids:
                diags.append(
                    Diagnostic("unresolved-edge", subj, f"unknown node {endpoint!r}")
                )
        if any(d < 1 for d in e.tensor.dims) or not e.tensor.dims:
            diags.append(Diagnostic("bad-dims", subj, f"dims {e.tensor.dims}"))
        if e.tensor.bit_width not in bit_widths:
            diags.append(
                Diagnostic("bad-bit-width", subj,
                           f"bit_width {e.tensor.bit_width} not in {bit_widths}")
            )

    input_edges = [i for i, e in enumerate(g.edges) if e.src is None]
    output_edges = [i for i, e in enumerate(g.edges) if e.dst is None]
    if sorted(g.inputs) != sorted(input_edges):
        diags.append(Diagnostic("boundary", "inputs",
                                "inputs list does not match edges with src=null"))
    if sorted(g.outputs) != sorted(output_edges):
        diags.append(Diagnostic("boundary", "outputs",
                                "outputs list does not match edges with dst=null"))

    if any(d.code in ("duplicate-node", "unresolved-edge", "self-loop") for d in diags):
        return diags

    try:
        topological_order(g)
    except CycleError:
        diags.append(Diagnostic("cycle", "graph", "graph is not acyclic"))
        return diags

    # Attribute invariants.
    for n in g.nodes:
        if isinstance(n.attrs, ConvAttrs):
            a = n.attrs
            if min(a.c_in, a.c_out, a.k_h, a.k_w, a.h_in, a.w_in, a.h_out, a.w_out) < 1:
                diags.append(Diagnostic("bad-attrs", n.id, "non-positive dimension"))
            elif not a.spatial_consistent():
                diags.append(
                    Diagnostic("bad-attrs", n.id,
                               "h_out/w_out inconsistent with stride/padding formula")
                )
            elif a.depthwise and a.c_in != a.c_out:
                diags.append(Diagnostic("bad-attrs", n.id, "depthwise requires c_in == c_out"))
        elif isinstance(n.attrs, GemmAttrs):
            if min(n.attrs.in_features, n.attrs.out_features) < 1:
                diags.append(Diagnostic("bad-attrs", n.id, "non-positive feature count"))
        elif isinstance(n.attrs, PoolAttrs):
            if min(n.attrs.k_h, n.attrs.k_w) < 1:
                diags.append(Diagnostic("bad-attrs", n.id, "non-positive kernel"))
        elif isinstance(n.attrs, QuantAttrs):
            if n.attrs.channels < 1:
                diags.append(Diagnostic("bad-attrs", n.id, "non-positive channel count"))

    # Shape consistency along every node (all supported kinds are unary).
    for n in g.nodes:
        ins = g.in_edges(n.id)
        outs = g.out_edges(n.id)
        if len(ins) != 1:
            diags.append(Diagnostic("arity", n.id, f"expected 1 input edge, got {len(ins)}"))
            continue
        if not outs:
            diags.append(Diagnostic("dead-end", n.id, "node has no successor edge"))
            continue
        if any(d.code == "bad-attrs" and d.subject == n.id for d in diags):
            continue
        out_dims = expected_output_dims(n, ins[0].tensor.dims)
        if out_dims is None:
            diags.append(Diagnostic("shape", n.id,
                                    f"input dims {ins[0].tensor.dims} inconsistent with attrs"))
            continue
        for e in outs:
            if e.tensor.dims != out_dims:
                diags.append(
                    Diagnostic("shape", n.id,
                               f"output edge dims {e.tensor.dims}, expected {out_dims}")
                )

    # Reachability from graph inputs.
    reachable = set()
    frontier = [g.edges[i].dst for i in g.inputs if g.edges[i].dst is not None]
    while frontier:
        nid = frontier.pop()
        if nid in reachable:
            continue
        reachable.add(nid)
        for e in g.edges:
            if e.src == nid and e.dst is not None:
                frontier.append(e.dst)
    for n in g.nodes:
        if n.id not in reachable:
            diags.append(Diagnostic("unreachable", n.id,
                                    "node not reachable from any graph input"))
    return diags
