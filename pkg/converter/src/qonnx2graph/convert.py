"""QONNX/ONNX to native JSON graph conversion.

The converter maps the six supported operators onto the native node kinds::

    Conv -> Conv      Gemm -> Gemm      MatMul -> MatMul
    Relu -> Act       MaxPool -> MaxPool    Quant -> Quant

Feature maps are re-expressed in the native HWC layout (ONNX models carry
NCHW activations). Per-tensor bit-widths come from QONNX ``Quant`` nodes;
tensors without an annotation default to 8 bits, with a warning recorded in
the :class:`ConversionReport`. Only graph structure is exported — weights,
scales and zero-points stay behind.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import prod
from pathlib import Path
from typing import Optional

from . import wire
from .model import GraphP, ModelP, NodeP, TensorP

FORMAT_VERSION = 1
ALLOWED_WIDTHS = (2, 4, 8, 16, 32)
DEFAULT_WIDTH = 8

KIND_MAP = {
    "Conv": "Conv",
    "Gemm": "Gemm",
    "MatMul": "MatMul",
    "Relu": "Act",
    "MaxPool": "MaxPool",
    "Quant": "Quant",
}


class MalformedModel(ValueError):
    """The input is not a usable ONNX model (bad protobuf, missing shapes,
    inconsistent operator arguments)."""


class UnsupportedOp(ValueError):
    """An operator outside the supported set was found in strict mode."""

    def __init__(self, message: str, report: "ConversionReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass
class ConversionReport:
    nodes_converted: int = 0
    nodes_skipped: list[dict] = field(default_factory=list)
    bitwidth_map: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "nodes_converted": self.nodes_converted,
                "nodes_skipped": self.nodes_skipped,
                "bitwidth_map": self.bitwidth_map,
                "warnings": self.warnings,
            },
            indent=2,
        )


def load_model(path: str | Path) -> ModelP:
    """Read and decode an ONNX model file. Raises :class:`MalformedModel`."""
    data = Path(path).read_bytes()
    try:
        return ModelP.decode(data)
    except wire.WireError as exc:
        raise MalformedModel(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Shape and attribute extraction
# ---------------------------------------------------------------------------

def _hwc(dims: list[Optional[int]], name: str) -> tuple[int, ...]:
    """Re-express a boundary tensor shape in HWC, dropping the batch axis.

    A symbolic leading dimension is treated as batch size 1; symbolic
    dimensions anywhere else are rejected.
    """
    if not dims:
        raise MalformedModel(f"tensor {name!r} has no shape")
    body = dims[1:] if len(dims) > 1 else dims
    if any(d is None for d in body):
        raise MalformedModel(f"tensor {name!r} has a symbolic dimension")
    fixed = [int(d) for d in body]  # type: ignore[arg-type]
    if len(fixed) == 3:  # CHW -> HWC
        c, h, w = fixed
        return (h, w, c)
    if len(fixed) in (1, 2):
        return (prod(fixed),)
    raise MalformedModel(f"tensor {name!r}: unsupported rank {len(dims)}")


def _uniform(values: list[int], what: str, node: str) -> int:
    if not values:
        raise MalformedModel(f"node {node!r}: empty {what}")
    if any(v != values[0] for v in values):
        raise MalformedModel(f"node {node!r}: non-uniform {what} {values}")
    return int(values[0])


def _weights(
    node: NodeP, index: int, initializers: dict[str, TensorP]
) -> TensorP:
    if len(node.inputs) <= index:
        raise MalformedModel(f"node {node.name!r}: missing input {index}")
    name = node.inputs[index]
    if name not in initializers:
        raise MalformedModel(
            f"node {node.name!r}: input {name!r} is not an initializer "
            "(dynamic weights are unsupported)"
        )
    return initializers[name]


def _convert_conv(node: NodeP, in_dims, initializers) -> tuple[dict, tuple]:
    if len(in_dims) != 3:
        raise MalformedModel(f"node {node.name!r}: Conv input must be H,W,C")
    h_in, w_in, c_in = in_dims
    w = _weights(node, 1, initializers)
    if len(w.dims) != 4:
        raise MalformedModel(f"node {node.name!r}: Conv weights must be 4-D")
    c_out, c_in_g, k_h, k_w = (int(d) for d in w.dims)
    group = int(node.attrs.get("group", 1))
    if group == 1:
        depthwise = False
        if c_in_g != c_in:
            raise MalformedModel(
                f"node {node.name!r}: weight channels {c_in_g} != input {c_in}"
            )
    elif group == c_in and c_in_g == 1 and c_out == c_in:
        depthwise = True
    else:
        raise MalformedModel(f"node {node.name!r}: unsupported group {group}")
    if any(int(d) != 1 for d in node.attrs.get("dilations", [1])):
        raise MalformedModel(f"node {node.name!r}: dilated Conv is unsupported")
    stride = _uniform([int(v) for v in node.attrs.get("strides", [1])],
                      "strides", node.name)
    padding = _uniform([int(v) for v in node.attrs.get("pads", [0])],
                       "pads", node.name)
    ks = [int(v) for v in node.attrs.get("kernel_shape", [k_h, k_w])]
    if ks != [k_h, k_w]:
        raise MalformedModel(
            f"node {node.name!r}: kernel_shape {ks} != weight kernel {[k_h, k_w]}"
        )
    h_out = (h_in + 2 * padding - k_h) // stride + 1
    w_out = (w_in + 2 * padding - k_w) // stride + 1
    if h_out < 1 or w_out < 1:
        raise MalformedModel(f"node {node.name!r}: kernel larger than input")
    attrs = {
        "c_in": c_in, "c_out": c_out, "k_h": k_h, "k_w": k_w,
        "h_in": h_in, "w_in": w_in, "h_out": h_out, "w_out": w_out,
        "stride": stride, "padding": padding, "depthwise": depthwise,
    }
    return attrs, (h_out, w_out, c_out)


def _convert_gemm(node: NodeP, in_dims, initializers) -> tuple[dict, tuple]:
    in_features = prod(in_dims)
    w = _weights(node, 1, initializers)
    if len(w.dims) != 2:
        raise MalformedModel(f"node {node.name!r}: weights must be 2-D")
    if node.op_type == "Gemm" and int(node.attrs.get("transB", 0)):
        out_features, w_in = (int(d) for d in w.dims)
    else:
        w_in, out_features = (int(d) for d in w.dims)
    if w_in != in_features:
        raise MalformedModel(
            f"node {node.name!r}: weight input dim {w_in} != features {in_features}"
        )
    attrs = {"in_features": in_features, "out_features": out_features}
    return attrs, (out_features,)


def _convert_maxpool(node: NodeP, in_dims) -> tuple[dict, tuple]:
    if len(in_dims) != 3:
        raise MalformedModel(f"node {node.name!r}: MaxPool input must be H,W,C")
    ks = [int(v) for v in node.attrs.get("kernel_shape", [])]
    if len(ks) != 2:
        raise MalformedModel(f"node {node.name!r}: kernel_shape must be 2-D")
    strides = [int(v) for v in node.attrs.get("strides", ks)]
    if strides != ks:
        raise MalformedModel(
            f"node {node.name!r}: only non-overlapping pooling "
            "(strides == kernel_shape) is supported"
        )
    if any(int(v) != 0 for v in node.attrs.get("pads", [0])):
        raise MalformedModel(f"node {node.name!r}: padded pooling is unsupported")
    h, w, c = in_dims
    k_h, k_w = ks
    if h < k_h or w < k_w:
        raise MalformedModel(f"node {node.name!r}: window larger than input")
    return {"k_h": k_h, "k_w": k_w}, (h // k_h, w // k_w, c)


def _quant_width(node: NodeP, initializers: dict[str, TensorP]) -> int:
    """Bit-width of a QONNX Quant node, from its bit-width input or the
    legacy ``bit_width`` attribute."""
    if len(node.inputs) >= 4 and node.inputs[3] in initializers:
        raw = initializers[node.inputs[3]].scalar()
    elif "bit_width" in node.attrs:
        raw = node.attrs["bit_width"]  # type: ignore[assignment]
    else:
        raise MalformedModel(f"node {node.name!r}: Quant without a bit-width")
    bits = int(raw)
    if bits != raw or bits not in ALLOWED_WIDTHS:
        raise MalformedModel(
            f"node {node.name!r}: bit-width {raw!r} not in {ALLOWED_WIDTHS}"
        )
    return bits


def _quant_channels(node: NodeP, initializers: dict[str, TensorP]) -> int:
    if len(node.inputs) >= 2 and node.inputs[1] in initializers:
        return max(1, initializers[node.inputs[1]].num_elements)
    return 1


# ---------------------------------------------------------------------------
# Graph conversion
# ---------------------------------------------------------------------------

def convert_graph(
    model: ModelP, skip_unsupported: bool = False
) -> tuple[dict, ConversionReport]:
    """Convert a decoded model into a native graph document plus report."""
    g: GraphP = model.graph
    report = ConversionReport()
    initializers = {t.name: t for t in g.initializers}
    input_shapes = {
        vi.name: _hwc(vi.dims, vi.name)
        for vi in g.inputs
        if vi.name not in initializers
    }

    # First pass: filter nodes, resolve skipped-node aliases, assign ids.
    alias: dict[str, str] = {}

    def resolve(tensor: str) -> str:
        while tensor in alias:
            tensor = alias[tensor]
        return tensor

    kept: list[NodeP] = []
    node_ids: list[str] = []
    used_ids: set[str] = set()
    for i, node in enumerate(g.nodes):
        if node.op_type not in KIND_MAP:
            reason = f"unsupported operator {node.op_type}"
            entry = {"name": node.name or f"#{i}", "op_type": node.op_type,
                     "reason": reason}
            report.nodes_skipped.append(entry)
            if not skip_unsupported:
                raise UnsupportedOp(f"node {node.name or i}: {reason}", report)
            data_inputs = [t for t in node.inputs if t not in initializers]
            if len(data_inputs) != 1 or len(node.outputs) != 1:
                raise UnsupportedOp(
                    f"node {node.name or i}: cannot skip {node.op_type} "
                    "(not a single-input, single-output operator)",
                    report,
                )
            alias[node.outputs[0]] = data_inputs[0]
            continue
        nid = node.name or f"{node.op_type}_{i}"
        if nid in used_ids:
            nid = f"{nid}_{i}"
        used_ids.add(nid)
        kept.append(node)
        node_ids.append(nid)

    # Second pass: shape propagation and attribute extraction, source order.
    shapes: dict[str, tuple[int, ...]] = dict(input_shapes)
    producer: dict[str, str] = {}
    data_input: list[str] = []
    json_nodes: list[dict] = []
    quant_width: dict[str, int] = {}

    for node, nid in zip(kept, node_ids):
        inputs = [resolve(t) for t in node.inputs if t not in initializers]
        if len(inputs) != 1:
            raise MalformedModel(
                f"node {node.name!r}: expected exactly one data input, "
                f"got {inputs}"
            )
        src = inputs[0]
        if src not in shapes:
            raise MalformedModel(f"node {node.name!r}: unknown shape for {src!r}")
        if not node.outputs:
            raise MalformedModel(f"node {node.name!r}: no outputs")
        in_dims = shapes[src]

        kind = KIND_MAP[node.op_type]
        attrs: Optional[dict]
        if node.op_type == "Conv":
            attrs, out_dims = _convert_conv(node, in_dims, initializers)
        elif node.op_type in ("Gemm", "MatMul"):
            attrs, out_dims = _convert_gemm(node, in_dims, initializers)
        elif node.op_type == "MaxPool":
            attrs, out_dims = _convert_maxpool(node, in_dims)
        elif node.op_type == "Quant":
            attrs = {"channels": _quant_channels(node, initializers)}
            out_dims = in_dims
            quant_width[node.outputs[0]] = _quant_width(node, initializers)
        else:  # Relu
            attrs, out_dims = None, in_dims

        data_input.append(src)
        for out in node.outputs:
            shapes[out] = out_dims
            producer[out] = nid
        json_nodes.append({"id": nid, "kind": kind, "attrs": attrs})

    # Bit-width resolution: Quant outputs are annotated; element-wise nodes
    # pass their input width through; everything else defaults to 8 bits.
    width: dict[str, int] = dict(quant_width)

    def tensor_width(name: str) -> int:
        if name in width:
            return width[name]
        bits = DEFAULT_WIDTH
        report.warnings.append(
            f"tensor {name!r} has no bit-width annotation; defaulting to "
            f"{DEFAULT_WIDTH} bits"
        )
        width[name] = bits
        return bits

    for node, nid, src in zip(kept, node_ids, data_input):
        src_bits = tensor_width(src)
        if node.op_type in ("Relu", "MaxPool"):
            for out in node.outputs:
                width.setdefault(out, src_bits)

    # Edge construction: one in-edge per node, then graph outputs.
    edges: list[dict] = []
    inputs: list[int] = []
    outputs: list[int] = []
    for nid, src in zip(node_ids, data_input):
        edge = {
            "src": producer.get(src),
            "dst": nid,
            "dims": list(shapes[src]),
            "bit_width": width[src],
        }
        if edge["src"] is None:
            inputs.append(len(edges))
        edges.append(edge)
    for vi in g.outputs:
        out = resolve(vi.name)
        if out not in shapes:
            raise MalformedModel(f"graph output {vi.name!r} is never produced")
        outputs.append(len(edges))
        edges.append({
            "src": producer.get(out),
            "dst": None,
            "dims": list(shapes[out]),
            "bit_width": tensor_width(out),
        })

    report.nodes_converted = len(kept)
    report.bitwidth_map = {name: width[name] for name in sorted(width)}
    doc = {
        "format_version": FORMAT_VERSION,
        "nodes": json_nodes,
        "edges": edges,
        "inputs": inputs,
        "outputs": outputs,
    }
    return doc, report


def convert(
    in_path: str | Path, out_path: str | Path, skip_unsupported: bool = False
) -> ConversionReport:
    """Convert a model file and write the native JSON graph to ``out_path``."""
    model = load_model(in_path)
    doc, report = convert_graph(model, skip_unsupported=skip_unsupported)
    Path(out_path).write_text(json.dumps(doc, indent=2) + "\n")
    return report


# ---------------------------------------------------------------------------
# Round-trip verification
# ---------------------------------------------------------------------------

def _topo_signature(doc: dict) -> Optional[list[str]]:
    """Node kinds in topological order (lexicographic tie-break), or None
    when the document is not a well-formed DAG description."""
    try:
        ids = [n["id"] for n in doc["nodes"]]
        kinds = {n["id"]: n["kind"] for n in doc["nodes"]}
        indeg = {i: 0 for i in ids}
        succ: dict[str, list[str]] = {i: [] for i in ids}
        for e in doc["edges"]:
            if e["src"] in indeg and e["dst"] in indeg:
                succ[e["src"]].append(e["dst"])
                indeg[e["dst"]] += 1
    except (KeyError, TypeError):
        return None
    order = []
    ready = sorted(i for i in ids if indeg[i] == 0)
    while ready:
        nid = ready.pop(0)
        order.append(kinds[nid])
        changed = False
        for s in succ[nid]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
                changed = True
        if changed:
            ready.sort()
    if len(order) != len(ids):
        return None
    return order


def roundtrip_check(
    in_path: str | Path, json_path: Optional[str | Path] = None,
    skip_unsupported: bool = False,
) -> bool:
    """True iff the emitted JSON matches the source model structurally.

    Compares node count, edge count, and the topological kind signature of a
    fresh in-memory conversion against ``json_path`` (or against the fresh
    conversion itself when no path is given, which holds by construction).
    """
    model = load_model(in_path)
    expected, _ = convert_graph(model, skip_unsupported=skip_unsupported)
    if json_path is None:
        emitted = expected
    else:
        try:
            emitted = json.loads(Path(json_path).read_text())
        except (OSError, json.JSONDecodeError):
            return False
    try:
        same_counts = (
            len(emitted["nodes"]) == len(expected["nodes"])
            and len(emitted["edges"]) == len(expected["edges"])
        )
    except (KeyError, TypeError):
        return False
    return same_counts and _topo_signature(emitted) == _topo_signature(expected)
