"""Implementation-aware cost decoration.

Every operation gets a compute annotation (MACs and BOPs) and a memory
footprint in bits, derived from its shape attributes, the bit-widths carried
by its edges, and the bound implementation choice. All arithmetic is exact
over integers.

Width symbols used throughout: ``l_x`` input features, ``l_w`` weights,
``l_acc`` accumulator, ``l_y`` quantized output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import SchemaError, WidthOverflow
from .graph import (
    ConvAttrs,
    GemmAttrs,
    Graph,
    Node,
    NodeKind,
    PoolAttrs,
    QuantAttrs,
    topological_order,
)
from .implconfig import ImplChoice

#: Largest LUT index width (address bits) the model accepts before flagging
#: the configuration as unrealizable.
DEFAULT_LUT_INDEX_CAP = 16


@dataclass(frozen=True)
class NodeCosts:
    macs: int = 0
    macs_per_pixel: int = 0
    bops: int = 0


@dataclass(frozen=True)
class MemoryFootprint:
    input_bits: int = 0
    param_bits: int = 0
    output_bits: int = 0
    temp_bits: int = 0

    @staticmethod
    def _bytes(bits: int) -> int:
        return (bits + 7) // 8

    @property
    def input_bytes(self) -> int:
        return self._bytes(self.input_bits)

    @property
    def param_bytes(self) -> int:
        return self._bytes(self.param_bits)

    @property
    def output_bytes(self) -> int:
        return self._bytes(self.output_bits)

    @property
    def temp_bytes(self) -> int:
        return self._bytes(self.temp_bits)


def lut_multiply_bits(l_w: int, l_x: int, l_acc: int,
                      cap: int = DEFAULT_LUT_INDEX_CAP) -> int:
    """Size of a partial-product table indexed by a weight/input pair."""
    if l_w + l_x > cap:
        raise WidthOverflow(f"LUT index width {l_w + l_x} exceeds cap {cap}")
    return (1 << (l_w + l_x)) * l_acc


def conv_costs(attrs: ConvAttrs, l_x: int, l_w: int, l_acc: int,
               choice: ImplChoice,
               lut_cap: int = DEFAULT_LUT_INDEX_CAP
               ) -> tuple[NodeCosts, MemoryFootprint]:
    """Costs of a convolution lowered to matrix multiplication (im2col).

    The im2col input buffer replicates each receptive field, the weight
    matrix is C_out x (C_in*k_h*k_w) plus one accumulator-wide bias per
    output channel, and the output holds accumulator-precision values.
    Depthwise convolutions apply one 2D filter per channel, so the C_in
    factor drops from the MAC and weight terms (the unrolled input still
    carries a k_h*k_w patch per channel).

    A LUT-backed multiply trades all MACs for indexed reads: MACs drop to
    zero, BOPs are unchanged, and the partial-product table lands in the
    temporary footprint.
    """
    c_in_eff = 1 if attrs.depthwise else attrs.c_in
    pixels = attrs.h_out * attrs.w_out
    input_bits = pixels * (attrs.c_in * attrs.k_h * attrs.k_w) * l_x
    param_bits = (attrs.c_out * c_in_eff * attrs.k_h * attrs.k_w) * l_w \
        + attrs.c_out * l_acc
    output_bits = attrs.c_out * pixels * l_acc

    macs_per_pixel = attrs.c_out * c_in_eff * attrs.k_h * attrs.k_w
    macs = macs_per_pixel * pixels
    bops = macs * (1 + l_acc + l_w + l_x)
    temp_bits = 0
    if choice.implementation == "lut":
        temp_bits = lut_multiply_bits(l_w, l_x, l_acc, lut_cap)
        macs = 0
        macs_per_pixel = 0
    return (
        NodeCosts(macs=macs, macs_per_pixel=macs_per_pixel, bops=bops),
        MemoryFootprint(input_bits, param_bits, output_bits, temp_bits),
    )


def gemm_costs(in_features: int, out_features: int, l_x: int, l_w: int,
               l_acc: int, choice: ImplChoice,
               lut_cap: int = DEFAULT_LUT_INDEX_CAP
               ) -> tuple[NodeCosts, MemoryFootprint]:
    """Fully-connected layer: 1x1 convolution over a single spatial point."""
    attrs = ConvAttrs(c_in=in_features, c_out=out_features, k_h=1, k_w=1,
                      h_in=1, w_in=1, h_out=1, w_out=1)
    return conv_costs(attrs, l_x, l_w, l_acc, choice, lut_cap)


def quant_costs(num_inputs: int, channels: int, l_acc: int, l_y: int,
                choice: ImplChoice,
                lut_cap: int = DEFAULT_LUT_INDEX_CAP
                ) -> tuple[NodeCosts, MemoryFootprint]:
    """Requantization from accumulator precision down to ``l_y`` bits.

    thresholds: one comparator tree of 2**l_y - 1 accumulator-wide entries
    (per channel when filter-wise), log-depth traversal per input.
    lut: direct mapping table over the whole accumulator domain.
    dyadic: one 32-bit scale (per channel when filter-wise), a few shifts
    per input.
    """
    if num_inputs < 1:
        raise ValueError("num_inputs must be >= 1")
    per_channel = channels if choice.filter_wise else 1
    impl = choice.implementation
    if impl == "thresholds":
        num_thresholds = (1 << l_y) - 1
        param_bits = num_thresholds * l_acc * per_channel
        bops = num_inputs * math.ceil(math.log2(num_thresholds)) * l_acc
    elif impl == "lut":
        if l_acc > lut_cap:
            raise WidthOverflow(f"LUT index width {l_acc} exceeds cap {lut_cap}")
        param_bits = (1 << l_acc) * l_y
        # One accumulator-wide indexed read per input (model assumption; the
        # access itself replaces the comparator cascade).
        bops = num_inputs * l_acc
    elif impl == "dyadic":
        param_bits = 32 * per_channel
        bops = num_inputs * choice.num_shifts
    else:
        raise SchemaError(f"not a quantization implementation: {impl!r}")
    footprint = MemoryFootprint(
        input_bits=num_inputs * l_acc,
        param_bits=param_bits,
        output_bits=num_inputs * l_y,
    )
    return NodeCosts(bops=bops), footprint


def act_costs(num_inputs: int, l_x: int) -> NodeCosts:
    """ReLU via one zero-comparison per input feature."""
    if num_inputs < 1:
        raise ValueError("num_inputs must be >= 1")
    return NodeCosts(bops=num_inputs * (l_x + 1))


def pool_costs(num_inputs: int, l_x: int, k_w: int, k_h: int) -> NodeCosts:
    """Max pooling via comparators over each kernel window.

    ``num_inputs`` counts pooling windows (= output elements); each window
    costs one input-width comparison per kernel cell.
    """
    if num_inputs < 1 or k_w < 1 or k_h < 1:
        raise ValueError("num_inputs and kernel dims must be >= 1")
    return NodeCosts(bops=num_inputs * l_x * k_w * k_h)


# ---------------------------------------------------------------------------
# Whole-graph decoration
# ---------------------------------------------------------------------------

@dataclass
class DecoratedGraph:
    base: Graph
    choice: dict[str, ImplChoice] = field(default_factory=dict)
    costs: dict[str, NodeCosts] = field(default_factory=dict)
    memory: dict[str, MemoryFootprint] = field(default_factory=dict)
    #: Node kind after lowering; Conv nodes implemented via im2col become
    #: MatMul, since the executed operation is a matrix multiplication.
    effective_kind: dict[str, NodeKind] = field(default_factory=dict)
    order: list[str] = field(default_factory=list)


def _decorate_node(node: Node, g: Graph, choice: ImplChoice, lut_cap: int
                   ) -> tuple[NodeCosts, MemoryFootprint, NodeKind]:
    in_t = g.in_edges(node.id)[0].tensor
    out_t = g.out_edges(node.id)[0].tensor
    kind = node.kind
    if kind is NodeKind.CONV:
        assert isinstance(node.attrs, ConvAttrs)
        costs, mem = conv_costs(node.attrs, in_t.bit_width, choice.bit_width,
                                out_t.bit_width, choice, lut_cap)
        if choice.implementation in ("im2col", "gemm"):
            kind = NodeKind.MATMUL
    elif kind in (NodeKind.GEMM, NodeKind.MATMUL):
        assert isinstance(node.attrs, GemmAttrs)
        costs, mem = gemm_costs(node.attrs.in_features, node.attrs.out_features,
                                in_t.bit_width, choice.bit_width,
                                out_t.bit_width, choice, lut_cap)
    elif kind is NodeKind.QUANT:
        attrs = node.attrs if isinstance(node.attrs, QuantAttrs) else QuantAttrs()
        costs, mem = quant_costs(in_t.num_elements, attrs.channels,
                                 in_t.bit_width, out_t.bit_width, choice, lut_cap)
    elif kind is NodeKind.ACT:
        costs = act_costs(in_t.num_elements, in_t.bit_width)
        mem = MemoryFootprint(input_bits=in_t.bits, output_bits=out_t.bits)
    elif kind is NodeKind.MAXPOOL:
        assert isinstance(node.attrs, PoolAttrs)
        costs = pool_costs(out_t.num_elements, in_t.bit_width,
                           node.attrs.k_w, node.attrs.k_h)
        mem = MemoryFootprint(input_bits=in_t.bits, output_bits=out_t.bits)
    else:
        raise SchemaError(f"cannot decorate node kind {kind}")
    return costs, mem, kind


def decorate(g: Graph, bound: dict[str, ImplChoice],
             lut_cap: int = DEFAULT_LUT_INDEX_CAP) -> DecoratedGraph:
    """Annotate every node with costs and memory per its bound choice."""
    dg = DecoratedGraph(base=g, choice=dict(bound), order=topological_order(g))
    for node_id in dg.order:
        node = g.node(node_id)
        costs, mem, eff = _decorate_node(node, g, bound[node_id], lut_cap)
        dg.costs[node_id] = costs
        dg.memory[node_id] = mem
        dg.effective_kind[node_id] = eff
    return dg


def decorate_report(dg: DecoratedGraph) -> dict:
    """JSON-able per-node compute and memory summary."""
    nodes = []
    for node_id in dg.order:
        c = dg.costs[node_id]
        m = dg.memory[node_id]
        nodes.append({
            "id": node_id,
            "kind": dg.effective_kind[node_id].value,
            "implementation": dg.choice[node_id].implementation,
            "macs": c.macs,
            "macs_per_pixel": c.macs_per_pixel,
            "bops": c.bops,
            "input_bytes": m.input_bytes,
            "param_bytes": m.param_bytes,
            "output_bytes": m.output_bytes,
            "temp_bytes": m.temp_bytes,
        })
    return {"format_version": 1, "nodes": nodes}
