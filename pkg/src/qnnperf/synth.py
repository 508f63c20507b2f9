"""Synthetic network builders used by tests, demos and documentation.

`separable_stack` builds a compact depthwise-separable CNN (a pilot
convolution, ten depthwise+pointwise blocks, a fully-connected classifier)
over a 32x32x3 input, together with a matching implementation config.
The mixed-precision variants quantize deeper blocks to 4 or 2 bits and
switch their multiplies to LUTs, which is the kind of configuration whose
memory/latency trade-offs this toolkit is meant to screen.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import (
    ConvAttrs,
    Edge,
    GemmAttrs,
    Graph,
    Node,
    NodeKind,
    QuantAttrs,
    TensorSpec,
)
from .implconfig import ImplChoice, ImplConfig

#: (c_out, stride) of the ten separable blocks.
BLOCK_TABLE = [
    (64, 1), (128, 2), (128, 1), (256, 2), (256, 1),
    (512, 2), (512, 1), (512, 1), (512, 1), (512, 2),
]

#: Per-stage (precision, implementation); stages are pilot, blocks 1..10,
#: classifier. Convolution stages accept im2col|lut, classifier gemm|lut.
VARIANTS = {
    "baseline8": {"prec": [8] * 12, "impl": ["im2col"] * 11 + ["gemm"]},
    "mixed4_lut": {
        "prec": [8] + [4] * 10 + [8],
        "impl": ["im2col"] * 8 + ["lut"] * 3 + ["gemm"],
    },
    "low2_lut": {
        "prec": [8, 8] + [4] * 8 + [2, 4],
        "impl": ["im2col"] * 6 + ["lut"] * 5 + ["lut"],
    },
}


class _ChainBuilder:
    """Accumulates a linear graph: one pending producer edge at a time."""

    def __init__(self, in_dims, in_bits):
        self.nodes: list[Node] = []
        self.edges: list[Edge] = []
        self._src = None
        self._tensor = TensorSpec(tuple(in_dims), in_bits)

    def add(self, node: Node, out_dims, out_bits):
        self.edges.append(Edge(self._src, node.id, self._tensor))
        self.nodes.append(node)
        self._src = node.id
        self._tensor = TensorSpec(tuple(out_dims), out_bits)

    def finish(self) -> Graph:
        self.edges.append(Edge(self._src, None, self._tensor))
        inputs = [i for i, e in enumerate(self.edges) if e.src is None]
        outputs = [i for i, e in enumerate(self.edges) if e.dst is None]
        return Graph(nodes=self.nodes, edges=self.edges,
                     inputs=inputs, outputs=outputs)


def _acc_bits(weight_bits: int, act_bits: int) -> int:
    # Sub-byte operands accumulate into 16 bits, byte operands into 32.
    return 16 if min(weight_bits, act_bits) < 8 else 32


@dataclass
class _Stage:
    name: str
    prec: int
    impl: str


def separable_stack(variant: str = "baseline8", input_hw: int = 32,
                    input_ch: int = 3, num_classes: int = 10
                    ) -> tuple[Graph, ImplConfig]:
    """Build the depthwise-separable stack and its implementation config."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; have {sorted(VARIANTS)}")
    spec = VARIANTS[variant]
    stages = [
        _Stage("pilot", spec["prec"][0], spec["impl"][0]),
        *[_Stage(f"b{i + 1}", spec["prec"][i + 1], spec["impl"][i + 1])
          for i in range(len(BLOCK_TABLE))],
        _Stage("cls", spec["prec"][-1], spec["impl"][-1]),
    ]

    cfg = ImplConfig()
    h = w = input_hw
    c = input_ch
    act_bits = 8  # graph input is int8
    cb = _ChainBuilder((h, w, c), act_bits)

    def conv_unit(name: str, attrs: ConvAttrs, stage: _Stage, out_bits: int):
        nonlocal act_bits
        acc = _acc_bits(stage.prec, act_bits)
        conv_id, relu_id, quant_id = f"Conv_{name}", f"Relu_{name}", f"Quant_{name}"
        out_dims = (attrs.h_out, attrs.w_out, attrs.c_out)
        cb.add(Node(conv_id, NodeKind.CONV, attrs), out_dims, acc)
        cb.add(Node(relu_id, NodeKind.ACT), out_dims, acc)
        cb.add(Node(quant_id, NodeKind.QUANT, QuantAttrs(channels=attrs.c_out)),
               out_dims, out_bits)
        cfg.bindings[conv_id] = ImplChoice(stage.impl, bit_width=stage.prec)
        cfg.bindings[quant_id] = ImplChoice("dyadic", bit_width=out_bits)
        act_bits = out_bits

    def conv_shape(c_in, c_out, k, stride, padding, depthwise=False) -> ConvAttrs:
        h_out = (h + 2 * padding - k) // stride + 1
        w_out = (w + 2 * padding - k) // stride + 1
        return ConvAttrs(c_in=c_in, c_out=c_out, k_h=k, k_w=k, h_in=h, w_in=w,
                         h_out=h_out, w_out=w_out, stride=stride,
                         padding=padding, depthwise=depthwise)

    # Pilot convolution feeds the first block at that block's precision.
    pilot = stages[0]
    attrs = conv_shape(c, 32, k=3, stride=1, padding=1)
    conv_unit("pilot", attrs, pilot, out_bits=stages[1].prec)
    h, w, c = attrs.h_out, attrs.w_out, attrs.c_out

    for bi, (c_out, stride) in enumerate(BLOCK_TABLE):
        stage = stages[bi + 1]
        next_bits = stages[bi + 2].prec
        attrs = conv_shape(c, c, k=3, stride=stride, padding=1, depthwise=True)
        conv_unit(f"{stage.name}_dw", attrs, stage, out_bits=stage.prec)
        h, w = attrs.h_out, attrs.w_out
        attrs = conv_shape(c, c_out, k=1, stride=1, padding=0)
        conv_unit(f"{stage.name}_pw", attrs, stage, out_bits=next_bits)
        c = c_out

    cls = stages[-1]
    in_features = h * w * c
    acc = _acc_bits(cls.prec, act_bits)
    cb.add(Node("Gemm_cls", NodeKind.GEMM, GemmAttrs(in_features, num_classes)),
           (num_classes,), acc)
    cb.add(Node("Quant_cls", NodeKind.QUANT, QuantAttrs(channels=1)),
           (num_classes,), 8)
    cfg.bindings["Gemm_cls"] = ImplChoice(cls.impl, bit_width=cls.prec)
    cfg.bindings["Quant_cls"] = ImplChoice("dyadic", bit_width=8)
    return cb.finish(), cfg


def small_conv_chain() -> tuple[Graph, ImplConfig]:
    """Five-node chain (Conv, Quant, Act, Gemm, Quant): the smallest network
    exercising a convolutional layer and a fully-connected head."""
    cb = _ChainBuilder((4, 4, 3), 8)
    attrs = ConvAttrs(c_in=3, c_out=8, k_h=3, k_w=3, h_in=4, w_in=4,
                      h_out=4, w_out=4, stride=1, padding=1)
    cb.add(Node("Conv_0", NodeKind.CONV, attrs), (4, 4, 8), 32)
    cb.add(Node("Quant_0", NodeKind.QUANT, QuantAttrs(channels=8)), (4, 4, 8), 8)
    cb.add(Node("Relu_0", NodeKind.ACT), (4, 4, 8), 8)
    cb.add(Node("Gemm_0", NodeKind.GEMM, GemmAttrs(128, 10)), (10,), 32)
    cb.add(Node("Quant_1", NodeKind.QUANT, QuantAttrs(channels=1)), (10,), 8)
    cfg = ImplConfig(bindings={
        "Conv_0": ImplChoice("im2col", bit_width=8),
        "Quant_0": ImplChoice("dyadic", bit_width=8),
        "Gemm_0": ImplChoice("gemm", bit_width=8),
        "Quant_1": ImplChoice("dyadic", bit_width=8),
    })
    return cb.finish(), cfg
