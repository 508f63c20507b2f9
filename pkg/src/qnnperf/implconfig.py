"""Per-node implementation configuration.

The config file is a two-level YAML map (JSON is accepted too, being a YAML
subset): node id -> {implementation, bit_width, filter_wise, num_shifts}.
A special top-level ``defaults`` key provides per-kind fallbacks::

    Quant_0:
        implementation: thresholds
        bit_width: 8
    MatMul_0:
        filter_wise: True
        implementation: LUT
        bit_width: 8
    defaults:
        Conv: {implementation: im2col, bit_width: 8}
        Quant: {implementation: dyadic, bit_width: 8}
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .errors import (
    IllegalChoice,
    InvalidBitWidth,
    UnknownImplementation,
    UnknownNodeId,
    Unresolved,
)
from .graph import DEFAULT_BIT_WIDTHS, Graph, NodeKind

IMPLEMENTATIONS = ("im2col", "lut", "thresholds", "dyadic", "comparator", "gemm")

#: Legal implementations per node kind. ``gemm`` is an alias of im2col with a
#: 1x1 kernel and unit spatial extent.
LEGAL_CHOICES = {
    NodeKind.CONV: ("im2col", "lut", "gemm"),
    NodeKind.GEMM: ("im2col", "lut", "gemm"),
    NodeKind.MATMUL: ("im2col", "lut", "gemm"),
    NodeKind.QUANT: ("thresholds", "lut", "dyadic"),
    NodeKind.ACT: ("comparator",),
    NodeKind.MAXPOOL: ("comparator",),
}


@dataclass(frozen=True)
class ImplChoice:
    implementation: str
    bit_width: int = 8
    filter_wise: bool = False
    num_shifts: int = 1


@dataclass
class ImplConfig:
    bindings: dict[str, ImplChoice] = field(default_factory=dict)
    defaults: dict[NodeKind, ImplChoice] = field(default_factory=dict)


def _parse_choice(raw, subject: str, bit_widths) -> ImplChoice:
    if not isinstance(raw, dict):
        raise UnknownImplementation(f"{subject}: entry must be a mapping")
    unknown = set(raw) - {"implementation", "bit_width", "filter_wise", "num_shifts"}
    if unknown:
        raise UnknownImplementation(f"{subject}: unknown keys {sorted(unknown)}")
    impl = str(raw.get("implementation", "")).lower()
    if impl not in IMPLEMENTATIONS:
        raise UnknownImplementation(f"{subject}: implementation {raw.get('implementation')!r}")
    bit_width = int(raw.get("bit_width", 8))
    if bit_width not in bit_widths:
        raise InvalidBitWidth(f"{subject}: bit_width {bit_width} not in {bit_widths}")
    num_shifts = int(raw.get("num_shifts", 1))
    if num_shifts < 1:
        raise InvalidBitWidth(f"{subject}: num_shifts must be positive")
    return ImplChoice(
        implementation=impl,
        bit_width=bit_width,
        filter_wise=bool(raw.get("filter_wise", False)),
        num_shifts=num_shifts,
    )


def parse_impl_config(text: str, bit_widths=DEFAULT_BIT_WIDTHS) -> ImplConfig:
    """Parse an implementation configuration document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise UnknownImplementation(f"invalid document: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise UnknownImplementation("top-level value must be a mapping")

    cfg = ImplConfig()
    for key, raw in doc.items():
        if key == "defaults":
            if not isinstance(raw, dict):
                raise UnknownImplementation("defaults: must be a mapping of node kinds")
            for kind_name, kraw in raw.items():
                try:
                    kind = NodeKind(kind_name)
                except ValueError:
                    raise UnknownImplementation(
                        f"defaults: unknown node kind {kind_name!r}"
                    ) from None
                cfg.defaults[kind] = _parse_choice(kraw, f"defaults.{kind_name}", bit_widths)
        else:
            cfg.bindings[str(key)] = _parse_choice(raw, str(key), bit_widths)
    return cfg


def serialize_impl_config(cfg: ImplConfig) -> str:
    """Render a config back to YAML (inverse of parse_impl_config)."""

    def entry(c: ImplChoice) -> dict:
        raw = {"implementation": c.implementation, "bit_width": c.bit_width}
        if c.filter_wise:
            raw["filter_wise"] = True
        if c.num_shifts != 1:
            raw["num_shifts"] = c.num_shifts
        return raw

    doc: dict = {nid: entry(c) for nid, c in cfg.bindings.items()}
    if cfg.defaults:
        doc["defaults"] = {k.value: entry(c) for k, c in cfg.defaults.items()}
    return yaml.safe_dump(doc, sort_keys=True)


def bind_config(g: Graph, cfg: ImplConfig) -> dict[str, ImplChoice]:
    """Resolve an ImplChoice for every cost-bearing node of the graph.

    Explicit per-node bindings override per-kind defaults. Act and MaxPool
    nodes fall back to their only legal choice (``comparator``) when neither
    a binding nor a default is given.
    """
    known = {n.id for n in g.nodes}
    for node_id in cfg.bindings:
        if node_id not in known:
            raise UnknownNodeId(f"config binds unknown node {node_id!r}")

    bound: dict[str, ImplChoice] = {}
    for node in g.nodes:
        choice = cfg.bindings.get(node.id) or cfg.defaults.get(node.kind)
        if choice is None:
            if node.kind in (NodeKind.ACT, NodeKind.MAXPOOL):
                choice = ImplChoice("comparator")
            else:
                raise Unresolved(f"node {node.id}: no binding and no {node.kind.value} default")
        if choice.implementation not in LEGAL_CHOICES[node.kind]:
            raise IllegalChoice(
                f"node {node.id}: {choice.implementation!r} not legal for {node.kind.value}"
            )
        bound[node.id] = choice
    return bound
