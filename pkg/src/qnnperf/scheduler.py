"""Platform-aware refinement: tiling, sub-operation scheduling and the
per-layer latency bound.

Layers execute sequentially on the cluster (the controller offloads one
layer's sub-operations at a time). Within a layer, data blocks fall into
four categories: input, output, parameters and temporaries. Temporaries
(multiply LUTs, threshold trees) stay resident in L1 for the whole layer and
are never tiled; parameter and output blocks split along output channels or
features; inputs replicate across tiles for channel-wise tiling and split
for element-wise layers.

The double-buffered latency bound models two serial engines, one DMA and one
compute, with a two-deep buffer per transferable block:

* ``IN_i`` (input+parameter DMA of tile i) may start once tile ``i-2``'s
  compute has freed its buffer; ``OUT_i`` once tile i's compute is done.
* The DMA engine always picks the pending job with the earliest ready time,
  preferring input prefetch on ties.

The same contract is checked in the test suite against an independent
discrete-event simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .costmodel import DecoratedGraph
from .errors import Untileable
from .graph import ConvAttrs, GemmAttrs, NodeKind
from .platform import Deadline, PlatformSpec, effective_parallelism

_CONV_LIKE = (NodeKind.CONV, NodeKind.GEMM, NodeKind.MATMUL)


@dataclass(frozen=True)
class DataBlock:
    category: str                 # input | output | param | temp
    bits: int
    divisible_along: str = "none"  # out_channels | out_features | none

    def __post_init__(self):
        if self.category not in ("input", "output", "param", "temp"):
            raise ValueError(f"unknown category {self.category!r}")
        if self.divisible_along not in ("out_channels", "out_features", "none"):
            raise ValueError(f"unknown axis {self.divisible_along!r}")
        if self.category == "temp" and self.divisible_along != "none":
            raise ValueError("temp blocks are resident and never divisible")

    @property
    def bytes(self) -> int:
        return (self.bits + 7) // 8


def classify_blocks(node_id: str, dg: DecoratedGraph) -> list[DataBlock]:
    """Data blocks of one decorated node, with tiling divisibility.

    Channel-tiled nodes (matrix multiplies) replicate their input per tile;
    element-wise nodes split input and output along output features. LUT and
    threshold structures land in the temp category regardless of the node
    that owns them.
    """
    mem = dg.memory[node_id]
    choice = dg.choice[node_id]
    kind = dg.effective_kind[node_id]
    blocks: list[DataBlock] = []
    node = dg.base.node(node_id)
    depthwise = isinstance(node.attrs, ConvAttrs) and node.attrs.depthwise
    if kind in _CONV_LIKE:
        axis = "out_channels"
        if mem.input_bits:
            # An output-channel split of a depthwise convolution also splits
            # the input channels, so the input tiles instead of replicating.
            blocks.append(DataBlock("input", mem.input_bits,
                                    axis if depthwise else "none"))
        if mem.param_bits:
            blocks.append(DataBlock("param", mem.param_bits, axis))
        if mem.output_bits:
            blocks.append(DataBlock("output", mem.output_bits, axis))
        if mem.temp_bits:
            blocks.append(DataBlock("temp", mem.temp_bits, "none"))
    else:
        axis = "out_features"
        if mem.input_bits:
            blocks.append(DataBlock("input", mem.input_bits, axis))
        if mem.output_bits:
            blocks.append(DataBlock("output", mem.output_bits, axis))
        if mem.param_bits:
            if kind is NodeKind.QUANT and choice.implementation in ("thresholds", "lut"):
                blocks.append(DataBlock("temp", mem.param_bits, "none"))
            else:
                # Dyadic scales: a resident scalar (or per-channel vector).
                blocks.append(DataBlock("param", mem.param_bits, "none"))
        if mem.temp_bits:
            blocks.append(DataBlock("temp", mem.temp_bits, "none"))
    return blocks


# ---------------------------------------------------------------------------
# Tiling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Tiling:
    num_tiles: int
    per_tile: dict
    double_buffered: bool
    occupancy_bytes: int


def _chunk_round(nbytes: int, chunk: int) -> int:
    return ((nbytes + chunk - 1) // chunk) * chunk if nbytes else 0


def _occupancy(resident_bytes: int, div_blocks: list[DataBlock], k: int,
               double_buffered: bool, chunk: int) -> int:
    factor = 2 if double_buffered else 1
    tiles = sum(
        _chunk_round((-(-b.bits // k) + 7) // 8, chunk) for b in div_blocks
    )
    return resident_bytes + factor * tiles


def tile_layer(blocks: list[DataBlock], spec: PlatformSpec,
               want_double_buffer: bool, max_splits: int | None = None
               ) -> Tiling:
    """Minimal tile count whose largest tile fits L1.

    Resident blocks (temporaries and replicated inputs) occupy L1 once;
    divisible blocks contribute a per-tile share, doubled under
    double-buffering. When double-buffering is requested, the minimal tile
    count is searched under the doubled occupancy and wins whenever any
    such count fits; otherwise (or when nothing fits doubled) the layer
    falls back to the minimal single-buffered count. Splits are bounded by
    ``max_splits`` (the producing axis length); the last tile may be
    smaller, so occupancy is checked against the largest share.
    """
    chunk = spec.chunk_bytes
    resident = sum(
        _chunk_round(b.bytes, chunk) for b in blocks if b.divisible_along == "none"
    )
    temp = sum(_chunk_round(b.bytes, chunk) for b in blocks if b.category == "temp")
    if temp > spec.l1_bytes:
        raise Untileable(
            f"resident temporaries ({temp} B) exceed L1 ({spec.l1_bytes} B)"
        )
    if resident > spec.l1_bytes:
        raise Untileable(
            f"resident blocks ({resident} B) exceed L1 ({spec.l1_bytes} B)"
        )
    div_blocks = [b for b in blocks if b.divisible_along != "none"]
    kmax = max_splits if max_splits is not None else max(
        (b.bits for b in div_blocks), default=1
    )
    kmax = max(1, kmax)

    def minimal_k(double_buffered: bool) -> int | None:
        def fits(k: int) -> bool:
            occ = _occupancy(resident, div_blocks, k, double_buffered, chunk)
            return occ <= spec.l1_bytes

        if not fits(kmax):
            return None
        lo, hi = 1, kmax
        while lo < hi:  # occupancy is non-increasing in k
            mid = (lo + hi) // 2
            if fits(mid):
                hi = mid
            else:
                lo = mid + 1
        return lo

    k = minimal_k(True) if want_double_buffer else None
    double_buffered = k is not None
    if k is None:
        k = minimal_k(False)
    if k is None:
        raise Untileable(
            f"layer does not fit L1 even at {kmax} tiles "
            f"({_occupancy(resident, div_blocks, kmax, False, chunk)} B "
            f"> {spec.l1_bytes} B)"
        )
    per_tile = {}
    for b in blocks:
        share = -(-b.bits // k) if b.divisible_along != "none" else b.bits
        per_tile[b.category] = per_tile.get(b.category, 0) + share
    return Tiling(
        num_tiles=k,
        per_tile=per_tile,
        double_buffered=double_buffered,
        occupancy_bytes=_occupancy(resident, div_blocks, k, double_buffered, chunk),
    )


# ---------------------------------------------------------------------------
# Latency
# ---------------------------------------------------------------------------

def split_even(total: int, k: int) -> list[int]:
    """Split an integer quantity into k near-equal non-negative shares."""
    base, rem = divmod(total, k)
    return [base + (1 if i < rem else 0) for i in range(k)]


def serial_total(d: list[int], c: list[int], o: list[int]) -> int:
    """Single-buffered bound: every transfer and compute fully serialized."""
    return sum(d) + sum(c) + sum(o)


def pipelined_total(d: list[int], c: list[int], o: list[int]) -> int:
    """Double-buffered bound for per-tile input DMA ``d``, compute ``c`` and
    output DMA ``o`` cycles (see the module docstring for the contract)."""
    k = len(d)
    assert len(c) == k and len(o) == k
    if k == 0:
        return 0
    in_fin = [0] * (k + 1)
    comp_fin = [0] * (k + 1)
    out_fin = [0] * (k + 1)
    comp_known = 0
    t = 0  # DMA engine free time
    next_in, next_out = 1, 1
    while next_in <= k or next_out <= k:
        candidates = []
        if next_in <= k:
            ready = comp_fin[next_in - 2] if next_in > 2 else 0
            candidates.append((ready, 0))
        if next_out <= k and comp_known >= next_out:
            candidates.append((comp_fin[next_out], 1))
        ready, which = min(candidates)
        if which == 0:
            i = next_in
            in_fin[i] = max(t, ready) + d[i - 1]
            t = in_fin[i]
            comp_fin[i] = max(in_fin[i], comp_fin[i - 1]) + c[i - 1]
            comp_known = i
            next_in += 1
        else:
            j = next_out
            out_fin[j] = max(t, ready) + o[j - 1]
            t = out_fin[j]
            next_out += 1
    return max(comp_fin[k], out_fin[k])


@dataclass(frozen=True)
class LayerLatency:
    compute_cycles: int
    dma_cycles: int
    total_cycles: int
    num_tiles: int
    double_buffered: bool
    l1_peak_bytes: int
    l2_peak_bytes: int


def _dma_cycles(nbytes: int, bandwidth: float, setup: int) -> int:
    return math.ceil(setup + nbytes / bandwidth) if nbytes else 0


def layer_latency(macs: int, bops: int, blocks: list[DataBlock],
                  tiling: Tiling, spec: PlatformSpec,
                  lut_bytes: int | None = None) -> LayerLatency:
    """Cycle bound for one layer under a fixed tiling.

    Per-tile compute divides the MAC/BOP work by the effective parallelism
    (LUT-contention-capped when the layer reads a shared table). Input-side
    DMA carries resident blocks with the first tile and per-tile shares of
    the divisible ones; when the layer's working set overflows L2, the
    L3-to-L2 transfer of the overflow is amortized across tiles.
    """
    k = tiling.num_tiles
    work_kind = "lut_access" if lut_bytes else "mac"
    p = effective_parallelism(spec, work_kind, lut_bytes if lut_bytes else None)
    macs_split = split_even(macs, k)
    bops_split = split_even(bops, k)
    c = [
        math.ceil((m * spec.cycles_per_mac + b * spec.cycles_per_bop) / p)
        for m, b in zip(macs_split, bops_split)
    ]

    resident_in = sum(b.bytes for b in blocks
                      if b.divisible_along == "none" and b.category != "output")
    div_in = sum(b.bytes for b in blocks
                 if b.divisible_along != "none" and b.category in ("input", "param"))
    out_bytes = sum(b.bytes for b in blocks if b.category == "output")
    ws_bytes = sum(b.bytes for b in blocks)
    overflow = max(0, ws_bytes - spec.l2_bytes)
    l3_cycles = math.ceil(overflow / spec.dma_l3_l2_bytes_per_cycle) if overflow else 0
    l3_split = split_even(l3_cycles, k)

    in_shares = split_even(div_in, k)
    in_shares[0] += resident_in
    out_shares = split_even(out_bytes, k)
    d = [
        _dma_cycles(nbytes, spec.dma_l2_l1_bytes_per_cycle, spec.dma_setup_cycles)
        + extra
        for nbytes, extra in zip(in_shares, l3_split)
    ]
    o = [
        _dma_cycles(nbytes, spec.dma_l2_l1_bytes_per_cycle, spec.dma_setup_cycles)
        for nbytes in out_shares
    ]
    total = pipelined_total(d, c, o) if tiling.double_buffered \
        else serial_total(d, c, o)
    return LayerLatency(
        compute_cycles=sum(c),
        dma_cycles=sum(d) + sum(o),
        total_cycles=total,
        num_tiles=k,
        double_buffered=tiling.double_buffered,
        l1_peak_bytes=tiling.occupancy_bytes,
        l2_peak_bytes=min(ws_bytes, spec.l2_bytes),
    )


# ---------------------------------------------------------------------------
# Whole-graph scheduling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubOp:
    layer: str
    tile: int
    macs: int
    bops: int
    dma_in_bits: int
    dma_out_bits: int


@dataclass
class ScheduledLayer:
    name: str
    node_ids: list[str]
    blocks: list[DataBlock]
    tiling: Tiling
    latency: LayerLatency
    sub_ops: list[SubOp]


@dataclass
class LatencyReport:
    layers: list[dict] = field(default_factory=list)
    total_cycles: int = 0
    deadline_cycles: int | None = None
    slack_cycles: int | None = None
    feasible: bool | None = None

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "total_cycles": self.total_cycles,
            "deadline_cycles": self.deadline_cycles,
            "slack_cycles": self.slack_cycles,
            "feasible": self.feasible,
            "layers": self.layers,
        }


def _fuse_layers(dg: DecoratedGraph) -> list[list[str]]:
    """Group nodes into scheduled layers: a matrix multiply absorbs a
    directly following activation and requantization (in either order) along
    a linear chain; everything else schedules standalone."""
    g = dg.base
    consumed: set[str] = set()
    groups: list[list[str]] = []
    for nid in dg.order:
        if nid in consumed:
            continue
        consumed.add(nid)
        chain = [nid]
        if dg.effective_kind[nid] in _CONV_LIKE:
            absorbed: set[NodeKind] = set()
            cur = nid
            while True:
                outs = g.out_edges(cur)
                if len(outs) != 1 or outs[0].dst is None:
                    break
                nxt = outs[0].dst
                nk = g.node(nxt).kind
                if nk in (NodeKind.ACT, NodeKind.QUANT) and nk not in absorbed \
                        and nxt not in consumed:
                    chain.append(nxt)
                    consumed.add(nxt)
                    absorbed.add(nk)
                    cur = nxt
                else:
                    break
        groups.append(chain)
    return groups


def _layer_max_splits(dg: DecoratedGraph, primary: str) -> int:
    node = dg.base.node(primary)
    if dg.effective_kind[primary] in _CONV_LIKE:
        if isinstance(node.attrs, ConvAttrs):
            return node.attrs.c_out
        if isinstance(node.attrs, GemmAttrs):
            return node.attrs.out_features
    return max(1, dg.base.out_edges(primary)[0].tensor.num_elements)


def _layer_blocks(dg: DecoratedGraph, chain: list[str]) -> list[DataBlock]:
    """Blocks of a fused layer: the head contributes input/param/temp, the
    absorbed nodes their parameters (intermediate edges never leave L1), and
    the tail the output."""
    head, tail = chain[0], chain[-1]
    blocks = [b for b in classify_blocks(head, dg) if b.category != "output"]
    for nid in chain[1:]:
        blocks.extend(
            b for b in classify_blocks(nid, dg) if b.category in ("param", "temp")
        )
    axis = "out_channels" if dg.effective_kind[head] in _CONV_LIKE else "out_features"
    out_bits = dg.memory[tail].output_bits
    if out_bits:
        blocks.append(DataBlock("output", out_bits, axis))
    return blocks


def _layer_lut_bytes(dg: DecoratedGraph, chain: list[str]) -> int | None:
    """Shared-table footprint when the layer's main work is LUT reads."""
    if dg.choice[chain[0]].implementation == "lut":
        mem = dg.memory[chain[0]]
        nbytes = mem.temp_bytes or mem.param_bytes
        return nbytes or None
    return None


def refine_and_schedule(dg: DecoratedGraph, spec: PlatformSpec,
                        deadline: Deadline | None = None,
                        double_buffer: bool = True
                        ) -> tuple[list[ScheduledLayer], LatencyReport]:
    """Tile every layer, schedule its sub-operations and bound the latency.

    Layers run sequentially in topological order; the report carries the
    per-layer breakdown and, when a deadline is given, the slack (negative
    slack is a result, not an error). Raises :class:`Untileable` with the
    offending node when a layer's resident data cannot fit L1.
    """
    schedule: list[ScheduledLayer] = []
    report = LatencyReport()
    for chain in _fuse_layers(dg):
        name = "+".join(chain)
        blocks = _layer_blocks(dg, chain)
        macs = sum(dg.costs[n].macs for n in chain)
        bops = sum(dg.costs[n].bops for n in chain)
        try:
            tiling = tile_layer(blocks, spec, double_buffer,
                                max_splits=_layer_max_splits(dg, chain[0]))
        except Untileable as exc:
            raise Untileable(f"layer {name}: {exc}", node_id=chain[0]) from exc
        latency = layer_latency(macs, bops, blocks, tiling, spec,
                                lut_bytes=_layer_lut_bytes(dg, chain))
        k = tiling.num_tiles
        resident_in_bits = sum(b.bits for b in blocks
                               if b.divisible_along == "none" and b.category != "output")
        div_in_bits = split_even(
            sum(b.bits for b in blocks
                if b.divisible_along != "none" and b.category in ("input", "param")),
            k,
        )
        out_bits = split_even(sum(b.bits for b in blocks if b.category == "output"), k)
        macs_split = split_even(macs, k)
        bops_split = split_even(bops, k)
        sub_ops = [
            SubOp(layer=name, tile=i, macs=macs_split[i], bops=bops_split[i],
                  dma_in_bits=div_in_bits[i] + (resident_in_bits if i == 0 else 0),
                  dma_out_bits=out_bits[i])
            for i in range(k)
        ]
        schedule.append(ScheduledLayer(name, list(chain), blocks, tiling,
                                       latency, sub_ops))
        report.layers.append({
            "layer": name,
            "nodes": list(chain),
            "num_tiles": k,
            "double_buffered": tiling.double_buffered,
            "compute_cycles": latency.compute_cycles,
            "dma_cycles": latency.dma_cycles,
            "total_cycles": latency.total_cycles,
            "l1_peak_bytes": latency.l1_peak_bytes,
            "l2_peak_bytes": latency.l2_peak_bytes,
        })
        report.total_cycles += latency.total_cycles
    if deadline is not None:
        verdict = check_feasibility(report, deadline)
        report.deadline_cycles = deadline.cycles
        report.slack_cycles = verdict["slack_cycles"]
        report.feasible = verdict["feasible"]
    return schedule, report


def check_feasibility(report: LatencyReport, deadline: Deadline) -> dict:
    """Deadline verdict: feasible iff the bound fits, slack may be negative."""
    slack = deadline.cycles - report.total_cycles
    return {"feasible": slack >= 0, "slack_cycles": slack}
