"""Design-space sweeps over hardware and implementation configurations.

A sweep evaluates the full Cartesian grid of core counts x L2 capacities x
implementation variants through the scheduler. Untileable grid points become
first-class infeasible rows (with the reason) instead of aborting the sweep,
so co-design plots can show the feasibility frontier. Accuracy is strictly a
pass-through input supplied per variant; the tool never estimates it.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from .costmodel import decorate
from .errors import MissingAccuracy, SchemaError, Untileable
from .graph import Graph
from .implconfig import ImplConfig, bind_config, parse_impl_config
from .platform import Deadline, PlatformSpec
from .scheduler import refine_and_schedule


@dataclass(frozen=True)
class Variant:
    label: str
    config: ImplConfig
    accuracy: float | None = None

    def __post_init__(self):
        if self.accuracy is not None and not 0.0 <= self.accuracy <= 1.0:
            raise SchemaError(f"variant {self.label}: accuracy must be in [0, 1]")


@dataclass
class SweepSpec:
    core_counts: list[int]
    l2_sizes: list[int]          # bytes
    variants: list[Variant]
    graph: Graph
    platform: PlatformSpec
    deadline: Deadline | None = None

    def __post_init__(self):
        if not self.core_counts or not self.l2_sizes or not self.variants:
            raise SchemaError("sweep axes must be non-empty")


@dataclass(frozen=True)
class SweepRow:
    label: str
    cores: int
    l2_bytes: int
    feasible: bool
    total_cycles: int | None
    l1_peak_bytes: int | None
    l2_peak_bytes: int | None
    deadline_feasible: bool | None
    slack_cycles: int | None
    accuracy: float | None
    reason: str | None
    per_layer: list = field(default_factory=list, compare=False)


def load_sweep_spec(text: str, base_dir: Path, graph: Graph,
                    platform: PlatformSpec,
                    deadline: Deadline | None = None) -> SweepSpec:
    """Parse a sweep JSON file::

        {"cores": [2, 4, 8], "l2_kb": [256, 320, 512],
         "variants": [{"label": "case2", "impl_config_path": "case2.yaml",
                       "accuracy": 0.77}]}

    ``impl_config_path`` entries resolve relative to ``base_dir``.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or set(doc) - {"cores", "l2_kb", "variants"}:
        raise SchemaError("sweep document must have keys cores, l2_kb, variants")
    variants = []
    for raw in doc.get("variants", []):
        if not isinstance(raw, dict) or "label" not in raw \
                or "impl_config_path" not in raw:
            raise SchemaError(f"bad variant entry: {raw!r}")
        path = Path(base_dir) / raw["impl_config_path"]
        cfg = parse_impl_config(path.read_text())
        acc = raw.get("accuracy")
        variants.append(Variant(str(raw["label"]), cfg,
                                float(acc) if acc is not None else None))
    return SweepSpec(
        core_counts=[int(c) for c in doc.get("cores", [])],
        l2_sizes=[int(kb) * 1024 for kb in doc.get("l2_kb", [])],
        variants=variants,
        graph=graph,
        platform=platform,
        deadline=deadline,
    )


def run_sweep(spec: SweepSpec) -> list[SweepRow]:
    """Evaluate the full grid; deterministic row order (variant-major, then
    cores, then L2)."""
    rows: list[SweepRow] = []
    for variant in spec.variants:
        bound = bind_config(spec.graph, variant.config)
        dg = decorate(spec.graph, bound)
        for cores in spec.core_counts:
            for l2 in spec.l2_sizes:
                platform = spec.platform.with_hardware(num_cores=cores, l2_bytes=l2)
                try:
                    _, report = refine_and_schedule(dg, platform, spec.deadline)
                except Untileable as exc:
                    rows.append(SweepRow(
                        label=variant.label, cores=cores, l2_bytes=l2,
                        feasible=False, total_cycles=None, l1_peak_bytes=None,
                        l2_peak_bytes=None, deadline_feasible=None,
                        slack_cycles=None, accuracy=variant.accuracy,
                        reason=str(exc),
                    ))
                    continue
                rows.append(SweepRow(
                    label=variant.label, cores=cores, l2_bytes=l2,
                    feasible=True, total_cycles=report.total_cycles,
                    l1_peak_bytes=max(
                        (l["l1_peak_bytes"] for l in report.layers), default=0),
                    l2_peak_bytes=max(
                        (l["l2_peak_bytes"] for l in report.layers), default=0),
                    deadline_feasible=report.feasible,
                    slack_cycles=report.slack_cycles,
                    accuracy=variant.accuracy,
                    reason=None,
                    per_layer=report.layers,
                ))
    return rows


#: Objective -> (row accessor, True when larger is better).
_OBJECTIVES = {
    "latency": (lambda r: r.total_cycles, False),
    "memory": (lambda r: r.l2_peak_bytes, False),
    "accuracy": (lambda r: r.accuracy, True),
}


def pareto_filter(rows: list[SweepRow], objectives: list[str]) -> list[SweepRow]:
    """Non-dominated rows under the selected objectives (latency and memory
    minimized, accuracy maximized). Infeasible rows are excluded; ties are
    kept."""
    if not objectives:
        raise ValueError("objectives must be non-empty")
    for obj in objectives:
        if obj not in _OBJECTIVES:
            raise ValueError(f"unknown objective {obj!r}")
    candidates = [r for r in rows if r.feasible]
    if "accuracy" in objectives and any(r.accuracy is None for r in candidates):
        raise MissingAccuracy("accuracy objective requires accuracy on every row")

    def dominates(a: SweepRow, b: SweepRow) -> bool:
        no_worse = all(
            (acc(a) >= acc(b)) if maximize else (acc(a) <= acc(b))
            for acc, maximize in (_OBJECTIVES[o] for o in objectives)
        )
        better = any(
            (acc(a) > acc(b)) if maximize else (acc(a) < acc(b))
            for acc, maximize in (_OBJECTIVES[o] for o in objectives)
        )
        return no_worse and better

    return [b for b in candidates
            if not any(dominates(a, b) for a in candidates)]


CSV_COLUMNS = [
    "label", "cores", "l2_bytes", "feasible", "total_cycles",
    "l1_peak_bytes", "l2_peak_bytes", "deadline_feasible", "slack_cycles",
    "accuracy", "reason",
]


def emit_report(rows: list[SweepRow], fmt: str) -> str:
    """Render rows as CSV (fixed column order) or versioned JSON; identical
    inputs produce byte-identical documents."""
    if not rows:
        raise ValueError("rows must be non-empty")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([
                "" if getattr(r, col) is None else getattr(r, col)
                for col in CSV_COLUMNS
            ])
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "format_version": 1,
            "rows": [
                {col: getattr(r, col) for col in CSV_COLUMNS} for r in rows
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def parse_rows(text: str) -> list[SweepRow]:
    """Re-load rows from an emitted JSON report (round-trip helper)."""
    doc = json.loads(text)
    return [SweepRow(**raw) for raw in doc["rows"]]
