"""Figure rendering for the report paths.

Each CLI report command can render the data behind its delimited output as
PNG files: per-node compute and memory panels for decoration reports,
per-layer cycle and scratchpad-utilization panels for schedules, and
grouped cycle bars for hardware sweeps.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _bar_panel(ax, labels, values, title, ylabel, log=False):
    ax.bar(range(len(labels)), values, color="#4878cf")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    if log and any(v > 0 for v in values):
        ax.set_yscale("symlog")
    ax.grid(axis="y", alpha=0.3)


def _save(fig, out_dir: Path, name: str) -> Path:
    path = Path(out_dir) / name
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_decorate_figures(report: dict, out_dir: Path) -> list[Path]:
    """MACs, memory and BOPs panels from a decoration report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    nodes = report["nodes"]
    labels = [n["id"] for n in nodes]
    written = []

    fig, ax = plt.subplots(figsize=(max(6, len(labels) * 0.35), 4))
    _bar_panel(ax, labels, [n["macs"] for n in nodes], "Per-node MACs", "MACs",
               log=True)
    written.append(_save(fig, out_dir, "macs.png"))

    fig, axes = plt.subplots(1, 1, figsize=(max(6, len(labels) * 0.35), 4))
    bottom = [0] * len(nodes)
    for key, color in [("param_bytes", "#4878cf"), ("temp_bytes", "#d65f5f"),
                       ("output_bytes", "#6acc65")]:
        vals = [n[key] for n in nodes]
        axes.bar(range(len(labels)), vals, bottom=bottom, label=key, color=color)
        bottom = [b + v for b, v in zip(bottom, vals)]
    axes.set_xticks(range(len(labels)))
    axes.set_xticklabels(labels, rotation=90, fontsize=6)
    axes.set_title("Per-node memory footprint")
    axes.set_ylabel("bytes")
    axes.legend(fontsize=7)
    axes.grid(axis="y", alpha=0.3)
    written.append(_save(fig, out_dir, "memory.png"))

    fig, ax = plt.subplots(figsize=(max(6, len(labels) * 0.35), 4))
    _bar_panel(ax, labels, [n["bops"] for n in nodes], "Per-node BOPs", "BOPs",
               log=True)
    written.append(_save(fig, out_dir, "bops.png"))
    return written


def render_schedule_figures(report: dict, out_dir: Path) -> list[Path]:
    """Per-layer cycles and L1/L2 utilization panels from a latency report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    layers = report["layers"]
    labels = [l["layer"] for l in layers]
    written = []

    fig, ax = plt.subplots(figsize=(max(6, len(labels) * 0.45), 4))
    ax.bar(range(len(labels)), [l["compute_cycles"] for l in layers],
           label="compute", color="#4878cf")
    ax.bar(range(len(labels)), [l["dma_cycles"] for l in layers],
           bottom=[l["compute_cycles"] for l in layers],
           label="dma", color="#d65f5f")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.set_title("Per-layer cycle breakdown")
    ax.set_ylabel("cycles")
    ax.set_yscale("symlog")
    ax.legend(fontsize=7)
    ax.grid(axis="y", alpha=0.3)
    written.append(_save(fig, out_dir, "cycles.png"))

    for key, name in [("l1_peak_bytes", "l1.png"), ("l2_peak_bytes", "l2.png")]:
        fig, ax = plt.subplots(figsize=(max(6, len(labels) * 0.45), 4))
        _bar_panel(ax, labels, [l[key] for l in layers],
                   f"Per-layer {key.replace('_', ' ')}", "bytes")
        written.append(_save(fig, out_dir, name))
    return written


def render_sweep_figures(rows, out_dir: Path) -> list[Path]:
    """Total cycles per grid point, grouped by variant."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    feasible = [r for r in rows if r.feasible]
    labels = sorted({r.label for r in rows})
    fig, ax = plt.subplots(figsize=(8, 4.5))
    width = 0.8 / max(1, len(labels))
    points = sorted({(r.cores, r.l2_bytes) for r in feasible})
    for vi, label in enumerate(labels):
        xs, ys = [], []
        for pi, (cores, l2) in enumerate(points):
            match = [r for r in feasible
                     if r.label == label and r.cores == cores and r.l2_bytes == l2]
            if match:
                xs.append(pi + vi * width)
                ys.append(match[0].total_cycles)
        ax.bar(xs, ys, width=width, label=label)
    ax.set_xticks(range(len(points)))
    ax.set_xticklabels([f"{c}c/{l2 // 1024}kB" for c, l2 in points],
                       rotation=45, fontsize=7)
    ax.set_ylabel("total cycles")
    ax.set_title("Sweep: total cycles per hardware point")
    ax.legend(fontsize=7)
    ax.grid(axis="y", alpha=0.3)
    path = _save(fig, out_dir, "sweep_cycles.png")
    return [path]
