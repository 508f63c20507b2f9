import json
from pathlib import Path

import pytest

from qnnperf import synth
from qnnperf.errors import MissingAccuracy, SchemaError
from qnnperf.implconfig import serialize_impl_config
from qnnperf.platform import PlatformSpec
from qnnperf.sweep import (
    SweepRow,
    SweepSpec,
    Variant,
    emit_report,
    load_sweep_spec,
    pareto_filter,
    parse_rows,
    run_sweep,
)


@pytest.fixture
def base_platform():
    return PlatformSpec(num_cores=8, num_banks=16, l1_bytes=64 * 1024,
                        l2_bytes=512 * 1024)


@pytest.fixture
def two_variant_spec(base_platform):
    graph, cfg_a = synth.separable_stack("baseline8")
    _, cfg_b = synth.separable_stack("mixed4_lut")
    return SweepSpec(
        core_counts=[2, 4, 8],
        l2_sizes=[256 * 1024, 320 * 1024, 512 * 1024],
        variants=[Variant("a", cfg_a, accuracy=0.82),
                  Variant("b", cfg_b, accuracy=0.79)],
        graph=graph,
        platform=base_platform,
    )


def test_grid_size(two_variant_spec):
    rows = run_sweep(two_variant_spec)
    assert len(rows) == 2 * 3 * 3
    assert all(r.feasible for r in rows)


def test_degenerate_grid_matches_direct_call(base_platform):
    graph, cfg = synth.separable_stack("baseline8")
    spec = SweepSpec([8], [512 * 1024], [Variant("solo", cfg)], graph,
                     base_platform)
    from qnnperf.costmodel import decorate
    from qnnperf.implconfig import bind_config
    from qnnperf.scheduler import refine_and_schedule

    rows = run_sweep(spec)
    _, report = refine_and_schedule(decorate(graph, bind_config(graph, cfg)),
                                    base_platform)
    assert len(rows) == 1
    assert rows[0].total_cycles == report.total_cycles


def test_untileable_becomes_infeasible_row(base_platform):
    graph, cfg = synth.separable_stack("baseline8")
    cramped = PlatformSpec(num_cores=2, num_banks=1, l1_bytes=256,
                           l2_bytes=256 * 1024)
    spec = SweepSpec([2], [256 * 1024], [Variant("v", cfg)], graph, cramped)
    rows = run_sweep(spec)
    assert len(rows) == 1
    assert rows[0].feasible is False
    assert rows[0].reason and rows[0].total_cycles is None


def test_axis_monotonicity(two_variant_spec):
    rows = run_sweep(two_variant_spec)
    by_key = {(r.label, r.cores, r.l2_bytes): r.total_cycles for r in rows}
    for label in ("a", "b"):
        for l2 in two_variant_spec.l2_sizes:
            seq = [by_key[(label, m, l2)] for m in (2, 4, 8)]
            assert seq == sorted(seq, reverse=True)
        for m in (2, 4, 8):
            seq = [by_key[(label, m, l2)]
                   for l2 in two_variant_spec.l2_sizes]
            assert seq == sorted(seq, reverse=True)


class TestPareto:
    def _row(self, label, cycles, mem, acc):
        return SweepRow(label=label, cores=2, l2_bytes=mem, feasible=True,
                        total_cycles=cycles, l1_peak_bytes=0,
                        l2_peak_bytes=mem, deadline_feasible=None,
                        slack_cycles=None, accuracy=acc, reason=None)

    def test_strict_dominance(self):
        rows = [self._row("fast", 10, 100, 0.8),
                self._row("slow", 12, 100, 0.7)]
        assert pareto_filter(rows, ["latency", "accuracy"]) == [rows[0]]

    def test_incomparable_kept(self):
        rows = [self._row("a", 10, 100, 0.7), self._row("b", 12, 100, 0.8)]
        assert pareto_filter(rows, ["latency", "accuracy"]) == rows

    def test_single_row(self):
        rows = [self._row("only", 10, 100, 0.9)]
        assert pareto_filter(rows, ["latency"]) == rows

    def test_missing_accuracy(self):
        rows = [self._row("x", 10, 100, None)]
        with pytest.raises(MissingAccuracy):
            pareto_filter(rows, ["accuracy"])

    def test_excluded_rows_are_dominated(self, two_variant_spec):
        rows = run_sweep(two_variant_spec)
        front = pareto_filter(rows, ["latency", "memory", "accuracy"])
        assert front
        front_set = set(map(id, front))
        for row in rows:
            if id(row) in front_set:
                continue
            assert any(
                f.total_cycles <= row.total_cycles
                and f.l2_peak_bytes <= row.l2_peak_bytes
                and f.accuracy >= row.accuracy
                and (f.total_cycles < row.total_cycles
                     or f.l2_peak_bytes < row.l2_peak_bytes
                     or f.accuracy > row.accuracy)
                for f in front
            ), row

    def test_empty_objectives_rejected(self):
        with pytest.raises(ValueError):
            pareto_filter([self._row("x", 1, 1, 1.0)], [])


class TestReports:
    def test_csv_shape(self, two_variant_spec):
        rows = run_sweep(two_variant_spec)
        text = emit_report(rows, "csv")
        lines = text.strip().split("\n")
        assert len(lines) == 1 + len(rows)
        assert lines[0].startswith("label,cores,l2_bytes")

    def test_json_roundtrip(self, two_variant_spec):
        rows = run_sweep(two_variant_spec)
        again = parse_rows(emit_report(rows, "json"))
        assert [r.total_cycles for r in again] == \
            [r.total_cycles for r in rows]

    def test_deterministic(self, two_variant_spec):
        a = run_sweep(two_variant_spec)
        b = run_sweep(two_variant_spec)
        assert emit_report(a, "csv") == emit_report(b, "csv")
        assert emit_report(a, "json") == emit_report(b, "json")

    def test_empty_rows_rejected(self):
        with pytest.raises(ValueError):
            emit_report([], "csv")


def test_load_sweep_spec(tmp_path: Path, base_platform):
    graph, cfg = synth.separable_stack("baseline8")
    (tmp_path / "cfg.yaml").write_text(serialize_impl_config(cfg))
    doc = {"cores": [2, 4], "l2_kb": [256],
           "variants": [{"label": "v", "impl_config_path": "cfg.yaml",
                         "accuracy": 0.8}]}
    spec = load_sweep_spec(json.dumps(doc), tmp_path, graph, base_platform)
    assert spec.core_counts == [2, 4]
    assert spec.l2_sizes == [256 * 1024]
    assert spec.variants[0].accuracy == 0.8


def test_load_sweep_spec_rejects_garbage(tmp_path, base_platform):
    graph, _ = synth.separable_stack("baseline8")
    with pytest.raises(SchemaError):
        load_sweep_spec("[1, 2]", tmp_path, graph, base_platform)
    with pytest.raises(SchemaError):
        load_sweep_spec('{"cores": [], "l2_kb": [], "variants": []}',
                        tmp_path, graph, base_platform)
