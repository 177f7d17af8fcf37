import csv
import json
import math

import pytest

from hmit.benchmarks import load_benchmark
from hmit.bench import (
    REPORT_COLUMNS,
    EmptyMetricsError,
    ExperimentSpec,
    IncompleteImputationError,
    RunMetrics,
    aggregate,
    compare_timing,
    export_imputed,
    export_report,
    standard_sweeps,
    run_seed,
    run_sweep,
    score,
    write_runs_jsonl,
)
from hmit.dataset import AttributeSchema, CorruptionMask, Dataset, inject_missing, load_table
from hmit.imputer import impute_all


def _scored(values, truth):
    schema = (AttributeSchema("t", categories=("a", "b")),)
    ds = Dataset(schema, [(v,) for v in values], "s")
    cells = tuple((i, 0) for i in range(len(values)))
    mask = CorruptionMask(cells, {c: t for c, t in zip(cells, truth)}, 0, 0.5)
    return score(ds, mask, {})


def test_score_counts():
    assert _scored("abab", "abab").accuracy == 1.0
    assert _scored("abab", "baba").accuracy == 0.0
    assert _scored("abab", "abaa").accuracy == 0.75


def test_score_continuous_by_bin_and_nrmse():
    schema = (AttributeSchema("v", "continuous"),)
    ds = Dataset(schema, [(1.5,), (9.0,)], "s")
    mask = CorruptionMask(((0, 0), (1, 0)), {(0, 0): 1.9, (1, 0): 1.0}, 0, 0.5)
    s = score(ds, mask, {0: (0.0, 2.0, 10.0)})
    assert s.accuracy == 0.5
    # errors 0.4 and 8.0 over a span of 10
    assert s.nrmse == pytest.approx(math.sqrt((0.04**2 + 0.8**2) / 2))


def test_score_rejects_unimputed_cell():
    schema = (AttributeSchema("t", categories=("a",)),)
    ds = Dataset(schema, [(None,)], "s")
    with pytest.raises(IncompleteImputationError):
        score(ds, CorruptionMask(((0, 0),), {(0, 0): "a"}, 0, 0.5), {})


def test_spec_run_count():
    spec = ExperimentSpec(datasets=("heart",), methods=("knn_only",), min_sup=(0.02, 0.04, 0.06, 0.08, 0.10), seeds=(0,))
    assert spec.n_runs() == 5 == len(list(spec.points()))


def test_spec_rejects_empty_axis_and_unknown_method():
    with pytest.raises(ValueError):
        ExperimentSpec(seeds=())
    with pytest.raises(ValueError):
        ExperimentSpec(methods=("magic",))


def test_default_point_and_sweep_axes():
    spec = ExperimentSpec()
    assert (spec.min_sup, spec.min_conf, spec.missing_rate, spec.k) == ((0.02,), (0.6,), (0.2,), (10,))
    sweeps = standard_sweeps()
    assert sweeps["support"].min_sup == (0.02, 0.04, 0.06, 0.08, 0.10)
    assert sweeps["missing_rate"].missing_rate == (0.1, 0.2, 0.3, 0.4)


def test_run_seed_depends_on_coordinates_only():
    assert run_seed(0, "car", 0.2, 1) == run_seed(0, "car", 0.2, 1)
    assert len({run_seed(0, "car", 0.2, r) for r in range(5)}) == 5
    assert run_seed(0, "car", 0.2, 1) != run_seed(0, "heart", 0.2, 1)
    assert run_seed(1, "car", 0.2, 1) != run_seed(0, "car", 0.2, 1)


@pytest.fixture(scope="module")
def small_sweep():
    spec = ExperimentSpec(datasets=("heart",), min_sup=(0.1, 0.2), seeds=(0, 1, 2))
    return spec, run_sweep(spec)


def test_sweep_metrics_are_consistent(small_sweep):
    spec, metrics = small_sweep
    assert len(metrics) == spec.n_runs()
    for m in metrics:
        assert m.error is None
        assert 0.0 <= m.accuracy <= 1.0 and 0.0 <= m.ar_coverage <= 1.0
        assert sum(m.method_counts.values()) == m.n_missing
        if m.method == "knn_only":
            assert m.ar_coverage == 0.0


def test_methods_share_the_corruption(small_sweep):
    _, metrics = small_sweep
    by_seed = {}
    for m in metrics:
        by_seed.setdefault(m.seed, set()).add(m.n_missing)
    assert all(len(v) == 1 for v in by_seed.values())


def test_sweep_is_deterministic(small_sweep):
    spec, metrics = small_sweep
    again = run_sweep(spec)
    strip = lambda ms: [(m.coordinates, m.seed, m.accuracy, m.ar_coverage, m.method_counts) for m in ms]
    assert strip(again) == strip(metrics)


def test_failed_runs_are_recorded(monkeypatch):
    import hmit.bench as bench

    def boom(*args, **kwargs):
        raise RuntimeError("kaboom")

    monkeypatch.setattr(bench, "knn_impute_all", boom)
    spec = ExperimentSpec(datasets=("heart",), methods=("knn_only", "partial_hmit"), seeds=(0,))
    metrics = run_sweep(spec)
    assert [m.error is not None for m in metrics] == [True, False]
    assert "kaboom" in metrics[0].error
    assert len(aggregate(metrics)) == 1


def test_csv_report_shape(small_sweep, tmp_path):
    spec, metrics = small_sweep
    out = export_report(metrics, "csv", tmp_path / "r.csv")
    rows = list(csv.reader(out.open()))
    assert tuple(rows[0]) == REPORT_COLUMNS
    assert len(rows) - 1 == spec.n_runs() // 3
    assert all(r[REPORT_COLUMNS.index("seeds")] == "3" for r in rows[1:])


def test_json_report_round_trips(small_sweep, tmp_path):
    _, metrics = small_sweep
    out = export_report(metrics, "json", tmp_path / "r.json")
    assert json.loads(out.read_text()) == aggregate(metrics)


def test_report_without_timings_is_byte_stable(small_sweep, tmp_path):
    _, metrics = small_sweep
    a = export_report(metrics, "csv", tmp_path / "a.csv", timings=False).read_bytes()
    b = export_report(run_sweep(small_sweep[0]), "csv", tmp_path / "b.csv", timings=False).read_bytes()
    assert a == b


def test_empty_report_refused(tmp_path):
    with pytest.raises(EmptyMetricsError):
        export_report([], "csv", tmp_path / "x.csv")
    failed = RunMetrics("heart", "knn_only", 0.02, 0.6, 0.8, 10, 0.2, 0, error="x")
    with pytest.raises(EmptyMetricsError):
        export_report([failed], "csv", tmp_path / "x.csv")


def test_unwritable_report_path(small_sweep, tmp_path):
    with pytest.raises(OSError):
        export_report(small_sweep[1], "csv", tmp_path / "no" / "such" / "dir.csv")


def test_runs_jsonl(small_sweep, tmp_path):
    out = write_runs_jsonl(small_sweep[1], tmp_path / "runs.jsonl")
    lines = out.read_text().splitlines()
    assert len(lines) == len(small_sweep[1])
    assert json.loads(lines[0])["dataset"] == "heart"


@pytest.mark.parametrize("fmt", ["csv", "arff"])
def test_export_imputed_round_trip(fmt, tmp_path):
    # crx also carries native gaps, which the imputer fills alongside the injected ones
    imputed, _ = impute_all(inject_missing(load_benchmark("crx"), 0.1, 0)[0])
    out = export_imputed(imputed, fmt, tmp_path / f"x.{fmt}")
    text = out.read_text()
    assert "?" not in text
    back = load_table(out, fmt, imputed.schema)
    assert back.schema == imputed.schema and back.cells == imputed.cells
    if fmt == "arff":
        for attr in imputed.schema:
            for cat in attr.categories:
                assert cat in text


def test_export_keeps_missing_as_question_mark(tmp_path):
    schema = (AttributeSchema("t", categories=("a", "b c")), AttributeSchema("v", "continuous"))
    ds = Dataset(schema, [("b c", None), (None, 2.5)], "m")
    for fmt in ("csv", "arff"):
        out = export_imputed(ds, fmt, tmp_path / f"m.{fmt}")
        assert load_table(out, fmt, schema).cells == ds.cells


def test_compare_timing_reports_both_views():
    t = compare_timing(load_benchmark("heart"), repeats=1)
    assert set(t) == {"mine_ms", "hmit_impute_ms", "knn_ms", "hmit_total_ms"}
    assert t["hmit_total_ms"] == pytest.approx(t["mine_ms"] + t["hmit_impute_ms"])
