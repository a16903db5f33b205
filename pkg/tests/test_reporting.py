"""Report files: JSON, aligned tables, CSV, figures."""

from __future__ import annotations

import json

import pytest

from nsix.evaluation import PerturbationSpec, generate_synthetic_corpus, run_experiment
from nsix.index import InvertedIndex
from nsix.reporting import build_tables, format_table, format_table_csv, write_report
from nsix.scoring import ScoringMethod


@pytest.fixture(scope="module")
def feature_sweep_runs():
    corpus = generate_synthetic_corpus(20, 100, 6, seed=0)
    idx = InvertedIndex()
    for name, v in corpus:
        idx.add_document(name, v)
    queries = corpus[:5]
    qrels = {name: {name} for name, _ in queries}
    return run_experiment(
        idx,
        queries,
        qrels,
        methods=[ScoringMethod("dot"), ScoringMethod("cos"), ScoringMethod("l1")],
        feature_numbers=[1, 3, None],
        min_timing_samples=1,
        warmup_iterations=0,
    )


class TestTables:
    def test_feature_number_sweep_layout(self, feature_sweep_runs):
        tables = build_tables(feature_sweep_runs)
        names = {t.name for t in tables}
        assert names == {"map_none", "latency_none"}
        map_table = next(t for t in tables if t.value_kind == "map")
        assert map_table.columns == ["1", "3", "full"]
        # Rows follow the published method order.
        assert [label for label, _ in map_table.rows] == ["dot", "l1", "cos"]

    def test_aligned_text_table(self, feature_sweep_runs):
        tables = build_tables(feature_sweep_runs)
        text = format_table(tables[0])
        lines = text.splitlines()
        assert len(lines) == 3 + 3  # title, header, rule, three method rows
        header_cols = lines[1].split()
        assert header_cols[-3:] == ["1", "3", "full"]

    def test_csv_round_trip(self, feature_sweep_runs):
        tables = build_tables(feature_sweep_runs)
        map_table = next(t for t in tables if t.value_kind == "map")
        csv = format_table_csv(map_table)
        rows = [line.split(",") for line in csv.strip().splitlines()]
        assert rows[0] == ["method", "1", "3", "full"]
        for (label, values), row in zip(map_table.rows, rows[1:]):
            assert row[0] == label
            assert [float(cell) for cell in row[1:]] == pytest.approx(values)

    def test_perturbation_sweep_uses_perturbation_columns(self):
        corpus = generate_synthetic_corpus(15, 100, 6, seed=1)
        idx = InvertedIndex()
        for name, v in corpus:
            idx.add_document(name, v)
        queries = corpus[:4]
        qrels = {name: {name} for name, _ in queries}
        runs = run_experiment(
            idx,
            queries,
            qrels,
            methods=[ScoringMethod("cos")],
            feature_numbers=[None],
            perturbations=[
                PerturbationSpec(kind="res", rate=1.0, seed=0),
                PerturbationSpec(kind="res", rate=0.6, seed=0),
            ],
            min_timing_samples=1,
            warmup_iterations=0,
        )
        tables = build_tables(runs)
        map_table = next(t for t in tables if t.value_kind == "map")
        assert map_table.name == "map_by_perturbation"
        assert map_table.columns == ["res:0.6", "res:1"]


class TestWriteReport:
    def test_writes_json_tables_and_figures(self, feature_sweep_runs, tmp_path):
        written = write_report(feature_sweep_runs, tmp_path, seed=7)
        names = {p.name for p in written}
        assert "report.json" in names
        assert {"map_none.txt", "map_none.csv", "map_none.png"} <= names
        assert {"latency_none.txt", "latency_none.csv", "latency_none.png"} <= names
        for p in written:
            assert p.exists() and p.stat().st_size > 0
        payload = json.loads((tmp_path / "report.json").read_text())
        assert payload["seed"] == 7
        assert len(payload["cells"]) == len(feature_sweep_runs)
        cell = payload["cells"][0]
        assert {"method", "feature_number", "map", "latency", "per_query_ap"} <= set(cell)

    def test_json_stable_except_timing(self, feature_sweep_runs, tmp_path):
        write_report(feature_sweep_runs, tmp_path / "a", seed=7)
        write_report(feature_sweep_runs, tmp_path / "b", seed=7)
        a = json.loads((tmp_path / "a" / "report.json").read_text())
        b = json.loads((tmp_path / "b" / "report.json").read_text())
        for cell in a["cells"] + b["cells"]:
            cell.pop("latency")
            cell.pop("latency_samples")
        assert a == b

    def test_figures_are_png(self, feature_sweep_runs, tmp_path):
        written = write_report(feature_sweep_runs, tmp_path, seed=0)
        pngs = [p for p in written if p.suffix == ".png"]
        assert pngs
        for p in pngs:
            assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
