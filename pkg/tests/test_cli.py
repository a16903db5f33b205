"""End-to-end CLI behavior through main()."""

from __future__ import annotations

import json

import pytest

from nsix.cli import main
from nsix.evaluation import generate_norm_heterogeneous_corpus


def write_corpus(path, docs):
    with open(path, "w", encoding="utf-8") as fp:
        for name, vec in docs:
            record = {"f": name, "s": {fid: {"s": w} for fid, w in vec}}
            fp.write(json.dumps(record, sort_keys=True) + "\n")


def write_qrels(path, qrels):
    with open(path, "w", encoding="utf-8") as fp:
        for query, relevant in qrels.items():
            fp.write(json.dumps({"query": query, "relevant": sorted(relevant)}) + "\n")


@pytest.fixture
def indexed_corpus(tmp_path):
    """Synthetic corpus generated, indexed, and ready for queries."""
    corpus_path = tmp_path / "corpus.jsonl"
    index_path = tmp_path / "corpus.nsix"
    assert main(["gen", "--docs", "30", "--features", "200", "--sparsity", "6",
                 "--seed", "5", "--out", str(corpus_path)]) == 0
    assert main(["index", "--input", str(corpus_path), "--out", str(index_path)]) == 0
    docs = [json.loads(line) for line in corpus_path.read_text().splitlines()]
    return index_path, docs


class TestGen:
    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        args = ["gen", "--docs", "10", "--features", "50", "--sparsity", "4", "--seed", "7"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_sparsity_above_features_fails(self, tmp_path):
        code = main(["gen", "--docs", "5", "--features", "10", "--sparsity", "20",
                     "--seed", "0", "--out", str(tmp_path / "x.jsonl")])
        assert code != 0

    def test_generated_corpus_reindexes(self, tmp_path, capsys):
        corpus = tmp_path / "c.jsonl"
        assert main(["gen", "--docs", "12", "--features", "60", "--sparsity", "5",
                     "--seed", "1", "--out", str(corpus)]) == 0
        capsys.readouterr()
        assert main(["index", "--input", str(corpus), "--out", str(tmp_path / "c.nsix")]) == 0
        stats = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert stats["doc_count"] == 12


class TestIndex:
    def test_empty_input(self, tmp_path, capsys):
        src = tmp_path / "empty.jsonl"
        src.write_text("")
        assert main(["index", "--input", str(src), "--out", str(tmp_path / "e.nsix")]) == 0
        stats = json.loads(capsys.readouterr().out.strip())
        assert stats["doc_count"] == 0

    def test_three_valid_lines(self, tmp_path, capsys):
        src = tmp_path / "c.jsonl"
        write_corpus(src, [
            ("a.jpg", [("x", 0.5)]),
            ("b.jpg", [("y", 0.5)]),
            ("c.jpg", [("x", 0.25), ("y", 0.25)]),
        ])
        assert main(["index", "--input", str(src), "--out", str(tmp_path / "c.nsix")]) == 0
        stats = json.loads(capsys.readouterr().out.strip())
        assert stats["doc_count"] == 3

    def test_negative_score_names_line(self, tmp_path, capsys):
        src = tmp_path / "bad.jsonl"
        src.write_text(
            json.dumps({"f": "a.jpg", "s": {"x": {"s": 0.5}}}) + "\n"
            + json.dumps({"f": "b.jpg", "s": {"x": {"s": -0.5}}}) + "\n"
        )
        code = main(["index", "--input", str(src), "--out", str(tmp_path / "bad.nsix")])
        assert code == 2
        assert "line 2" in capsys.readouterr().err

    def test_duplicate_file_names_line(self, tmp_path, capsys):
        src = tmp_path / "dup.jsonl"
        line = json.dumps({"f": "a.jpg", "s": {"x": {"s": 0.5}}})
        src.write_text(line + "\n" + line + "\n")
        code = main(["index", "--input", str(src), "--out", str(tmp_path / "dup.nsix")])
        assert code == 2
        assert "line 2" in capsys.readouterr().err

    def test_refuses_overwrite_without_force(self, tmp_path, capsys):
        src = tmp_path / "c.jsonl"
        write_corpus(src, [("a.jpg", [("x", 0.5)])])
        out = tmp_path / "c.nsix"
        assert main(["index", "--input", str(src), "--out", str(out)]) == 0
        assert main(["index", "--input", str(src), "--out", str(out)]) == 1
        capsys.readouterr()
        assert main(["index", "--input", str(src), "--out", str(out), "--force"]) == 0

    def test_max_features(self, tmp_path, capsys):
        src = tmp_path / "c.jsonl"
        write_corpus(src, [("a.jpg", [("x", 0.5), ("y", 0.3), ("z", 0.1)])])
        assert main(["index", "--input", str(src), "--out", str(tmp_path / "c.nsix"),
                     "--max-features", "2"]) == 0
        stats = json.loads(capsys.readouterr().out.strip())
        assert stats["posting_count"] == 2


class TestSearch:
    def test_self_query_ranks_first_with_cosine(self, tmp_path, indexed_corpus, capsys):
        index_path, docs = indexed_corpus
        query_path = tmp_path / "q.jsonl"
        query_path.write_text(json.dumps(docs[4]) + "\n")
        capsys.readouterr()
        assert main(["search", "--index", str(index_path), "--query", str(query_path),
                     "--method", "cos"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        top = json.loads(lines[0])
        assert top["rank"] == 1
        assert top["file"] == docs[4]["f"]

    def test_rerank_window_caps_hits(self, tmp_path, indexed_corpus, capsys):
        index_path, docs = indexed_corpus
        query_path = tmp_path / "q.jsonl"
        query_path.write_text(json.dumps(docs[0]) + "\n")
        capsys.readouterr()
        assert main(["search", "--index", str(index_path), "--query", str(query_path),
                     "--method", "dot+cos", "--rerank-k", "10"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) <= 10

    def test_modes_share_positive_prefix(self, tmp_path, indexed_corpus, capsys):
        index_path, docs = indexed_corpus
        query_path = tmp_path / "q.jsonl"
        query_path.write_text(json.dumps(docs[7]) + "\n")
        outputs = {}
        for mode in ("exhaustive", "posting"):
            capsys.readouterr()
            assert main(["search", "--index", str(index_path), "--query", str(query_path),
                         "--method", "cos", "--mode", mode]) == 0
            outputs[mode] = [json.loads(line) for line in capsys.readouterr().out.strip().splitlines()]
        positive = [h for h in outputs["exhaustive"] if h["score"] > 0]
        assert outputs["posting"][: len(positive)] == positive

    def test_sorted_json_keys(self, tmp_path, indexed_corpus, capsys):
        index_path, docs = indexed_corpus
        query_path = tmp_path / "q.jsonl"
        query_path.write_text(json.dumps(docs[0]) + "\n")
        capsys.readouterr()
        assert main(["search", "--index", str(index_path), "--query", str(query_path),
                     "--method", "dot", "--top-k", "3"]) == 0
        line = capsys.readouterr().out.strip().splitlines()[0]
        assert list(json.loads(line)) == sorted(json.loads(line))

    def test_multi_document_query_file_rejected(self, tmp_path, indexed_corpus, capsys):
        index_path, docs = indexed_corpus
        query_path = tmp_path / "q2.jsonl"
        query_path.write_text(json.dumps(docs[0]) + "\n" + json.dumps(docs[1]) + "\n")
        assert main(["search", "--index", str(index_path), "--query", str(query_path),
                     "--method", "dot"]) == 2

    def test_unknown_method_is_usage_error(self, tmp_path, indexed_corpus):
        index_path, docs = indexed_corpus
        query_path = tmp_path / "q.jsonl"
        query_path.write_text(json.dumps(docs[0]) + "\n")
        assert main(["search", "--index", str(index_path), "--query", str(query_path),
                     "--method", "bm25"]) == 1

    def test_corrupt_index_is_data_error(self, tmp_path, indexed_corpus):
        index_path, docs = indexed_corpus
        blob = bytearray(index_path.read_bytes())
        blob[len(blob) // 2] ^= 0xFF
        bad = tmp_path / "bad.nsix"
        bad.write_bytes(bytes(blob))
        query_path = tmp_path / "q.jsonl"
        query_path.write_text(json.dumps(docs[0]) + "\n")
        assert main(["search", "--index", str(bad), "--query", str(query_path),
                     "--method", "dot"]) == 2


class TestEval:
    def test_self_retrieval_metrics_hit_one(self, tmp_path, indexed_corpus, capsys):
        index_path, docs = indexed_corpus
        queries_path = tmp_path / "queries.jsonl"
        queries_path.write_text("".join(json.dumps(d) + "\n" for d in docs[:5]))
        qrels_path = tmp_path / "qrels.jsonl"
        write_qrels(qrels_path, {d["f"]: {d["f"]} for d in docs[:5]})
        out_dir = tmp_path / "report"
        assert main(["eval", "--index", str(index_path), "--queries", str(queries_path),
                     "--qrels", str(qrels_path), "--methods", "l1,l2,cos",
                     "--feature-numbers", "full", "--out", str(out_dir)]) == 0
        payload = json.loads((out_dir / "report.json").read_text())
        assert all(cell["map"] == 1.0 for cell in payload["cells"])
        assert (out_dir / "map_none.txt").exists()
        assert (out_dir / "map_none.csv").exists()
        assert (out_dir / "map_none.png").exists()

    def test_dot_below_cosine_on_fixture(self, tmp_path, capsys):
        docs, queries, qrels = generate_norm_heterogeneous_corpus(8)
        corpus_path = tmp_path / "fixture.jsonl"
        write_corpus(corpus_path, [(n, list(v)) for n, v in docs])
        index_path = tmp_path / "fixture.nsix"
        assert main(["index", "--input", str(corpus_path), "--out", str(index_path)]) == 0
        queries_path = tmp_path / "queries.jsonl"
        write_corpus(queries_path, [(n, list(v)) for n, v in queries])
        qrels_path = tmp_path / "qrels.jsonl"
        write_qrels(qrels_path, qrels)
        out_dir = tmp_path / "report"
        assert main(["eval", "--index", str(index_path), "--queries", str(queries_path),
                     "--qrels", str(qrels_path), "--methods", "dot,cos",
                     "--feature-numbers", "full", "--out", str(out_dir)]) == 0
        payload = json.loads((out_dir / "report.json").read_text())
        by_method = {c["method"]: c["map"] for c in payload["cells"]}
        assert by_method["dot"] < by_method["cos"] == 1.0

    def test_perturbation_sweep_table(self, tmp_path, indexed_corpus, capsys):
        index_path, docs = indexed_corpus
        queries_path = tmp_path / "queries.jsonl"
        queries_path.write_text("".join(json.dumps(d) + "\n" for d in docs[:4]))
        qrels_path = tmp_path / "qrels.jsonl"
        write_qrels(qrels_path, {d["f"]: {d["f"]} for d in docs[:4]})
        out_dir = tmp_path / "report"
        assert main(["eval", "--index", str(index_path), "--queries", str(queries_path),
                     "--qrels", str(qrels_path), "--methods", "cos",
                     "--feature-numbers", "full",
                     "--perturb", "res:1.0,res:0.6,res:0.2", "--seed", "3",
                     "--out", str(out_dir)]) == 0
        table = (out_dir / "map_by_perturbation.txt").read_text()
        assert "res:0.2" in table and "res:1" in table
        assert (out_dir / "map_by_perturbation.png").exists()

    def test_grid_cardinality(self, tmp_path, indexed_corpus, capsys):
        index_path, docs = indexed_corpus
        queries_path = tmp_path / "queries.jsonl"
        queries_path.write_text("".join(json.dumps(d) + "\n" for d in docs[:3]))
        qrels_path = tmp_path / "qrels.jsonl"
        write_qrels(qrels_path, {d["f"]: {d["f"]} for d in docs[:3]})
        out_dir = tmp_path / "report"
        assert main(["eval", "--index", str(index_path), "--queries", str(queries_path),
                     "--qrels", str(qrels_path), "--methods", "dot,cos",
                     "--feature-numbers", "2,4,6", "--out", str(out_dir)]) == 0
        payload = json.loads((out_dir / "report.json").read_text())
        assert len(payload["cells"]) == 6


class TestStats:
    def test_prints_stats(self, indexed_corpus, capsys):
        index_path, docs = indexed_corpus
        capsys.readouterr()
        assert main(["stats", "--index", str(index_path)]) == 0
        stats = json.loads(capsys.readouterr().out.strip())
        assert stats["doc_count"] == 30

    def test_missing_index_is_data_error(self, tmp_path):
        assert main(["stats", "--index", str(tmp_path / "nope.nsix")]) == 2


class TestUsage:
    def test_no_command(self):
        assert main([]) == 1

    def test_bad_flag(self):
        assert main(["stats", "--bogus"]) == 1
