"""File format readers and writers: round trips and strict rejection."""

from __future__ import annotations

import pytest

from prprank.errors import ParseError, ValidationError
from prprank.io import (
    read_jsonl_corpus,
    read_qrels,
    read_trec_run,
    read_tsv_queries,
    write_trec_run,
)
from prprank.types import RunList

from conftest import write_jsonl_corpus, write_qrels_file, write_run_file, write_tsv_queries


class TestRunFiles:
    def test_round_trip(self, tmp_path):
        run = RunList.from_scores(
            {"q2": [("a", 2.5), ("b", 1.0)], "q1": [("c", 7.0)]}
        )
        path = tmp_path / "out.run"
        write_trec_run(run, "mytag", path)
        again = read_trec_run(path)
        assert again == run

    def test_writer_orders_queries_lexicographically(self, tmp_path):
        run = RunList.from_scores({"q10": [("a", 1.0)], "q2": [("b", 1.0)]})
        path = tmp_path / "out.run"
        write_trec_run(run, "t", path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("q10 ")
        assert lines[1].startswith("q2 ")

    def test_writer_formats_scores_with_six_decimals(self, tmp_path):
        run = RunList.from_scores({"q": [("a", 1.5)]})
        path = tmp_path / "out.run"
        write_trec_run(run, "t", path)
        assert path.read_text() == "q Q0 a 1 1.500000 t\n"

    def test_reader_resorts_by_score(self, tmp_path):
        path = write_run_file(
            tmp_path / "in.run",
            [("q", "low", 1, 1.0), ("q", "high", 2, 9.0)],
        )
        run = read_trec_run(path)
        assert run.doc_ids("q") == ["high", "low"]
        assert [e.rank for e in run.entries("q")] == [1, 2]

    def test_reader_breaks_score_ties_by_doc_id(self, tmp_path):
        path = write_run_file(
            tmp_path / "in.run",
            [("q", "bbb", 1, 3.0), ("q", "aaa", 2, 3.0)],
        )
        assert read_trec_run(path).doc_ids("q") == ["aaa", "bbb"]

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "bad.run"
        path.write_text("q Q0 d1 1 2.0\n")
        with pytest.raises(ParseError, match="bad.run:1"):
            read_trec_run(path)

    def test_bad_rank_and_score(self, tmp_path):
        path = tmp_path / "bad.run"
        path.write_text("q Q0 d1 one 2.0 t\n")
        with pytest.raises(ParseError, match="rank"):
            read_trec_run(path)
        path.write_text("q Q0 d1 1 high t\n")
        with pytest.raises(ParseError, match="score"):
            read_trec_run(path)

    def test_duplicate_doc_rejected(self, tmp_path):
        path = write_run_file(
            tmp_path / "dup.run", [("q", "d1", 1, 2.0), ("q", "d1", 2, 1.0)]
        )
        with pytest.raises(ValidationError, match="duplicate"):
            read_trec_run(path)

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "gap.run"
        path.write_text("\nq Q0 d1 1 2.0 t\n\n")
        assert read_trec_run(path).doc_ids("q") == ["d1"]

    def test_no_partial_file_on_write_error(self, tmp_path):
        run = RunList.from_scores({"q": [("a", 1.0)]})
        target = tmp_path / "sub" / "out.run"
        with pytest.raises(FileNotFoundError):
            write_trec_run(run, "t", target)
        assert not target.exists()
        assert list(tmp_path.iterdir()) == []


class TestQrelsFiles:
    def test_read(self, tmp_path):
        path = write_qrels_file(tmp_path / "q.txt", [("q1", "d1", 2), ("q1", "d2", 0)])
        qrels = read_qrels(path)
        assert qrels.grade("q1", "d1") == 2
        assert qrels.judged("q1") == {"d1": 2, "d2": 0}

    def test_bad_grade(self, tmp_path):
        path = tmp_path / "q.txt"
        path.write_text("q1 0 d1 high\n")
        with pytest.raises(ParseError, match="grade"):
            read_qrels(path)

    def test_negative_grade(self, tmp_path):
        path = tmp_path / "q.txt"
        path.write_text("q1 0 d1 -1\n")
        with pytest.raises(ValidationError, match="negative"):
            read_qrels(path)

    def test_duplicate_judgment(self, tmp_path):
        path = write_qrels_file(tmp_path / "q.txt", [("q1", "d1", 1), ("q1", "d1", 1)])
        with pytest.raises(ValidationError, match="duplicate"):
            read_qrels(path)

    def test_wrong_columns(self, tmp_path):
        path = tmp_path / "q.txt"
        path.write_text("q1 d1 1\n")
        with pytest.raises(ParseError, match="4 columns"):
            read_qrels(path)


class TestCorpusFiles:
    def test_read(self, tmp_path):
        path = write_jsonl_corpus(tmp_path / "c.jsonl", [("d1", "hello"), ("d2", "world")])
        corpus = read_jsonl_corpus(path)
        assert corpus["d2"].text == "world"

    def test_numeric_id_coerced_to_string(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": 7, "text": "x"}\n')
        assert read_jsonl_corpus(path)["7"].text == "x"

    def test_missing_keys(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": "d1"}\n')
        with pytest.raises(ParseError, match='"text"'):
            read_jsonl_corpus(path)
        path.write_text('{"text": "x"}\n')
        with pytest.raises(ParseError, match='"id"'):
            read_jsonl_corpus(path)

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": "d1", "text": "a"}\n{oops\n')
        with pytest.raises(ParseError, match=r"c\.jsonl:2"):
            read_jsonl_corpus(path)

    def test_non_string_text_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": "d1", "text": 42}\n')
        with pytest.raises(ParseError, match="string"):
            read_jsonl_corpus(path)


class TestQueryFiles:
    def test_read(self, tmp_path):
        path = write_tsv_queries(tmp_path / "q.tsv", [("q1", "what is bm25")])
        queries = read_tsv_queries(path)
        assert queries["q1"].text == "what is bm25"

    def test_text_may_contain_tabs(self, tmp_path):
        path = tmp_path / "q.tsv"
        path.write_text("q1\tleft\tright\n")
        assert read_tsv_queries(path)["q1"].text == "left\tright"

    def test_missing_tab(self, tmp_path):
        path = tmp_path / "q.tsv"
        path.write_text("q1 no tab here\n")
        with pytest.raises(ParseError, match="TAB"):
            read_tsv_queries(path)
