import json

import pytest

from embed_export.corpusfile import read_corpus
from embed_export.errors import DataError

from helpers_export import write_sample_corpus


class TestReadCorpus:
    def test_round_trips_the_sample(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        statutes, cases = write_sample_corpus(path, n_statutes=2, n_cases=4)
        corpus = read_corpus(path)
        assert list(corpus.statutes) == [s["id"] for s in statutes]
        assert list(corpus.cases) == [c["id"] for c in cases]
        case = corpus.cases["c1"]
        assert case.statute_id == "s1"
        assert case.hypothesis == cases[0]["hypothesis"]
        assert corpus.cases["c4"].context == ""

    def test_case_before_its_statute_rejected(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        rows = [
            {"kind": "case", "id": "c1", "statute_id": "s1", "context": "",
             "hypothesis": "h", "gold": "entailment", "split": "train"},
            {"kind": "statute", "id": "s1", "section_label": "S", "text": "t"},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        with pytest.raises(DataError, match="unknown statute"):
            read_corpus(path)

    def test_duplicate_case_id_rejected(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        row = {"kind": "case", "id": "c1", "statute_id": "s1", "context": "",
               "hypothesis": "h", "gold": "entailment", "split": "train"}
        statute = {"kind": "statute", "id": "s1", "section_label": "S", "text": "t"}
        path.write_text("\n".join(json.dumps(r) for r in (statute, row, row)) + "\n")
        with pytest.raises(DataError, match="duplicate case id"):
            read_corpus(path)

    def test_missing_field_names_the_line(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text(json.dumps({"kind": "statute", "id": "s1"}) + "\n")
        with pytest.raises(DataError, match=r":1: .*section_label"):
            read_corpus(path)

    def test_bad_json_names_the_line(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        statute = {"kind": "statute", "id": "s1", "section_label": "S", "text": "t"}
        path.write_text(json.dumps(statute) + "\nnot json\n")
        with pytest.raises(DataError, match=r":2: not valid JSON"):
            read_corpus(path)

    def test_unknown_kind_rejected(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text(json.dumps({"kind": "ruling", "id": "r1"}) + "\n")
        with pytest.raises(DataError, match="unknown record kind"):
            read_corpus(path)

    def test_statuteless_file_rejected(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text("\n")
        with pytest.raises(DataError, match="no statute records"):
            read_corpus(path)

    def test_missing_file_is_a_data_error(self, tmp_path):
        with pytest.raises(DataError, match="cannot read"):
            read_corpus(tmp_path / "absent.jsonl")
