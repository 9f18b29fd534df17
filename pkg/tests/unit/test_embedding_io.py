#!/usr/bin/env python3
"""
Unit tests for embedding, corpus and tabular artifact files.
"""

import json

import numpy as np
import pytest

from embedding_io import (
    EmbeddingRecord,
    embeddings_of,
    file_digest,
    load_corpus,
    load_embeddings,
    read_csv,
    save_corpus,
    save_embeddings,
    write_csv,
    write_json,
)
from errors import ParseError, SchemaError
from gauss_core import GaussianEmbedding
from synth_trainer import generate_corpus

HEADER = '{"format":"gikit-embeddings","version":"1.0"}\n'


def record_line(**overrides):
    data = {"id": "a", "mu": [1.0, 0.0], "log_var": [-1.0, -2.0], "normalized": True, "modality": "image"}
    data.update(overrides)
    return json.dumps(data) + "\n"


@pytest.fixture
def records():
    return [
        EmbeddingRecord(GaussianEmbedding.l2_normalized("img/0", [0.1, 0.7, 0.3], [-1.25, -3.0, 0.1]), "image"),
        EmbeddingRecord(GaussianEmbedding("cls/a photo", [0.3, 1e-17, 2.5], [-30.0, 0.0, 1.0]), "text"),
    ]


class TestEmbeddingFiles:
    def test_rewrite_is_byte_identical(self, tmp_path, records):
        first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_embeddings(records, first)
        save_embeddings(load_embeddings(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_loaded_values(self, tmp_path, records):
        path = tmp_path / "e.jsonl"
        digest = save_embeddings(records, path)
        assert digest == file_digest(path) and digest.startswith("sha256:")
        loaded = load_embeddings(path)
        assert [r.id for r in loaded] == ["img/0", "cls/a photo"]
        np.testing.assert_array_equal(loaded[0].embedding.mu, records[0].embedding.mu)
        assert loaded[0].embedding.normalized and not loaded[1].embedding.normalized
        assert [z.id for z in embeddings_of(loaded, "text")] == ["cls/a photo"]

    def test_header_first(self, tmp_path, records):
        path = tmp_path / "e.jsonl"
        save_embeddings(records, path)
        assert path.read_text().startswith(HEADER)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert load_embeddings(path) == []

    def test_bad_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(HEADER + record_line() + "{not json\n")
        with pytest.raises(ParseError) as excinfo:
            load_embeddings(path)
        assert excinfo.value.line == 3

    def test_nan_rejected(self, tmp_path):
        path = tmp_path / "nan.jsonl"
        path.write_text(HEADER + record_line().replace("-1.0", "NaN"))
        with pytest.raises(ParseError):
            load_embeddings(path)

    @pytest.mark.parametrize("line", [
        record_line(modality="audio"),
        record_line(normalized="yes"),
        record_line(log_var=[-1.0]),
        record_line(mu=[3.0, 4.0]),
        json.dumps({"id": "a", "mu": [1.0]}) + "\n",
    ])
    def test_schema_violations(self, tmp_path, line):
        path = tmp_path / "bad.jsonl"
        path.write_text(HEADER + line)
        with pytest.raises(SchemaError) as excinfo:
            load_embeddings(path)
        assert excinfo.value.line == 2

    def test_mixed_dimensions(self, tmp_path):
        path = tmp_path / "mixed.jsonl"
        path.write_text(HEADER + record_line() + record_line(id="b", mu=[1.0, 0.0, 0.0], log_var=[0.0, 0.0, 0.0]))
        with pytest.raises(SchemaError):
            load_embeddings(path)

    def test_duplicate_ids(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        path.write_text(HEADER + record_line() + record_line())
        with pytest.raises(SchemaError):
            load_embeddings(path)

    @pytest.mark.parametrize("header", ['{"format":"other","version":"1.0"}\n',
                                        '{"format":"gikit-embeddings","version":"2.0"}\n',
                                        '[1, 2]\n'])
    def test_header_checked(self, tmp_path, header):
        path = tmp_path / "h.jsonl"
        path.write_text(header + record_line())
        with pytest.raises(SchemaError):
            load_embeddings(path)

    def test_minor_version_accepted(self, tmp_path):
        path = tmp_path / "minor.jsonl"
        path.write_text('{"format":"gikit-embeddings","version":"1.3"}\n' + record_line())
        assert len(load_embeddings(path)) == 1

    def test_save_rejects_unknown_modality(self, tmp_path, records):
        with pytest.raises(SchemaError):
            save_embeddings([EmbeddingRecord(records[0].embedding, "video")], tmp_path / "x.jsonl")


class TestCorpusFiles:
    def test_round_trip(self, tmp_path):
        corpus = generate_corpus(8, 8, 6, seed=2)
        path = tmp_path / "corpus.json"
        save_corpus(corpus, path)
        restored = load_corpus(path)
        assert restored.to_dict() == corpus.to_dict()
        np.testing.assert_array_equal(restored.match, corpus.match)

    def test_wrong_format(self, tmp_path):
        path = tmp_path / "corpus.json"
        path.write_text('{"format": "gikit-embeddings", "version": "1.0"}')
        with pytest.raises(SchemaError):
            load_corpus(path)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "corpus.json"
        path.write_text("{\n  oops")
        with pytest.raises(ParseError):
            load_corpus(path)


class TestArtifacts:
    def test_csv_column_order_and_floats(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv([{"b": 0.1, "a": "x"}, {"b": float("inf"), "a": "y"}], ["a", "b"], path)
        assert path.read_text() == "a,b\nx,0.1\ny,inf\n"
        assert read_csv(path)[0] == {"a": "x", "b": "0.1"}

    def test_json_artifact(self, tmp_path):
        path = tmp_path / "out" / "w.json"
        write_json({"pi": [0.5, 0.5]}, path)
        assert json.loads(path.read_text()) == {"pi": [0.5, 0.5]}
        assert path.read_text().endswith("}\n")

    def test_json_rejects_nan(self, tmp_path):
        with pytest.raises(ValueError):
            write_json({"x": float("nan")}, tmp_path / "n.json")
