"""Sentence segmentation, normalization, and dataset loading."""

import json
import string

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from prototraj.errors import DataError
from prototraj.ingest import (
    Document,
    LabeledCorpus,
    RawRecord,
    document_from_text,
    load_dataset,
    multi_hot,
    normalize_sentence,
    split_sentences,
)


class TestSplitSentences:
    def test_delimiters_removed(self):
        assert split_sentences("Great food. Bad service!") == ["Great food", " Bad service"]

    def test_empty_input(self):
        assert split_sentences("") == []

    def test_no_delimiter_single_segment(self):
        assert split_sentences("no delimiter here") == ["no delimiter here"]

    def test_question_mark(self):
        assert split_sentences("really? yes") == ["really", " yes"]

    def test_whitespace_only_segments_dropped(self):
        assert split_sentences("a.. .  .b") == ["a", "b"]

    def test_order_preserved(self):
        assert split_sentences("one. two. three.") == ["one", " two", " three"]

    @given(st.text(alphabet=st.sampled_from("ab .?!\n"), max_size=80))
    def test_never_contains_delimiters(self, text):
        for segment in split_sentences(text):
            assert not any(ch in segment for ch in ".?!")
            assert segment.strip()


class TestNormalizeSentence:
    def test_paper_rule(self):
        assert normalize_sentence("Don't go HERE!!") == "dont go here"

    def test_already_normalized(self):
        assert normalize_sentence("abc") == "abc"

    def test_punctuation_only(self):
        assert normalize_sentence("...") == ""

    def test_whitespace_collapsed(self):
        assert normalize_sentence("  The,  QUICK \t brown ") == "the quick brown"

    def test_full_ascii_punctuation_removed(self):
        assert normalize_sentence(string.punctuation) == ""

    def test_non_ascii_punctuation_kept(self):
        assert normalize_sentence("café ¡hola") == "café ¡hola"

    @given(st.text(max_size=120))
    def test_idempotent(self, text):
        once = normalize_sentence(text)
        assert normalize_sentence(once) == once


class TestDomainTypes:
    def test_raw_record_rejects_blank_text(self):
        with pytest.raises(DataError):
            RawRecord(text="   ", label=0)

    def test_raw_record_rejects_negative_label(self):
        with pytest.raises(DataError):
            RawRecord(text="x", label=-1)

    def test_document_rejects_empty_sentences(self):
        with pytest.raises(DataError):
            Document(sentences=[], label=np.array([1.0]))

    def test_document_rejects_non_multi_hot(self):
        with pytest.raises(DataError):
            Document(sentences=["a"], label=np.array([0.5, 0.5]))
        with pytest.raises(DataError):
            Document(sentences=["a"], label=np.array([0.0, 0.0]))

    def test_multi_hot(self):
        assert multi_hot(1, 3).tolist() == [0.0, 1.0, 0.0]

    def test_corpus_total_sentences(self):
        docs = [
            Document(["a", "b"], multi_hot(0, 2)),
            Document(["c"], multi_hot(1, 2)),
        ]
        corpus = LabeledCorpus(docs, num_classes=2)
        assert corpus.total_sentences == sum(d.num_sentences for d in docs) == 3
        assert corpus.all_sentences() == ["a", "b", "c"]

    def test_corpus_rejects_label_width_mismatch(self):
        with pytest.raises(DataError):
            LabeledCorpus([Document(["a"], multi_hot(0, 2))], num_classes=3)

    def test_document_from_text_none_when_empty(self):
        assert document_from_text("?!...", 0, 2) is None

    def test_document_from_text_normalizes(self):
        doc = document_from_text("Great food. Bad service!", 0, 2)
        assert doc.sentences == ["great food", "bad service"]
        assert doc.label.tolist() == [1.0, 0.0]


class TestLoadDataset:
    def test_jsonl_by_hand(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"text":"Great food. Bad service!","label":0}\n')
        corpus = load_dataset(path, num_classes=2)
        doc = corpus.documents[0]
        assert doc.sentences == ["great food", "bad service"]
        assert doc.label.tolist() == [1.0, 0.0]
        assert corpus.num_classes == 2

    def test_infers_num_classes(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"text":"a","label":0}\n{"text":"b","label":2}\n')
        assert load_dataset(path).num_classes == 3

    def test_empty_file_errors(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text("")
        with pytest.raises(DataError, match="empty corpus"):
            load_dataset(path)

    def test_label_out_of_bounds(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"text":"a","label":2}\n')
        with pytest.raises(DataError):
            load_dataset(path, num_classes=2)

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"text":"a","label":0}\nnot json\n')
        with pytest.raises(DataError, match=r"data\.jsonl:2"):
            load_dataset(path)

    def test_bool_label_rejected(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"text":"a","label":true}\n')
        with pytest.raises(DataError):
            load_dataset(path)

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"text":"a","label":0}\n\n{"text":"b","label":1}\n')
        assert len(load_dataset(path).documents) == 2

    def test_all_punctuation_docs_dropped_and_counted(self, tmp_path):
        path = tmp_path / "data.jsonl"
        records = [{"text": "fine text", "label": 0}, {"text": "?!.", "label": 1}]
        path.write_text("\n".join(json.dumps(r) for r in records))
        corpus = load_dataset(path, num_classes=2)
        assert len(corpus.documents) == 1
        assert corpus.dropped_empty == 1

    def test_csv(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text('text,label\n"Great food. Bad service!",0\nfine,1\n')
        corpus = load_dataset(path, format="csv")
        assert corpus.documents[0].sentences == ["great food", "bad service"]
        assert corpus.documents[1].label.tolist() == [0.0, 1.0]

    def test_csv_missing_column(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("text\nhello\n")
        with pytest.raises(DataError):
            load_dataset(path, format="csv")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_dataset(tmp_path / "nope.jsonl")

    def test_unknown_format(self, tmp_path):
        path = tmp_path / "data.xml"
        path.write_text("x")
        with pytest.raises(DataError):
            load_dataset(path, format="xml")
