"""Tests for NVD feed parsing, JSONL loading, balancing, and splits."""

import json
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings, strategies as st

from sectriage.corpus import (
    DataFormatError,
    Document,
    Label,
    Source,
    balance_classes,
    check_temporal,
    load_corpus_jsonl,
    make_split,
    parse_nvd_feed,
    write_corpus_jsonl,
)

UTC = timezone.utc


def nvd_item(cve_id="CVE-2020-0001", description="buffer overflow in X",
             published="2020-01-01T00:00Z", lang="en"):
    item = {
        "cve": {
            "CVE_data_meta": {"ID": cve_id},
            "description": {"description_data": []},
        },
        "publishedDate": published,
    }
    if description is not None:
        item["cve"]["description"]["description_data"].append(
            {"lang": lang, "value": description}
        )
    return item


def nvd_feed(items):
    return json.dumps({"CVE_data_type": "CVE", "CVE_Items": items}).encode()


def make_docs(n_sr, n_nonsr, start=datetime(2020, 1, 1, tzinfo=UTC)):
    docs = []
    for i in range(n_sr + n_nonsr):
        docs.append(Document(
            id=f"doc-{i:04d}",
            text=f"document number {i}",
            label=Label.SR if i < n_sr else Label.NONSR,
            created_at=start + timedelta(hours=i),
            source=Source.GITHUB_ISSUE,
        ))
    return docs


class TestParseNvdFeed:
    def test_single_item(self):
        result = parse_nvd_feed(nvd_feed([nvd_item()]))
        assert len(result.documents) == 1
        doc = result.documents[0]
        assert doc.id == "CVE-2020-0001"
        assert doc.text == "buffer overflow in X"
        assert doc.label is Label.SR
        assert doc.source is Source.CVE
        assert doc.created_at == datetime(2020, 1, 1, tzinfo=UTC)
        assert result.skipped == 0

    def test_empty_feed(self):
        result = parse_nvd_feed(nvd_feed([]))
        assert result.documents == []
        assert result.skipped == 0

    def test_missing_description_skipped_and_counted(self):
        items = [
            nvd_item("CVE-2020-0001"),
            nvd_item("CVE-2020-0002", description=None),
            nvd_item("CVE-2020-0003", description="SQL injection"),
        ]
        result = parse_nvd_feed(nvd_feed(items))
        assert [d.id for d in result.documents] == ["CVE-2020-0001", "CVE-2020-0003"]
        assert result.skipped == 1

    def test_non_english_description_skipped(self):
        result = parse_nvd_feed(nvd_feed([nvd_item(description="desbordamiento",
                                                   lang="es")]))
        assert result.documents == []
        assert result.skipped == 1

    def test_malformed_json_reports_offset(self):
        with pytest.raises(DataFormatError, match="byte offset"):
            parse_nvd_feed(b'{"CVE_Items": [')

    def test_wrong_schema_names_missing_field(self):
        with pytest.raises(DataFormatError, match="CVE_Items"):
            parse_nvd_feed(b'{"vulnerabilities": []}')


class TestLoadCorpusJsonl:
    def test_one_line(self, tmp_path):
        p = tmp_path / "corpus.jsonl"
        p.write_text(
            '{"id":"a","text":"hello","label":"sr",'
            '"created_at":"2021-01-01T00:00:00Z","source":"github"}\n'
        )
        docs = load_corpus_jsonl(p)
        assert len(docs) == 1
        assert docs[0].label is Label.SR
        assert docs[0].source is Source.GITHUB_ISSUE
        assert docs[0].created_at == datetime(2021, 1, 1, tzinfo=UTC)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "corpus.jsonl"
        p.write_text("")
        assert load_corpus_jsonl(p) == []

    def test_invalid_label_names_line(self, tmp_path):
        p = tmp_path / "corpus.jsonl"
        p.write_text('{"id":"a","text":"hello","label":"maybe"}\n')
        with pytest.raises(DataFormatError, match="line 1"):
            load_corpus_jsonl(p)

    def test_missing_field_named(self, tmp_path):
        p = tmp_path / "corpus.jsonl"
        p.write_text('{"id":"a"}\n')
        with pytest.raises(DataFormatError, match="text"):
            load_corpus_jsonl(p)

    def test_bad_timestamp(self, tmp_path):
        p = tmp_path / "corpus.jsonl"
        p.write_text('{"id":"a","text":"x","created_at":"not-a-date"}\n')
        with pytest.raises(DataFormatError, match="created_at"):
            load_corpus_jsonl(p)

    def test_unlabeled_document_allowed(self, tmp_path):
        p = tmp_path / "corpus.jsonl"
        p.write_text('{"id":"w1","text":"article text","source":"wikipedia"}\n')
        docs = load_corpus_jsonl(p)
        assert docs[0].label is None
        assert docs[0].source is Source.WIKIPEDIA

    def test_round_trip(self, tmp_path):
        docs = make_docs(2, 2)
        p = tmp_path / "corpus.jsonl"
        write_corpus_jsonl(docs, p)
        loaded = load_corpus_jsonl(p)
        assert [d.id for d in loaded] == [d.id for d in docs]
        assert [d.created_at for d in loaded] == [d.created_at for d in docs]


class TestBalanceClasses:
    def test_majority_subsampled(self):
        docs = make_docs(10, 30)
        balanced = balance_classes(docs, seed=7)
        assert sum(1 for d in balanced if d.label is Label.SR) == 10
        assert sum(1 for d in balanced if d.label is Label.NONSR) == 10

    def test_already_balanced_keeps_everything(self):
        docs = make_docs(5, 5)
        balanced = balance_classes(docs, seed=1)
        assert sorted(d.id for d in balanced) == sorted(d.id for d in docs)

    def test_deterministic(self):
        docs = make_docs(8, 20)
        a = balance_classes(docs, seed=42)
        b = balance_classes(docs, seed=42)
        assert [d.id for d in a] == [d.id for d in b]

    def test_single_label_rejected(self):
        with pytest.raises(ValueError):
            balance_classes(make_docs(5, 0), seed=0)


class TestMakeSplit:
    def test_sizes_100(self):
        split = make_split(make_docs(50, 50), seed=3)
        assert (len(split.train), len(split.validation), len(split.test)) == (70, 20, 10)

    def test_sizes_101_remainder_to_train(self):
        split = make_split(make_docs(51, 50), seed=3)
        assert (len(split.train), len(split.validation), len(split.test)) == (71, 20, 10)

    def test_partition_is_disjoint_and_exhaustive(self):
        docs = make_docs(40, 60)
        split = make_split(docs, seed=11)
        ids = [d.id for part in (split.train, split.validation, split.test) for d in part]
        assert len(ids) == len(set(ids)) == len(docs)
        assert set(ids) == {d.id for d in docs}

    def test_stratified_by_label(self):
        split = make_split(make_docs(50, 50), seed=5)
        test_sr = sum(1 for d in split.test if d.label is Label.SR)
        assert test_sr == 5

    def test_temporal_takes_newest_ids(self):
        docs = make_docs(50, 50)  # timestamps strictly increase with index
        split = make_split(docs, seed=9, temporal=True)
        newest = sorted(docs, key=lambda d: d.created_at)[-10:]
        assert {d.id for d in split.test} == {d.id for d in newest}
        assert check_temporal(split)

    def test_temporal_tied_cut_shrinks_test(self):
        docs = make_docs(50, 50)
        # The 6th-through-10th newest share one timestamp; the cut falls
        # inside that tie group, so those five go back to the train pool.
        by_time = sorted(docs, key=lambda d: d.created_at)
        shared = by_time[-12].created_at
        for d in by_time[-12:-8]:
            d.created_at = shared
        split = make_split(docs, seed=9, temporal=True)
        assert len(split.test) == 8
        assert check_temporal(split)

    def test_temporal_impossible_when_all_candidates_tied(self):
        docs = make_docs(50, 50)
        shared = datetime(2021, 6, 1, tzinfo=UTC)
        for d in sorted(docs, key=lambda d: d.created_at)[-15:]:
            d.created_at = shared
        with pytest.raises(ValueError, match="strictly-newer"):
            make_split(docs, seed=9, temporal=True)

    def test_deterministic(self):
        docs = make_docs(30, 70)
        s1 = make_split(docs, seed=123)
        s2 = make_split(docs, seed=123)
        for p1, p2 in zip(s1.parts().values(), s2.parts().values()):
            assert [d.id for d in p1] == [d.id for d in p2]

    def test_too_few_documents(self):
        with pytest.raises(ValueError):
            make_split(make_docs(4, 5), seed=0)

    def test_unlabeled_rejected(self):
        docs = make_docs(6, 6)
        docs[0].label = None
        with pytest.raises(ValueError):
            make_split(docs, seed=0)

    def test_temporal_requires_timestamps(self):
        docs = make_docs(6, 6)
        docs[3].created_at = None
        with pytest.raises(ValueError):
            make_split(docs, seed=0, temporal=True)

    @settings(max_examples=30, deadline=None)
    @given(
        n_sr=st.integers(min_value=5, max_value=40),
        n_nonsr=st.integers(min_value=5, max_value=40),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        temporal=st.booleans(),
    )
    def test_partition_property(self, n_sr, n_nonsr, seed, temporal):
        docs = make_docs(n_sr, n_nonsr)
        split = make_split(docs, seed=seed, temporal=temporal)
        ids = [d.id for part in split.parts().values() for d in part]
        assert len(ids) == len(set(ids)) == len(docs)
        n = len(docs)
        assert len(split.validation) == int(0.2 * n)
        if temporal:
            assert check_temporal(split)
            assert len(split.test) == int(0.1 * n)


class TestCheckTemporal:
    def test_strictly_newer(self):
        docs = make_docs(10, 10)
        split = make_split(docs, seed=1, temporal=True)
        assert check_temporal(split)

    def test_equal_boundary_is_false(self):
        docs = make_docs(10, 10)
        split = make_split(docs, seed=1, temporal=True)
        shared = datetime(2022, 1, 1, tzinfo=UTC)
        for d in split.train + split.validation + split.test:
            d.created_at = shared
        assert check_temporal(split) is False
