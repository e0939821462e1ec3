import json
import math
from datetime import date

import numpy as np
import pytest

from speechtopics import corpus
from speechtopics.errors import (
    EmptyWindowError,
    FormatError,
    ParameterError,
    ValidationError,
)

from conftest import make_speech

CSV_HEADER = "id,date,speaker_id,speaker_name,text\n"


def write_csv(path, rows):
    path.write_text(CSV_HEADER + "".join(rows), encoding="utf-8")
    return path


class TestIngest:
    def test_three_records_sorted_by_date(self, tmp_path):
        path = write_csv(
            tmp_path / "c.csv",
            [
                "s2,2000-03-01,a,,later speech\n",
                "s1,1999-07-15,b,,first speech\n",
                "s3,2000-03-02,a,,last speech\n",
            ],
        )
        speeches = corpus.ingest(path)
        assert [s.id for s in speeches] == ["s1", "s2", "s3"]
        assert speeches[0].timestamp == date(1999, 7, 15)

    def test_missing_text_names_record(self, tmp_path):
        path = write_csv(
            tmp_path / "c.csv",
            ["s1,1999-07-15,a,,ok\n", "s2,1999-07-16,a,,\n"],
        )
        with pytest.raises(ValidationError, match="record 2"):
            corpus.ingest(path)

    def test_duplicate_id_rejected(self, tmp_path):
        path = write_csv(
            tmp_path / "c.csv",
            ["s1,1999-07-15,a,,one\n", "s1,1999-07-16,a,,two\n"],
        )
        with pytest.raises(ValidationError, match="s1"):
            corpus.ingest(path)

    def test_jsonl_roundtrip(self, tmp_path):
        records = [
            {"id": "x1", "date": "2001-02-03", "speaker_id": "sp", "text": "hello"},
            {"id": "x2", "date": "2001-01-03", "speaker_id": "sp", "text": "world"},
        ]
        path = tmp_path / "c.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in records), encoding="utf-8")
        speeches = corpus.ingest(path)
        assert [s.id for s in speeches] == ["x2", "x1"]

    def test_jsonl_missing_field(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(
            '{"id": "a", "date": "2001-02-03", "speaker_id": "sp", "text": "ok"}\n'
            '{"id": "b", "date": "2001-02-04", "speaker_id": "sp"}\n',
            encoding="utf-8",
        )
        with pytest.raises(ValidationError, match="record 2.*text"):
            corpus.ingest(path)

    def test_bad_date(self, tmp_path):
        path = write_csv(tmp_path / "c.csv", ["s1,notadate,a,,hi\n"])
        with pytest.raises(ValidationError, match="record 1"):
            corpus.ingest(path)

    def test_unknown_extension_needs_format(self, tmp_path):
        path = tmp_path / "c.dat"
        path.write_text("x", encoding="utf-8")
        with pytest.raises(ParameterError):
            corpus.ingest(path)

    def test_missing_header_column(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("id,date,text\ns1,1999-01-01,hi\n", encoding="utf-8")
        with pytest.raises(FormatError, match="speaker_id"):
            corpus.ingest(path)


class TestPreprocess:
    def test_stopword_and_case_rules(self):
        config = corpus.PreprocessConfig(
            generic_stopwords=frozenset({"the", "are"}), min_document_frequency=1
        )
        speech = make_speech("s1", "1999-07-15", text="The Commission ARE proposing")
        assert corpus.preprocess(speech, config) == ["commission", "proposing"]

    def test_short_tokens_removed(self):
        config = corpus.PreprocessConfig(
            min_token_length=3,
            generic_stopwords=frozenset({"is"}),
            min_document_frequency=1,
        )
        speech = make_speech("s1", "1999-07-15", text="EU is ok")
        assert corpus.preprocess(speech, config) == []

    def test_lemma_table_applied(self):
        config = corpus.PreprocessConfig(
            lemma_table={"proposals": "proposal"}, min_document_frequency=1
        )
        speech = make_speech("s1", "1999-07-15", text="proposals adopted")
        assert corpus.preprocess(speech, config) == ["proposal", "adopted"]

    def test_header_prefix_stripped(self):
        config = corpus.PreprocessConfig(
            header_prefixes=("SESSION",), min_document_frequency=1
        )
        speech = make_speech(
            "s1", "1999-07-15", text="SESSION 42 opening\nfisheries policy matters"
        )
        assert corpus.preprocess(speech, config) == [
            "fisheries", "policy", "matters",
        ]

    def test_digits_never_tokenize(self):
        config = corpus.PreprocessConfig(min_document_frequency=1)
        speech = make_speech("s1", "1999-07-15", text="budget2000 rose 12% to 456")
        assert corpus.preprocess(speech, config) == ["budget", "rose"]

    def test_uppercase_stopword_rejected(self):
        with pytest.raises(ParameterError, match="lowercase"):
            corpus.PreprocessConfig(generic_stopwords=frozenset({"The"}))


class TestPartitionWindows:
    def test_two_quarters(self):
        speeches = [
            make_speech("a", "1999-07-15"),
            make_speech("b", "1999-11-02"),
        ]
        windows = corpus.partition_windows(speeches, "quarter")
        assert [w.label for w in windows] == ["1999-Q3", "1999-Q4"]
        assert windows[0].speech_ids == ("a",)
        assert windows[1].speech_ids == ("b",)

    def test_sixty_quarters_for_full_span(self):
        speeches = [
            make_speech("a", "1999-08-01"),
            make_speech("b", "2014-05-15"),
        ]
        windows = corpus.partition_windows(speeches, "quarter")
        assert len(windows) == 60
        assert windows[0].label == "1999-Q3"
        assert windows[-1].label == "2014-Q2"

    def test_single_speech(self):
        windows = corpus.partition_windows([make_speech("a", "2003-02-27")], "quarter")
        assert len(windows) == 1
        assert windows[0].speech_ids == ("a",)

    def test_empty_windows_retained_and_flagged(self):
        speeches = [make_speech("a", "1999-01-10"), make_speech("b", "1999-09-05")]
        windows = corpus.partition_windows(speeches, "quarter")
        assert [w.label for w in windows] == ["1999-Q1", "1999-Q2", "1999-Q3"]
        assert [w.empty for w in windows] == [False, True, False]

    def test_year_and_month_granularity(self):
        speeches = [make_speech("a", "1999-08-01"), make_speech("b", "2014-05-15")]
        assert len(corpus.partition_windows(speeches, "year")) == 16
        months = corpus.partition_windows(
            [make_speech("a", "1999-11-03"), make_speech("b", "2000-02-01")], "month"
        )
        assert [w.label for w in months] == ["1999-11", "1999-12", "2000-01", "2000-02"]

    def test_partition_property(self):
        rng = np.random.default_rng(4)
        speeches = [
            make_speech(
                f"s{i}",
                (date(2000, 1, 1) + np.timedelta64(int(rng.integers(0, 1200)), "D")
                 .astype("timedelta64[D]").item()).isoformat(),
            )
            for i in range(100)
        ]
        for granularity in corpus.GRANULARITIES:
            windows = corpus.partition_windows(speeches, granularity)
            seen = [sid for w in windows for sid in w.speech_ids]
            assert sorted(seen) == sorted(s.id for s in speeches)
            assert len(seen) == len(set(seen))
            for w in windows:
                assert w.start < w.end


FISHERY_DOCS = [
    "fishery budget budget",
    "fishery budget budget",
    "fishery budget budget",
    "fishery budget budget",
    "fishery budget budget",
    "orphan words only",
]


def fishery_window(tmp=None):
    speeches = [
        make_speech(f"d{i}", "2000-01-15", text=text)
        for i, text in enumerate(FISHERY_DOCS)
    ]
    window = corpus.partition_windows(speeches, "quarter")[0]
    return window, {s.id: s for s in speeches}


class TestBuildMatrix:
    def test_hand_computed_tfidf_weights(self):
        # tf=1 df=5 N=6: weight (1 + ln 1) * ln(6/5)
        expected_f = math.log(6 / 5)
        assert corpus.tfidf_weight(1, 5, 6) == pytest.approx(expected_f, abs=1e-12)
        assert expected_f == pytest.approx(0.18232155679, abs=1e-9)

        window, speeches = fishery_window()
        config = corpus.PreprocessConfig(min_document_frequency=5)
        dtm = corpus.build_matrix(window, speeches, config)
        assert dtm.vocabulary == ["budget", "fishery"]
        assert dtm.doc_ids == [f"d{i}" for i in range(5)]
        assert dtm.dropped_doc_ids == ["d5"]

        expected_b = (1 + math.log(2)) * math.log(6 / 5)
        norm = math.hypot(expected_f, expected_b)
        dense = dtm.matrix.toarray()
        for row in dense:
            assert row[dtm.vocabulary.index("fishery")] == pytest.approx(
                expected_f / norm, abs=1e-9
            )
            assert row[dtm.vocabulary.index("budget")] == pytest.approx(
                expected_b / norm, abs=1e-9
            )

    def test_term_in_every_document_dropped(self):
        speeches = [
            make_speech(
                f"d{i}",
                "2000-01-15",
                text=f"everywhere unique{suffix} unique{suffix}",
            )
            for i, suffix in enumerate("abcd")
        ]
        window = corpus.partition_windows(speeches, "quarter")[0]
        config = corpus.PreprocessConfig(min_document_frequency=1)
        dtm = corpus.build_matrix(window, speeches, config)
        assert "everywhere" not in dtm.vocabulary

    def test_row_norms_unit(self, planted_pipeline):
        config = corpus.PreprocessConfig(min_document_frequency=5)
        window = planted_pipeline["windows"][0]
        dtm = corpus.build_matrix(window, planted_pipeline["by_id"], config)
        norms = np.sqrt(np.asarray(dtm.matrix.power(2).sum(axis=1)).ravel())
        assert np.all(np.abs(norms - 1.0) <= 1e-9)

    def test_df_bound_invariant(self, planted_pipeline):
        config = corpus.PreprocessConfig(min_document_frequency=5)
        window = planted_pipeline["windows"][1]
        dtm = corpus.build_matrix(window, planted_pipeline["by_id"], config)
        column_df = np.asarray((dtm.matrix > 0).sum(axis=0)).ravel()
        assert column_df.min() >= config.min_document_frequency

    def test_empty_window_error(self):
        speeches = [make_speech("a", "1999-01-10"), make_speech("b", "1999-09-05")]
        windows = corpus.partition_windows(speeches, "quarter")
        config = corpus.PreprocessConfig(min_document_frequency=1)
        with pytest.raises(EmptyWindowError):
            corpus.build_matrix(windows[1], speeches, config)

    def test_zero_retained_documents_error(self):
        speeches = [make_speech("a", "1999-01-10", text="zz yy xx")]
        window = corpus.partition_windows(speeches, "quarter")[0]
        config = corpus.PreprocessConfig(min_document_frequency=2)
        with pytest.raises(EmptyWindowError, match="zero"):
            corpus.build_matrix(window, speeches, config)

    def test_serialization_deterministic_and_roundtrips(self):
        window, speeches = fishery_window()
        config = corpus.PreprocessConfig(min_document_frequency=5)
        first = corpus.build_matrix(window, speeches, config).to_json()
        second = corpus.build_matrix(window, speeches, config).to_json()
        assert first == second
        restored = corpus.DocumentTermMatrix.from_json(first)
        assert restored.to_json() == first
        payload = json.loads(first)
        assert set(payload) == {"vocabulary", "doc_ids", "weighting", "triplets"}

    def test_raw_count_weighting(self):
        window, speeches = fishery_window()
        config = corpus.PreprocessConfig(min_document_frequency=5)
        dtm = corpus.build_matrix(window, speeches, config, weighting="raw-count")
        assert dtm.weighting == "raw-count"
        dense = dtm.matrix.toarray()
        assert dense[0, dtm.vocabulary.index("budget")] == 2.0


class TestLoaders:
    def test_term_set_file(self, tmp_path):
        path = tmp_path / "stop.txt"
        path.write_text("the\n# comment\nare  # trailing\n\nAND\n", encoding="utf-8")
        assert corpus.load_term_set(path) == {"the", "are", "and"}

    def test_lemma_table_file(self, tmp_path):
        path = tmp_path / "lemma.tsv"
        path.write_text("proposals\tproposal\nWas\tbe\n", encoding="utf-8")
        table = corpus.load_lemma_table(path)
        assert table == {"proposals": "proposal", "was": "be"}

    def test_lemma_table_bad_line(self, tmp_path):
        path = tmp_path / "lemma.tsv"
        path.write_text("oneword\n", encoding="utf-8")
        with pytest.raises(FormatError, match="line 1"):
            corpus.load_lemma_table(path)
