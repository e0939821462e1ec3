"""Corpus ingestion, preprocessing, time windowing, and TF-IDF matrices.

Speeches are timestamped text records. The pipeline tokenizes them with a
fixed rule set (lowercase alphabetic unigrams, length and stopword filters,
optional lemma lookup), partitions them into disjoint calendar-aligned time
windows, and builds one sparse document-term matrix per window using
sublinear TF-IDF with L2 row normalization:

    weight(term, doc) = (1 + ln tf) * ln(N / df)

where N is the number of speeches in the window and df the number of those
speeches containing the term. Terms present in fewer than
``min_document_frequency`` speeches are discarded; terms present in every
speech get idf 0 and are likewise dropped, so the matrix never stores a
zero column.
"""

from __future__ import annotations

import csv
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (
    EmptyWindowError,
    FormatError,
    InputError,
    ParameterError,
    ValidationError,
)

_TOKEN_RE = re.compile(r"[^\W\d_]+")

GRANULARITIES = ("quarter", "month", "year")


@dataclass(frozen=True)
class Speech:
    """One timestamped speech record, the atomic corpus unit."""

    id: str
    timestamp: date
    speaker_id: str
    text: str
    speaker_name: str | None = None


@dataclass(frozen=True)
class TimeWindow:
    """A half-open calendar interval [start, end) and the speeches in it."""

    index: int
    label: str
    start: date
    end: date
    speech_ids: tuple[str, ...]

    @property
    def empty(self) -> bool:
        return not self.speech_ids


@dataclass(frozen=True)
class PreprocessConfig:
    """Tokenization and filtering rules applied to every speech.

    ``header_prefixes`` lists line prefixes stripped before tokenization
    (transcript headers/footers are corpus-specific, so the default is
    empty). ``lemma_table`` maps surface forms to lemmas and acts as the
    identity when absent.
    """

    min_token_length: int = 3
    min_document_frequency: int = 5
    generic_stopwords: frozenset[str] = frozenset()
    domain_stopwords: frozenset[str] = frozenset()
    name_stopwords: frozenset[str] = frozenset()
    lemma_table: Mapping[str, str] | None = None
    header_prefixes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.min_token_length < 1:
            raise ParameterError("min_token_length must be >= 1")
        if self.min_document_frequency < 1:
            raise ParameterError("min_document_frequency must be >= 1")
        for name in ("generic_stopwords", "domain_stopwords", "name_stopwords"):
            terms = frozenset(getattr(self, name))
            object.__setattr__(self, name, terms)
            for term in terms:
                if term != term.lower():
                    raise ParameterError(f"{name} entry {term!r} is not lowercase")


@dataclass
class DocumentTermMatrix:
    """Sparse non-negative matrix over (document, term) with its indices.

    ``dropped_doc_ids`` records speeches excluded because none of their
    tokens survived the vocabulary filter.
    """

    doc_ids: list[str]
    vocabulary: list[str]
    matrix: sp.csr_matrix
    weighting: str = "tfidf-l2"
    dropped_doc_ids: list[str] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def to_json_dict(self) -> dict:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        triplets = [
            [int(coo.row[i]), int(coo.col[i]), float(coo.data[i])] for i in order
        ]
        return {
            "vocabulary": list(self.vocabulary),
            "doc_ids": list(self.doc_ids),
            "weighting": self.weighting,
            "triplets": triplets,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    @classmethod
    def from_json_dict(cls, payload: dict) -> "DocumentTermMatrix":
        vocabulary = list(payload["vocabulary"])
        doc_ids = list(payload["doc_ids"])
        triplets = payload["triplets"]
        rows = [t[0] for t in triplets]
        cols = [t[1] for t in triplets]
        data = [t[2] for t in triplets]
        matrix = sp.csr_matrix(
            (data, (rows, cols)), shape=(len(doc_ids), len(vocabulary)), dtype=np.float64
        )
        return cls(doc_ids, vocabulary, matrix, payload["weighting"])

    @classmethod
    def from_json(cls, text: str) -> "DocumentTermMatrix":
        return cls.from_json_dict(json.loads(text))


def _parse_date(value: str) -> date:
    value = value.strip()
    try:
        return date.fromisoformat(value)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(value).date()
    except ValueError as exc:
        raise ValidationError(f"unparseable date {value!r}") from exc


_REQUIRED_FIELDS = ("id", "date", "speaker_id", "text")


def _record_to_speech(record: Mapping[str, object], where: str) -> Speech:
    for name in _REQUIRED_FIELDS:
        if record.get(name) is None:
            raise ValidationError(f"{where}: missing field {name!r}")
    speech_id = str(record["id"]).strip()
    if not speech_id:
        raise ValidationError(f"{where}: empty id")
    text = str(record["text"])
    if not text.strip():
        raise ValidationError(f"{where}: empty text")
    try:
        timestamp = _parse_date(str(record["date"]))
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from exc
    speaker_name = record.get("speaker_name")
    if speaker_name is not None:
        speaker_name = str(speaker_name) or None
    return Speech(
        id=speech_id,
        timestamp=timestamp,
        speaker_id=str(record["speaker_id"]),
        text=text,
        speaker_name=speaker_name,
    )


def ingest(path: str | Path, format: str | None = None) -> list[Speech]:
    """Read speeches from a CSV or JSONL file, sorted by timestamp.

    The format is inferred from the file suffix when not given. Duplicate
    ids and malformed records raise :class:`ValidationError` naming the
    offending record.
    """
    path = Path(path)
    if format is None:
        suffix = path.suffix.lower()
        if suffix == ".csv":
            format = "csv"
        elif suffix in (".jsonl", ".ndjson", ".json"):
            format = "jsonl"
        else:
            raise ParameterError(
                f"cannot infer format from {path.name!r}; pass format='csv' or 'jsonl'"
            )
    if format not in ("csv", "jsonl"):
        raise ParameterError(f"unknown format {format!r}")

    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc

    speeches: list[Speech] = []
    if format == "csv":
        reader = csv.DictReader(raw.splitlines())
        if reader.fieldnames is None:
            raise FormatError(f"{path}: empty file")
        missing = [f for f in _REQUIRED_FIELDS if f not in reader.fieldnames]
        if missing:
            raise FormatError(f"{path}: header missing columns {missing}")
        for i, row in enumerate(reader, start=1):
            speeches.append(_record_to_speech(row, f"{path.name} record {i}"))
    else:
        for i, line in enumerate(raw.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path.name} record {i}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise FormatError(f"{path.name} record {i}: expected an object")
            speeches.append(_record_to_speech(record, f"{path.name} record {i}"))

    seen: set[str] = set()
    for speech in speeches:
        if speech.id in seen:
            raise ValidationError(f"duplicate speech id {speech.id!r}")
        seen.add(speech.id)
    speeches.sort(key=lambda s: s.timestamp)
    return speeches


def tokenize_text(text: str, config: PreprocessConfig) -> list[str]:
    """Apply the full tokenization rule set to raw text."""
    if config.header_prefixes:
        kept = [
            line
            for line in text.splitlines()
            if not any(line.lstrip().startswith(p) for p in config.header_prefixes)
        ]
        text = "\n".join(kept)
    tokens = []
    for token in _TOKEN_RE.findall(text.lower()):
        if len(token) < config.min_token_length:
            continue
        if (
            token in config.generic_stopwords
            or token in config.domain_stopwords
            or token in config.name_stopwords
        ):
            continue
        if config.lemma_table is not None:
            token = config.lemma_table.get(token, token)
        tokens.append(token)
    return tokens


def preprocess(speech: Speech, config: PreprocessConfig) -> list[str]:
    """Tokenize one speech; empty output is permitted."""
    return tokenize_text(speech.text, config)


def _period_start(day: date, granularity: str) -> date:
    if granularity == "quarter":
        month = ((day.month - 1) // 3) * 3 + 1
        return date(day.year, month, 1)
    if granularity == "month":
        return date(day.year, day.month, 1)
    return date(day.year, 1, 1)


def _next_period(start: date, granularity: str) -> date:
    months = {"quarter": 3, "month": 1, "year": 12}[granularity]
    month = start.month - 1 + months
    return date(start.year + month // 12, month % 12 + 1, 1)


def _window_label(start: date, granularity: str) -> str:
    if granularity == "quarter":
        return f"{start.year}-Q{(start.month - 1) // 3 + 1}"
    if granularity == "month":
        return f"{start.year}-{start.month:02d}"
    return str(start.year)


def partition_windows(
    speeches: Sequence[Speech], granularity: str = "quarter"
) -> list[TimeWindow]:
    """Partition speeches into consecutive calendar-aligned time windows.

    Windows run from the period containing the earliest speech to the one
    containing the latest. Periods with no speeches are retained as empty
    windows so window indices stay calendar-aligned.
    """
    if granularity not in GRANULARITIES:
        raise ParameterError(f"granularity must be one of {GRANULARITIES}")
    if not speeches:
        raise ParameterError("at least one speech is required")

    ordered = sorted(speeches, key=lambda s: s.timestamp)
    cursor = _period_start(ordered[0].timestamp, granularity)
    last = ordered[-1].timestamp

    windows: list[TimeWindow] = []
    i = 0
    index = 0
    while cursor <= last:
        end = _next_period(cursor, granularity)
        ids: list[str] = []
        while i < len(ordered) and ordered[i].timestamp < end:
            ids.append(ordered[i].id)
            i += 1
        windows.append(
            TimeWindow(
                index=index,
                label=_window_label(cursor, granularity),
                start=cursor,
                end=end,
                speech_ids=tuple(ids),
            )
        )
        index += 1
        cursor = end
    return windows


def tfidf_weight(tf: int, df: int, n_docs: int) -> float:
    """Sublinear TF-IDF cell value before row normalization."""
    if tf < 1 or df < 1 or n_docs < df:
        raise ParameterError("requires tf >= 1 and 1 <= df <= n_docs")
    return (1.0 + math.log(tf)) * math.log(n_docs / df)


def build_matrix(
    window: TimeWindow,
    speeches: Mapping[str, Speech] | Iterable[Speech],
    config: PreprocessConfig,
    weighting: str = "tfidf-l2",
) -> DocumentTermMatrix:
    """Build the document-term matrix for one window.

    Speeches whose tokens all fall outside the retained vocabulary are
    dropped from the rows and recorded in ``dropped_doc_ids``.
    """
    if weighting not in ("tfidf-l2", "raw-count"):
        raise ParameterError(f"unknown weighting {weighting!r}")
    if window.empty:
        raise EmptyWindowError(f"window {window.label} has no speeches")
    if not isinstance(speeches, Mapping):
        speeches = {s.id: s for s in speeches}

    docs: list[tuple[str, list[str]]] = []
    for sid in window.speech_ids:
        if sid not in speeches:
            raise InputError(f"speech {sid!r} from window {window.label} not found")
        docs.append((sid, preprocess(speeches[sid], config)))

    n_docs = len(docs)
    df_counts: Counter[str] = Counter()
    for _, tokens in docs:
        df_counts.update(set(tokens))

    if weighting == "tfidf-l2":
        # df == n_docs implies idf 0, which the no-zero-column invariant drops.
        vocab = sorted(
            t
            for t, c in df_counts.items()
            if c >= config.min_document_frequency and c < n_docs
        )
    else:
        vocab = sorted(
            t for t, c in df_counts.items() if c >= config.min_document_frequency
        )
    term_index = {t: j for j, t in enumerate(vocab)}

    rows: list[int] = []
    cols: list[int] = []
    data: list[float] = []
    doc_ids: list[str] = []
    dropped: list[str] = []
    for sid, tokens in docs:
        counts = Counter(t for t in tokens if t in term_index)
        if not counts:
            dropped.append(sid)
            continue
        row = len(doc_ids)
        doc_ids.append(sid)
        entries = sorted((term_index[t], c) for t, c in counts.items())
        if weighting == "tfidf-l2":
            values = [tfidf_weight(c, df_counts[vocab[j]], n_docs) for j, c in entries]
            norm = math.sqrt(sum(v * v for v in values))
            values = [v / norm for v in values]
        else:
            values = [float(c) for _, c in entries]
        for (j, _), v in zip(entries, values):
            rows.append(row)
            cols.append(j)
            data.append(v)

    if not doc_ids:
        raise EmptyWindowError(
            f"window {window.label} retains zero documents after preprocessing"
        )
    matrix = sp.csr_matrix(
        (data, (rows, cols)), shape=(len(doc_ids), len(vocab)), dtype=np.float64
    )
    return DocumentTermMatrix(doc_ids, vocab, matrix, weighting, dropped)


def load_term_set(path: str | Path) -> frozenset[str]:
    """Read a stopword file: one term per line, ``#`` comments allowed."""
    terms = set()
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    for line in lines:
        term = line.split("#", 1)[0].strip()
        if term:
            terms.add(term.lower())
    return frozenset(terms)


def load_lemma_table(path: str | Path) -> dict[str, str]:
    """Read a two-column TSV mapping surface forms to lemmas."""
    table: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    for i, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path} line {i}: expected 'surface<TAB>lemma'")
        surface, lemma = parts[0].strip(), parts[1].strip()
        if not surface or not lemma:
            raise FormatError(f"{path} line {i}: empty surface or lemma")
        table[surface.lower()] = lemma.lower()
    return table
