"""Second-layer dynamic topic modeling over window topic models.

Each window topic contributes one "topic document": its top-t term
weights with every other term zeroed. Stacking these rows and dropping
columns that never rank top-t anywhere yields the topic-term matrix B,
which is factorized again (B ~ U V) to find dynamic topics spanning
windows. Window topics are assigned to the dynamic topic with the
largest weight in their U row; speeches reach dynamic topics through the
argmax topic of their W row in the owning window model. Weight sums keep
the full soft W weights, while counts use the single-membership argmax
assignment; both views are computed because they answer different
questions about contribution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import nmf
from .coherence import KSelectionResult, select_k
from .corpus import Speech
from .embeddings import EmbeddingSpace
from .errors import ModelError, ParameterError


@dataclass
class WindowTopicModel:
    """NMF output for one time window plus its ranked descriptors."""

    window_index: int
    factorization: nmf.Factorization
    chosen_k: int
    descriptors: list[nmf.TopicDescriptor]
    window_label: str = ""
    k_selection: KSelectionResult | None = None

    def __post_init__(self):
        if len(self.descriptors) != self.chosen_k:
            raise ParameterError(
                f"window {self.window_index}: {len(self.descriptors)} descriptors "
                f"for k={self.chosen_k}"
            )

    def to_json_dict(self) -> dict:
        payload = {
            "window_index": self.window_index,
            "window_label": self.window_label,
            "chosen_k": self.chosen_k,
            "factorization": self.factorization.to_json_dict(),
            "descriptors": [
                {"topic_index": d.topic_index, "terms": [[t, w] for t, w in d.terms]}
                for d in self.descriptors
            ],
        }
        if self.k_selection is not None:
            payload["k_selection"] = self.k_selection.to_json_dict()
        return payload

    @classmethod
    def from_json_dict(cls, payload: dict) -> "WindowTopicModel":
        selection = payload.get("k_selection")
        return cls(
            window_index=int(payload["window_index"]),
            factorization=nmf.Factorization.from_json_dict(payload["factorization"]),
            chosen_k=int(payload["chosen_k"]),
            descriptors=[
                nmf.TopicDescriptor(
                    topic_index=int(d["topic_index"]),
                    terms=tuple((t, float(w)) for t, w in d["terms"]),
                )
                for d in payload["descriptors"]
            ],
            window_label=payload.get("window_label", ""),
            k_selection=KSelectionResult.from_json_dict(selection) if selection else None,
        )


@dataclass
class TopicDocumentMatrix:
    """Stacked truncated topic rows: one row per window topic."""

    rows: list[tuple[int, int]]
    columns: list[str]
    matrix: sp.csr_matrix
    t_truncation: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


@dataclass
class DynamicTopicModel:
    """Second-layer factors, assignment map, and dynamic descriptors."""

    U: np.ndarray
    V: np.ndarray
    k_prime: int
    assignment: dict[tuple[int, int], int]
    descriptors: list[nmf.TopicDescriptor]
    rows: list[tuple[int, int]] = field(default_factory=list)
    columns: list[str] = field(default_factory=list)

    def members(self, dynamic_topic: int) -> list[tuple[int, int]]:
        """Window topics assigned to one dynamic topic, in row order."""
        return [wt for wt in self.rows if self.assignment[wt] == dynamic_topic]

    def to_json_dict(self) -> dict:
        return {
            "k_prime": self.k_prime,
            "descriptors": [
                {"topic_index": d.topic_index, "terms": [[t, w] for t, w in d.terms]}
                for d in self.descriptors
            ],
            "assignment": [
                [w, i, self.assignment[(w, i)]] for w, i in self.rows
            ],
            "U": [[float(v) for v in row] for row in self.U],
            "V": [[float(v) for v in row] for row in self.V],
            "columns": list(self.columns),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    @classmethod
    def from_json_dict(cls, payload: dict) -> "DynamicTopicModel":
        rows = [(int(w), int(i)) for w, i, _ in payload["assignment"]]
        return cls(
            U=np.asarray(payload["U"], dtype=np.float64),
            V=np.asarray(payload["V"], dtype=np.float64),
            k_prime=int(payload["k_prime"]),
            assignment={
                (int(w), int(i)): int(d) for w, i, d in payload["assignment"]
            },
            descriptors=[
                nmf.TopicDescriptor(
                    topic_index=int(d["topic_index"]),
                    terms=tuple((t, float(w)) for t, w in d["terms"]),
                )
                for d in payload["descriptors"]
            ],
            rows=rows,
            columns=list(payload.get("columns", [])),
        )


@dataclass
class TopicTimeSeries:
    """Per-window presence of one dynamic topic."""

    dynamic_topic: int
    per_window: dict[int, tuple[int, float]]
    temporal_frequency: int


def build_topic_document_matrix(
    models: Sequence[WindowTopicModel], t: int
) -> TopicDocumentMatrix:
    """Stack every window topic's top-t term weights into the matrix B.

    Rows are ordered by (window_index, topic_index); columns are the
    sorted union of all selected terms, so no column is all-zero by
    construction. Zero-weight terms never enter a row, hence each row has
    at most t nonzeros. Weights are the original factor weights, not
    rescaled after truncation.
    """
    if not models:
        raise ParameterError("at least one window topic model is required")
    if t < 1:
        raise ParameterError("t must be >= 1")

    ordered = sorted(models, key=lambda m: m.window_index)
    row_keys: list[tuple[int, int]] = []
    row_terms: list[list[tuple[str, float]]] = []
    for model in ordered:
        m_terms = model.factorization.H.shape[1]
        for topic in range(model.chosen_k):
            descriptor = nmf.top_terms(model.factorization, topic, min(t, m_terms))
            kept = [(term, w) for term, w in descriptor.terms if w > 0.0]
            if not kept:
                raise ModelError(
                    f"window {model.window_index} topic {topic} has no positive weights"
                )
            row_keys.append((model.window_index, topic))
            row_terms.append(kept)

    columns = sorted({term for kept in row_terms for term, _ in kept})
    col_index = {term: j for j, term in enumerate(columns)}
    rows: list[int] = []
    cols: list[int] = []
    data: list[float] = []
    for r, kept in enumerate(row_terms):
        for term, w in sorted(kept, key=lambda kv: col_index[kv[0]]):
            rows.append(r)
            cols.append(col_index[term])
            data.append(w)
    matrix = sp.csr_matrix(
        (data, (rows, cols)), shape=(len(row_keys), len(columns)), dtype=np.float64
    )
    return TopicDocumentMatrix(row_keys, columns, matrix, t)


def _argmax_lowest(row: np.ndarray) -> int:
    # np.argmax already returns the first (lowest) index on ties.
    return int(np.argmax(row))


def fit_dynamic(
    B: TopicDocumentMatrix,
    k_min: int,
    k_max: int,
    t: int,
    space: EmbeddingSpace,
    max_iter: int = 200,
    tol: float = 1e-5,
) -> tuple[DynamicTopicModel, KSelectionResult]:
    """Select k' on B by coherence, fit, and assign window topics."""
    n_rows, n_cols = B.shape
    if k_max > min(n_rows, n_cols):
        raise ParameterError(
            f"k_max={k_max} exceeds min(B.shape)={min(n_rows, n_cols)}"
        )
    selection = select_k(
        B.matrix, k_min, k_max, t, space,
        max_iter=max_iter, tol=tol, vocabulary=B.columns,
    )
    fitted = nmf.factorize(
        B.matrix, selection.chosen_k, init="nndsvd",
        max_iter=max_iter, tol=tol, vocabulary=B.columns,
    )
    assignment = {
        key: _argmax_lowest(fitted.W[r]) for r, key in enumerate(B.rows)
    }
    descriptors = [
        nmf.top_terms(fitted, h, min(t, n_cols)) for h in range(fitted.k)
    ]
    model = DynamicTopicModel(
        U=fitted.W,
        V=fitted.H,
        k_prime=fitted.k,
        assignment=assignment,
        descriptors=descriptors,
        rows=list(B.rows),
        columns=list(B.columns),
    )
    return model, selection


def assign_speeches(
    model: WindowTopicModel,
) -> tuple[dict[str, int], list[str]]:
    """Map each speech to its argmax window topic.

    Returns the assignment plus the ids of speeches whose W row is all
    zero and therefore stay unassigned.
    """
    f = model.factorization
    if f.doc_ids is None:
        raise ParameterError(
            f"window {model.window_index}: factorization carries no doc_ids"
        )
    assigned: dict[str, int] = {}
    unassigned: list[str] = []
    for r, sid in enumerate(f.doc_ids):
        row = f.W[r]
        if not row.any():
            unassigned.append(sid)
            continue
        assigned[sid] = _argmax_lowest(row)
    return assigned, unassigned


def _models_by_window(models: Sequence[WindowTopicModel]) -> dict[int, WindowTopicModel]:
    by_window: dict[int, WindowTopicModel] = {}
    for model in models:
        if model.window_index in by_window:
            raise ParameterError(f"duplicate model for window {model.window_index}")
        by_window[model.window_index] = model
    return by_window


def collect_speeches(
    dtm: DynamicTopicModel,
    models: Sequence[WindowTopicModel],
    dynamic_topic: int,
) -> set[str]:
    """Union of speeches assigned to the member window topics."""
    if not 0 <= dynamic_topic < dtm.k_prime:
        raise ParameterError(f"dynamic topic {dynamic_topic} outside [0, {dtm.k_prime})")
    by_window = _models_by_window(models)
    members_by_window: dict[int, set[int]] = {}
    for (w, i), d in dtm.assignment.items():
        if d == dynamic_topic:
            members_by_window.setdefault(w, set()).add(i)
    speeches: set[str] = set()
    for w, topics in members_by_window.items():
        assigned, _ = assign_speeches(by_window[w])
        speeches.update(sid for sid, topic in assigned.items() if topic in topics)
    return speeches


def topic_time_series(
    dtm: DynamicTopicModel,
    models: Sequence[WindowTopicModel],
    window_indices: Sequence[int] | None = None,
) -> list[TopicTimeSeries]:
    """Per-window speech counts and weight sums for every dynamic topic.

    The window axis defaults to the windows that have models; pass
    ``window_indices`` to pin a wider (calendar-complete) axis.
    """
    by_window = _models_by_window(models)
    if window_indices is None:
        window_indices = sorted(by_window)
    assignments = {w: assign_speeches(by_window[w])[0] for w in by_window}

    series: list[TopicTimeSeries] = []
    for d in range(dtm.k_prime):
        per_window: dict[int, tuple[int, float]] = {}
        frequency = 0
        for w in window_indices:
            model = by_window.get(w)
            if model is None:
                per_window[w] = (0, 0.0)
                continue
            member_topics = {
                i for (mw, i), dyn in dtm.assignment.items() if mw == w and dyn == d
            }
            if not member_topics:
                per_window[w] = (0, 0.0)
                continue
            count = sum(
                1 for topic in assignments[w].values() if topic in member_topics
            )
            weight = float(
                sum(model.factorization.W[:, i].sum() for i in sorted(member_topics))
            )
            per_window[w] = (count, weight)
            if count > 0:
                frequency += 1
        series.append(
            TopicTimeSeries(
                dynamic_topic=d, per_window=per_window, temporal_frequency=frequency
            )
        )
    return series


def speaker_contributions(
    dtm: DynamicTopicModel,
    models: Sequence[WindowTopicModel],
    speeches: Mapping[str, Speech] | Sequence[Speech],
    mode: str = "weight_sum",
) -> dict[tuple[str, int], float]:
    """Aggregate speaker contributions per dynamic topic.

    ``weight_sum`` adds each speech's full soft topic weights into the
    dynamic topics its window topics map to; ``count`` adds 1 to the
    dynamic topic holding the speech's argmax window topic.
    """
    if mode not in ("weight_sum", "count"):
        raise ParameterError(f"unknown mode {mode!r}")
    if not isinstance(speeches, Mapping):
        speeches = {s.id: s for s in speeches}
    by_window = _models_by_window(models)

    table: dict[tuple[str, int], float] = {}
    for w in sorted(by_window):
        model = by_window[w]
        f = model.factorization
        if f.doc_ids is None:
            raise ParameterError(
                f"window {model.window_index}: factorization carries no doc_ids"
            )
        topic_to_dynamic = {
            i: dtm.assignment[(w, i)] for i in range(model.chosen_k)
        }
        for r, sid in enumerate(f.doc_ids):
            speech = speeches.get(sid)
            if speech is None:
                raise ParameterError(f"speech {sid!r} missing from corpus")
            speaker = speech.speaker_id
            row = f.W[r]
            if mode == "weight_sum":
                for i in range(model.chosen_k):
                    if row[i] > 0.0:
                        key = (speaker, topic_to_dynamic[i])
                        table[key] = table.get(key, 0.0) + float(row[i])
            else:
                if not row.any():
                    continue
                key = (speaker, topic_to_dynamic[_argmax_lowest(row)])
                table[key] = table.get(key, 0.0) + 1.0
    return table
