"""Topic-quality scoring and coherence-driven selection of topic counts.

Two measures are provided. The embedding measure scores a topic as the
mean pairwise cosine similarity between the vectors of its top terms, and
a model as the mean of its topic scores. The co-occurrence measure is a
C_v-style score: boolean sliding windows over a background corpus yield
term and pair probabilities, every top term is represented by its vector
of NPMI values against all top terms, and the score is the mean cosine
between each term vector and the element-wise sum of all of them, with

    NPMI(i, j) = [ln(p(i,j) + eps) - ln p(i) - ln p(j)] / -ln(p(i,j) + eps).

Model selection fits one NNDSVD-initialized factorization per candidate k
and keeps the k with the highest mean coherence (first maximum on ties,
so ties go to the smaller, more parsimonious k).
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from . import nmf
from .embeddings import EmbeddingSpace, cosine
from .errors import CoherenceUndefinedError, ParameterError, SpeechTopicsError

DEFAULT_CV_WINDOW = 110
DEFAULT_CV_EPSILON = 1e-12


@dataclass
class CoherenceReport:
    """Per-topic scores plus their mean (and median, for robustness)."""

    per_topic: list[tuple[int, float]]
    model_score: float
    measure: str
    t_terms: int
    median_score: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "measure": self.measure,
            "t_terms": self.t_terms,
            "model_score": self.model_score,
            "median_score": self.median_score,
            "per_topic": [[i, s] for i, s in self.per_topic],
        }


@dataclass
class KSelectionResult:
    """Coherence scores over an inclusive k range and the chosen k."""

    k_range: tuple[int, int]
    scores: dict[int, float]
    chosen_k: int

    def to_json_dict(self) -> dict:
        return {
            "k_min": self.k_range[0],
            "k_max": self.k_range[1],
            "scores": {str(k): v for k, v in sorted(self.scores.items())},
            "chosen_k": self.chosen_k,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "KSelectionResult":
        return cls(
            k_range=(int(payload["k_min"]), int(payload["k_max"])),
            scores={int(k): float(v) for k, v in payload["scores"].items()},
            chosen_k=int(payload["chosen_k"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))


@dataclass
class CooccurrenceIndex:
    """Boolean sliding-window counts over a background corpus.

    A document of length L contributes max(L - window_size + 1, 1)
    windows; each window counts every distinct term (and unordered term
    pair) it contains at most once. ``pair_counts`` keys are sorted term
    pairs. When ``tracked_terms`` is set, only those terms were counted.
    """

    window_size: int
    window_count: int
    term_counts: dict[str, int]
    pair_counts: dict[tuple[str, str], int]
    tracked_terms: frozenset[str] | None = None

    def probability(self, term: str, epsilon: float = 0.0) -> float:
        return self.term_counts.get(term, 0) / self.window_count + epsilon

    def pair_probability(self, a: str, b: str, epsilon: float = 0.0) -> float:
        if a == b:
            count = self.term_counts.get(a, 0)
        else:
            count = self.pair_counts.get((min(a, b), max(a, b)), 0)
        return count / self.window_count + epsilon


def build_cooccurrence_index(
    docs: Iterable[Sequence[str]],
    window_size: int = DEFAULT_CV_WINDOW,
    terms: Iterable[str] | None = None,
) -> CooccurrenceIndex:
    """Count sliding-window occurrences, optionally restricted to ``terms``.

    Without a term restriction every pair in every window is counted,
    which is quadratic in window content; pass the union of topic terms
    for anything beyond toy corpora.
    """
    if window_size < 1:
        raise ParameterError("window_size must be >= 1")
    tracked = frozenset(terms) if terms is not None else None
    term_counts: dict[str, int] = {}
    pair_counts: dict[tuple[str, str], int] = {}
    window_count = 0
    for doc in docs:
        tokens = list(doc)
        if not tokens:
            continue
        n_windows = max(len(tokens) - window_size + 1, 1)
        window_count += n_windows
        for start in range(n_windows):
            present = set(tokens[start:start + window_size])
            if tracked is not None:
                present &= tracked
            ordered = sorted(present)
            for term in ordered:
                term_counts[term] = term_counts.get(term, 0) + 1
            for a, b in combinations(ordered, 2):
                pair_counts[(a, b)] = pair_counts.get((a, b), 0) + 1
    return CooccurrenceIndex(
        window_size=window_size,
        window_count=window_count,
        term_counts=term_counts,
        pair_counts=pair_counts,
        tracked_terms=tracked,
    )


def topic_coherence_w2v(terms: Sequence[str], space: EmbeddingSpace) -> float:
    """Mean pairwise cosine similarity of the terms' vectors.

    Terms absent from the space are skipped; at least two present terms
    are required.
    """
    present = [t for t in terms if t in space]
    if len(present) < 2:
        raise CoherenceUndefinedError(
            f"only {len(present)} of {len(terms)} terms have vectors; need >= 2"
        )
    total = 0.0
    pairs = 0
    for a, b in combinations(present, 2):
        total += cosine(space, a, b)
        pairs += 1
    return total / pairs


def model_coherence(
    model: nmf.Factorization, t: int, space: EmbeddingSpace
) -> CoherenceReport:
    """Embedding coherence of every topic's top-t descriptor."""
    if t < 2:
        raise ParameterError("t must be >= 2")
    m = model.H.shape[1]
    per_topic = []
    for h in range(model.k):
        descriptor = nmf.top_terms(model, h, min(t, m))
        try:
            score = topic_coherence_w2v(descriptor.term_list(), space)
        except CoherenceUndefinedError as exc:
            raise CoherenceUndefinedError(f"topic {h}: {exc}") from exc
        per_topic.append((h, score))
    scores = [s for _, s in per_topic]
    return CoherenceReport(
        per_topic=per_topic,
        model_score=sum(scores) / len(scores),
        measure="tc-w2v",
        t_terms=t,
        median_score=statistics.median(scores),
    )


def select_k(
    A,
    k_min: int,
    k_max: int,
    t: int,
    space: EmbeddingSpace,
    max_iter: int = 200,
    tol: float = 1e-5,
    vocabulary: Sequence[str] | None = None,
) -> KSelectionResult:
    """Fit one model per k in [k_min, k_max] and keep the most coherent.

    All fits use NNDSVD initialization, so the sweep is deterministic.
    Errors from fitting or scoring propagate annotated with the k that
    produced them.
    """
    M, vocab, _ = nmf._as_matrix(A)
    if vocabulary is not None:
        vocab = tuple(vocabulary)
    n, m = M.shape
    if not 1 <= k_min <= k_max <= min(n, m):
        raise ParameterError(
            f"need 1 <= k_min <= k_max <= {min(n, m)}, got [{k_min}, {k_max}]"
        )
    scores: dict[int, float] = {}
    for k in range(k_min, k_max + 1):
        try:
            fitted = nmf.factorize(
                M, k, init="nndsvd", max_iter=max_iter, tol=tol, vocabulary=vocab
            )
            scores[k] = model_coherence(fitted, t, space).model_score
        except SpeechTopicsError as exc:
            raise type(exc)(f"k={k}: {exc}") from exc
    chosen = max(scores, key=lambda k: (scores[k], -k))
    return KSelectionResult(k_range=(k_min, k_max), scores=scores, chosen_k=chosen)


def _npmi_matrix(
    terms: Sequence[str], counts: CooccurrenceIndex, epsilon: float
) -> np.ndarray:
    size = len(terms)
    M = np.zeros((size, size))
    log_p = {t: np.log(counts.probability(t)) for t in terms}
    for i in range(size):
        for j in range(size):
            p_ij = counts.pair_probability(terms[i], terms[j], epsilon)
            M[i, j] = (np.log(p_ij) - log_p[terms[i]] - log_p[terms[j]]) / -np.log(p_ij)
    return M


def coherence_cv(
    terms: Sequence[str],
    counts: CooccurrenceIndex,
    epsilon: float = DEFAULT_CV_EPSILON,
) -> float:
    """C_v-style NPMI coherence of one topic's top terms.

    Terms with zero corpus frequency are skipped; at least two usable
    terms are required.
    """
    if counts.window_count < 1:
        raise ParameterError("co-occurrence index holds no windows")
    if counts.tracked_terms is not None:
        missing = [t for t in terms if t not in counts.tracked_terms]
        if missing:
            raise ParameterError(
                f"terms {missing} were not tracked when the index was built"
            )
    usable = [t for t in terms if counts.term_counts.get(t, 0) > 0]
    if len(usable) < 2:
        raise CoherenceUndefinedError(
            f"only {len(usable)} of {len(terms)} terms occur in the background corpus"
        )
    M = _npmi_matrix(usable, counts, epsilon)
    reference = M.sum(axis=0)
    ref_norm = float(np.linalg.norm(reference))
    total = 0.0
    for i in range(len(usable)):
        row_norm = float(np.linalg.norm(M[i]))
        if row_norm == 0.0 or ref_norm == 0.0:
            continue
        total += float(np.dot(M[i], reference)) / (row_norm * ref_norm)
    return total / len(usable)


def model_coherence_cv(
    model: nmf.Factorization,
    t: int,
    counts: CooccurrenceIndex,
    epsilon: float = DEFAULT_CV_EPSILON,
) -> CoherenceReport:
    """Co-occurrence coherence of every topic's top-t descriptor."""
    if t < 2:
        raise ParameterError("t must be >= 2")
    m = model.H.shape[1]
    per_topic = []
    for h in range(model.k):
        descriptor = nmf.top_terms(model, h, min(t, m))
        try:
            score = coherence_cv(descriptor.term_list(), counts, epsilon)
        except CoherenceUndefinedError as exc:
            raise CoherenceUndefinedError(f"topic {h}: {exc}") from exc
        per_topic.append((h, score))
    scores = [s for _, s in per_topic]
    return CoherenceReport(
        per_topic=per_topic,
        model_score=sum(scores) / len(scores),
        measure="c-v",
        t_terms=t,
        median_score=statistics.median(scores),
    )
