"""Validation battery for dynamic topic models.

Three checks: Jaccard term stability of each dynamic topic across its
member window topics, average-linkage agglomerative clustering of the
dynamic topic term vectors, and matching dynamic topics against an
external subject taxonomy by TF-IDF cosine similarity. Pearson
correlation between topic rows is mapped to the distance

    d(a, b) = 1 - (1 + pearson(a, b)) / 2

so correlation 1 gives distance 0 and correlation -1 distance 1; rows
with zero variance correlate 0 with everything by convention.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import nmf
from .corpus import PreprocessConfig, tokenize_text
from .dynamic import DynamicTopicModel, WindowTopicModel, _models_by_window
from .errors import FormatError, InputError, ParameterError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dendrogram:
    """Merge history of an agglomerative clustering.

    Leaves are numbered 0..len(leaves)-1; merge i creates cluster
    len(leaves)+i. ``merges`` holds (cluster_a, cluster_b, height) with
    cluster_a < cluster_b.
    """

    leaves: tuple[str, ...]
    merges: tuple[tuple[int, int, float], ...]
    linkage: str = "average"

    def to_json_dict(self) -> dict:
        return {
            "linkage": self.linkage,
            "leaves": list(self.leaves),
            "merges": [[a, b, h] for a, b, h in self.merges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    def to_newick(self) -> str:
        """Newick string with branch lengths from merge heights."""
        n = len(self.leaves)
        heights = {i: 0.0 for i in range(n)}
        nodes: dict[int, str] = {i: self.leaves[i] for i in range(n)}
        for step, (a, b, height) in enumerate(self.merges):
            new_id = n + step
            parts = []
            for child in (a, b):
                length = height - heights[child]
                parts.append(f"{nodes[child]}:{length:.10g}")
            nodes[new_id] = f"({parts[0]},{parts[1]})"
            heights[new_id] = height
        root = n + len(self.merges) - 1 if self.merges else 0
        return nodes[root] + ";"


@dataclass(frozen=True)
class SubjectDocument:
    """One taxonomy subject with its own and descendant descriptions."""

    code: str
    title: str
    text: str

    def __post_init__(self):
        if not self.code:
            raise ValidationError("subject code must be non-empty")
        if not self.text.strip():
            raise ValidationError(f"subject {self.code}: text must be non-empty")


@dataclass(frozen=True)
class TopicStability:
    dynamic_topic: int
    mean_jaccard: float | None
    n_members: int


@dataclass(frozen=True)
class TaxonomyMatch:
    code: str
    title: str
    dynamic_topic: int
    similarity: float


def jaccard(set_a: Iterable[str], set_b: Iterable[str]) -> float:
    """Intersection over union of two term sets."""
    a, b = set(set_a), set(set_b)
    if not a and not b:
        raise ParameterError("jaccard undefined for two empty sets")
    return len(a & b) / len(a | b)


def term_stability(
    dtm: DynamicTopicModel, models: Sequence[WindowTopicModel], t: int
) -> list[TopicStability]:
    """Mean Jaccard agreement between consecutive member descriptors.

    Member window topics are ordered by (window_index, topic_index);
    dynamic topics with fewer than two members are reported with a None
    score (stability is not applicable).
    """
    if t < 1:
        raise ParameterError("t must be >= 1")
    by_window = _models_by_window(models)
    results: list[TopicStability] = []
    for d in range(dtm.k_prime):
        members = dtm.members(d)
        if len(members) < 2:
            results.append(TopicStability(d, None, len(members)))
            continue
        term_sets = []
        for w, i in members:
            f = by_window[w].factorization
            descriptor = nmf.top_terms(f, i, min(t, f.H.shape[1]))
            term_sets.append(descriptor.term_set())
        scores = [
            jaccard(term_sets[i], term_sets[i + 1]) for i in range(len(term_sets) - 1)
        ]
        results.append(TopicStability(d, sum(scores) / len(scores), len(members)))
    return results


def overall_stability(results: Sequence[TopicStability]) -> float | None:
    """Mean stability across the dynamic topics where it is defined."""
    scores = [r.mean_jaccard for r in results if r.mean_jaccard is not None]
    if not scores:
        return None
    return sum(scores) / len(scores)


def _pearson_rows(V: np.ndarray) -> np.ndarray:
    n = V.shape[0]
    centered = V - V.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    corr = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                corr[i, j] = 1.0
            elif norms[i] == 0.0 or norms[j] == 0.0:
                corr[i, j] = 0.0
            else:
                corr[i, j] = float(np.dot(centered[i], centered[j])) / (
                    norms[i] * norms[j]
                )
    return corr


def cluster_topics(
    dtm_or_rows: DynamicTopicModel | np.ndarray,
    labels: Sequence[str] | None = None,
) -> Dendrogram:
    """Average-linkage clustering of dynamic topic term vectors.

    Cluster distances are updated with the Lance-Williams rule for
    average linkage; merge ties break on the lowest (a, b) cluster index
    pair, so the merge order is deterministic.
    """
    if isinstance(dtm_or_rows, DynamicTopicModel):
        V = np.asarray(dtm_or_rows.V, dtype=np.float64)
    else:
        V = np.asarray(dtm_or_rows, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] < 2:
        raise ParameterError("clustering requires at least 2 topic rows")
    n = V.shape[0]
    if labels is None:
        labels = [str(i) for i in range(n)]
    elif len(labels) != n:
        raise ParameterError(f"{len(labels)} labels for {n} rows")

    corr = _pearson_rows(V)
    dist: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            dist[(i, j)] = 1.0 - (1.0 + corr[i, j]) / 2.0

    sizes = {i: 1 for i in range(n)}
    active = sorted(sizes)
    merges: list[tuple[int, int, float]] = []
    for step in range(n - 1):
        best: tuple[int, int] | None = None
        best_d = math.inf
        for ai in range(len(active)):
            for bi in range(ai + 1, len(active)):
                a, b = active[ai], active[bi]
                d = dist[(a, b)]
                if d < best_d or (d == best_d and (a, b) < best):
                    best, best_d = (a, b), d
        a, b = best
        new_id = n + step
        merges.append((a, b, best_d))
        for c in active:
            if c in (a, b):
                continue
            pooled = (
                sizes[a] * dist[(min(a, c), max(a, c))]
                + sizes[b] * dist[(min(b, c), max(b, c))]
            ) / (sizes[a] + sizes[b])
            dist[(c, new_id)] = pooled
        sizes[new_id] = sizes[a] + sizes[b]
        active = [c for c in active if c not in (a, b)] + [new_id]
        active.sort()
    return Dendrogram(leaves=tuple(labels), merges=tuple(merges))


def load_taxonomy(path: str | Path, level: int | None = None) -> list[SubjectDocument]:
    """Read a TSV taxonomy: ``code<TAB>title<TAB>description`` per line.

    Hierarchy comes from dotted codes ('3.20' parents '3.20.01'). With
    ``level`` set, only codes of that dot depth become subject documents,
    each concatenating its own title and description with those of every
    deeper code in its branch.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    entries: list[tuple[str, str, str]] = []
    seen: set[str] = set()
    for i, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 3:
            raise FormatError(f"{path} line {i}: expected 'code<TAB>title<TAB>description'")
        code, title, description = parts[0].strip(), parts[1].strip(), parts[2].strip()
        if not code:
            raise FormatError(f"{path} line {i}: empty code")
        if code in seen:
            raise FormatError(f"{path} line {i}: duplicate code {code!r}")
        seen.add(code)
        entries.append((code, title, description))

    def depth(code: str) -> int:
        return code.count(".") + 1

    subjects: list[SubjectDocument] = []
    for code, title, description in sorted(entries):
        if level is not None and depth(code) != level:
            continue
        texts = [title, description]
        prefix = code + "."
        for other_code, other_title, other_description in sorted(entries):
            if other_code.startswith(prefix):
                texts.extend([other_title, other_description])
        text = " ".join(t for t in texts if t)
        subjects.append(SubjectDocument(code=code, title=title, text=text))
    return subjects


def match_taxonomy(
    dtm: DynamicTopicModel,
    subjects: Sequence[SubjectDocument],
    t: int,
    config: PreprocessConfig | None = None,
) -> list[TaxonomyMatch]:
    """Best-matching dynamic topic for each subject, by TF-IDF cosine.

    Subject documents and topic descriptors are embedded as sublinear
    TF-IDF vectors over the vocabulary of the subject collection (idf
    from subject document frequencies). Subjects whose processed text is
    empty are skipped with a warning. Output is sorted by similarity
    descending.
    """
    if not subjects:
        raise ParameterError("at least one subject document is required")
    if t < 1:
        raise ParameterError("t must be >= 1")
    if config is None:
        config = PreprocessConfig(min_document_frequency=1)

    tokenized: list[tuple[SubjectDocument, list[str]]] = []
    for subject in subjects:
        tokens = tokenize_text(subject.text, config)
        if not tokens:
            logger.warning("subject %s has empty processed text; skipped", subject.code)
            continue
        tokenized.append((subject, tokens))
    if not tokenized:
        raise ParameterError("no subject document survived preprocessing")

    n_subjects = len(tokenized)
    df: Counter[str] = Counter()
    for _, tokens in tokenized:
        df.update(set(tokens))
    vocabulary = sorted(df)
    term_index = {term: j for j, term in enumerate(vocabulary)}
    idf = np.array([math.log(n_subjects / df[term]) for term in vocabulary])

    def embed(token_counts: Counter[str]) -> np.ndarray:
        vec = np.zeros(len(vocabulary))
        for term, count in token_counts.items():
            j = term_index.get(term)
            if j is not None:
                vec[j] = (1.0 + math.log(count)) * idf[j]
        return vec

    subject_vectors = [embed(Counter(tokens)) for _, tokens in tokenized]
    topic_vectors = []
    for d in range(dtm.k_prime):
        descriptor = dtm.descriptors[d]
        terms = descriptor.term_list()[:t]
        topic_vectors.append(embed(Counter(terms)))

    def cos(u: np.ndarray, v: np.ndarray) -> float:
        nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
        if nu == 0.0 or nv == 0.0:
            return 0.0
        return float(np.dot(u, v)) / (nu * nv)

    matches = []
    for (subject, _), svec in zip(tokenized, subject_vectors):
        sims = [cos(svec, tvec) for tvec in topic_vectors]
        best = max(range(len(sims)), key=lambda d: (sims[d], -d))
        matches.append(
            TaxonomyMatch(
                code=subject.code,
                title=subject.title,
                dynamic_topic=best,
                similarity=sims[best],
            )
        )
    matches.sort(key=lambda m: (-m.similarity, m.code))
    return matches
