"""Term vector spaces for coherence scoring.

Provides a small skip-gram-with-negative-sampling trainer plus a reader
and writer for the word2vec text format. Training is deterministic for a
fixed seed when run single-threaded: the only randomness comes from one
seeded generator, consumed in a fixed order. Updates are applied one
center position at a time, with all context pairs of that position and
their negative samples processed in a single batched step.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from .errors import FormatError, InputError, ParameterError, TermNotFoundError, TrainingError


@dataclass(frozen=True)
class SkipGramConfig:
    dimension: int = 100
    context_window: int = 5
    negative_samples: int = 5
    epochs: int = 5
    min_count: int = 5
    learning_rate: float = 0.025
    seed: int = 0

    def __post_init__(self):
        for name in ("dimension", "context_window", "negative_samples", "epochs", "min_count"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")
        if not 0.0 < self.learning_rate < 1.0:
            raise ParameterError("learning_rate must be in (0, 1)")


@dataclass
class EmbeddingSpace:
    """Immutable term -> vector map used for TC-W2V coherence."""

    dimension: int
    vectors: dict[str, np.ndarray]
    trained_on: str = ""

    def __post_init__(self):
        if self.dimension < 1:
            raise ParameterError("dimension must be >= 1")
        for term, vec in self.vectors.items():
            if vec.shape != (self.dimension,):
                raise ParameterError(
                    f"vector for {term!r} has length {vec.shape}, expected {self.dimension}"
                )

    def __contains__(self, term: str) -> bool:
        return term in self.vectors

    def vector(self, term: str) -> np.ndarray:
        try:
            return self.vectors[term]
        except KeyError:
            raise TermNotFoundError(f"term {term!r} not in embedding space") from None


def cosine(space: EmbeddingSpace, term_a: str, term_b: str) -> float:
    """Cosine similarity of two term vectors; zero-norm vectors score 0."""
    a = space.vector(term_a)
    b = space.vector(term_b)
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(np.dot(a, b)) / (norm_a * norm_b)


def train_embeddings(
    docs: Iterable[Sequence[str]], config: SkipGramConfig | None = None
) -> EmbeddingSpace:
    """Train SGNS vectors on tokenized documents.

    Vocabulary keeps terms with corpus count >= ``min_count``, indexed by
    descending count (ties alphabetical). Negative samples follow the
    unigram distribution raised to 3/4. The window size is drawn uniformly
    in [1, context_window] per center position, and the learning rate
    decays linearly over all center positions.
    """
    if config is None:
        config = SkipGramConfig()
    sentences = [list(doc) for doc in docs]
    counts: Counter[str] = Counter()
    for sent in sentences:
        counts.update(sent)
    vocab = sorted(
        (t for t, c in counts.items() if c >= config.min_count),
        key=lambda t: (-counts[t], t),
    )
    if not vocab:
        raise TrainingError(
            f"no term reaches min_count={config.min_count}; effective vocabulary is empty"
        )
    index = {t: i for i, t in enumerate(vocab)}

    encoded = []
    for sent in sentences:
        ids = np.array([index[t] for t in sent if t in index], dtype=np.int64)
        if ids.size:
            encoded.append(ids)

    size = len(vocab)
    dim = config.dimension
    rng = np.random.default_rng(config.seed)
    vec_in = (rng.random((size, dim)) - 0.5) / dim
    vec_out = np.zeros((size, dim))

    noise = np.array([counts[t] for t in vocab], dtype=np.float64) ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())

    total_positions = config.epochs * sum(len(s) for s in encoded)
    lr0 = config.learning_rate
    lr_floor = lr0 * 1e-4
    n_neg = config.negative_samples
    processed = 0

    for _epoch in range(config.epochs):
        for sent in encoded:
            length = len(sent)
            for i in range(length):
                lr = max(lr_floor, lr0 * (1.0 - processed / total_positions))
                processed += 1
                reach = int(rng.integers(1, config.context_window + 1))
                lo = max(0, i - reach)
                hi = min(length, i + reach + 1)
                targets = np.concatenate((sent[lo:i], sent[i + 1:hi]))
                if targets.size == 0:
                    continue
                negatives = np.searchsorted(
                    noise_cdf, rng.random(targets.size * n_neg)
                ).reshape(targets.size, n_neg)

                out_idx = np.concatenate((targets, negatives.ravel()))
                labels = np.zeros(out_idx.size)
                labels[: targets.size] = 1.0
                # A negative that collides with its positive target is skipped.
                active = np.ones(out_idx.size, dtype=bool)
                active[targets.size:] = (negatives != targets[:, None]).ravel()

                center = int(sent[i])
                out_block = vec_out[out_idx]
                grad = (labels - expit(out_block @ vec_in[center])) * lr
                grad[~active] = 0.0
                delta_center = grad @ out_block
                np.add.at(vec_out, out_idx, grad[:, None] * vec_in[center])
                vec_in[center] += delta_center

    vectors = {t: vec_in[i].copy() for t, i in index.items()}
    provenance = (
        f"sgns(dim={dim}, window={config.context_window}, neg={n_neg}, "
        f"epochs={config.epochs}, seed={config.seed}) on {len(sentences)} documents"
    )
    return EmbeddingSpace(dimension=dim, vectors=vectors, trained_on=provenance)


def load_embeddings(path: str | Path) -> EmbeddingSpace:
    """Read a word2vec text file: header ``<count> <dim>``, one term per row."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise FormatError(f"{path}: empty file")

    header = lines[0].split()
    if len(header) != 2:
        raise FormatError(f"{path} line 1: expected '<vocab_count> <dimension>'")
    try:
        count, dim = int(header[0]), int(header[1])
    except ValueError as exc:
        raise FormatError(f"{path} line 1: non-integer header") from exc
    if count < 0 or dim < 1:
        raise FormatError(f"{path} line 1: invalid header values")

    vectors: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.rstrip().split(" ")
        if len(parts) != dim + 1:
            raise FormatError(
                f"{path} line {lineno}: expected {dim + 1} fields, found {len(parts)}"
            )
        term = parts[0]
        if term in vectors:
            raise FormatError(f"{path} line {lineno}: duplicate term {term!r}")
        try:
            vectors[term] = np.array([float(v) for v in parts[1:]], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"{path} line {lineno}: non-numeric value") from exc

    if len(vectors) != count:
        raise FormatError(
            f"{path}: header declares {count} terms but file holds {len(vectors)}"
        )
    return EmbeddingSpace(dimension=dim, vectors=vectors, trained_on=str(path))


def save_embeddings(space: EmbeddingSpace, path: str | Path) -> None:
    """Write the word2vec text format; terms keep their insertion order."""
    lines = [f"{len(space.vectors)} {space.dimension}"]
    for term, vec in space.vectors.items():
        lines.append(term + " " + " ".join(repr(float(v)) for v in vec))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
