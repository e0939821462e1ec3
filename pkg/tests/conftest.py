"""Shared fixtures: small corpora, planted matrices, and pipeline runs."""

from __future__ import annotations

import time
from collections import Counter
from datetime import date

import numpy as np
import pytest

from speechtopics import corpus as corpus_mod
from speechtopics import nmf, synth
from speechtopics.coherence import select_k
from speechtopics.dynamic import (
    WindowTopicModel,
    assign_speeches,
    build_topic_document_matrix,
    fit_dynamic,
)
from speechtopics.embeddings import EmbeddingSpace


def make_space(vectors: dict[str, list[float]]) -> EmbeddingSpace:
    arrays = {t: np.asarray(v, dtype=np.float64) for t, v in vectors.items()}
    dimension = len(next(iter(arrays.values())))
    return EmbeddingSpace(dimension=dimension, vectors=arrays)


def make_speech(sid: str, day: str, speaker: str = "sp1", text: str = "x") -> corpus_mod.Speech:
    return corpus_mod.Speech(
        id=sid, timestamp=date.fromisoformat(day), speaker_id=speaker, text=text
    )


def planted_nmf_matrix(seed: int) -> tuple[np.ndarray, int]:
    """Well-separated planted factors: disjoint term blocks per topic,
    one dominant topic per document, exact rank k."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(30, 201))
    m = int(rng.integers(30, 201))
    k = max(2, min(int(rng.integers(2, 11)), m // 4, n // 4))
    H = np.zeros((k, m))
    for j, cols in enumerate(np.array_split(np.arange(m), k)):
        H[j, cols] = 0.5 + rng.random(len(cols))
    W = np.zeros((n, k))
    W[np.arange(n), rng.integers(0, k, n)] = 0.5 + rng.random(n)
    return W @ H, k


def window_topic_fixtures(seed: int, t: int) -> list[WindowTopicModel]:
    """Random window topic models for layer-2 structure tests."""
    rng = np.random.default_rng(seed)
    n_windows = int(rng.integers(1, 6))
    models = []
    for w in range(n_windows):
        k = int(rng.integers(1, 7))
        m = int(rng.integers(max(2, t), 40))
        vocab = tuple(f"w{w}t{j:03d}" for j in range(m))
        H = np.abs(rng.standard_normal((k, m))) + 1e-6
        W = np.abs(rng.standard_normal((int(rng.integers(2, 10)), k)))
        f = nmf.Factorization(
            W=W, H=H, k=k, iterations_run=0, final_error=0.0, vocabulary=vocab
        )
        descriptors = [nmf.top_terms(f, h, min(t, m)) for h in range(k)]
        models.append(WindowTopicModel(w, f, k, descriptors))
    return models


@pytest.fixture(scope="session")
def planted_pipeline():
    """Library-level pipeline run on the planted burst corpus (seed 7).

    Three themes over 12 quarterly windows; theme 2 bursts in windows
    8-10. Returns everything downstream tests need, including the plant.
    """
    t_start = time.monotonic()
    config = synth.PlantConfig(
        themes=3,
        windows=12,
        speeches_per_window=100,
        bursts={2: (8, 10)},
        cross_theme_ratio=0.25,
        seed=7,
    )
    speeches, plant = synth.generate_corpus(config)
    windows = corpus_mod.partition_windows(speeches, "quarter")
    space = synth.plant_embedding_space(plant, seed=7)
    preprocess = corpus_mod.PreprocessConfig(min_document_frequency=5)
    by_id = {s.id: s for s in speeches}

    models = []
    for window in windows:
        matrix = corpus_mod.build_matrix(window, by_id, preprocess)
        n, m = matrix.shape
        selection = select_k(matrix, 2, min(6, min(n, m)), 10, space)
        fitted = nmf.factorize(matrix, selection.chosen_k)
        descriptors = [
            nmf.top_terms(fitted, h, min(20, m)) for h in range(fitted.k)
        ]
        models.append(
            WindowTopicModel(
                window.index, fitted, fitted.k, descriptors, window.label, selection
            )
        )

    matrix_b = build_topic_document_matrix(models, 20)
    dtm, selection = fit_dynamic(matrix_b, 3, 6, 10, space)

    # Dominant planted theme of each window topic, via its assigned speeches.
    member_theme = {}
    for model in models:
        assigned, _ = assign_speeches(model)
        themes_per_topic: dict[int, list[int]] = {}
        for sid, topic in assigned.items():
            themes_per_topic.setdefault(topic, []).append(plant.speech_theme[sid])
        for topic, themes in themes_per_topic.items():
            member_theme[(model.window_index, topic)] = (
                Counter(themes).most_common(1)[0][0]
            )

    theme_to_dynamic = {
        theme: Counter(
            dtm.assignment[key] for key, th in member_theme.items() if th == theme
        ).most_common(1)[0][0]
        for theme in range(3)
    }
    return {
        "speeches": speeches,
        "by_id": by_id,
        "plant": plant,
        "windows": windows,
        "space": space,
        "models": models,
        "B": matrix_b,
        "dtm": dtm,
        "selection": selection,
        "member_theme": member_theme,
        "theme_to_dynamic": theme_to_dynamic,
        "elapsed": time.monotonic() - t_start,
    }
