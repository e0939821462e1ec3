"""Synthetic speech corpora with planted topic structure.

The generator plants a configurable number of themes, each owning a
disjoint block of vocabulary, across consecutive quarterly windows.
Speeches sample most tokens from their theme's block and a small
fraction from a shared background pool, so factorizations have a clean
planted answer while extra components are left chasing unstructured
noise. Themes can be restricted to a window range (bursts), and each
speaker has a home theme spoken with a configurable affinity. The plant
is written alongside the corpus and acts as the ground-truth oracle for
recovery tests.
"""

from __future__ import annotations

import csv
import json
import string
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .corpus import Speech
from .embeddings import EmbeddingSpace
from .errors import ParameterError

_THEME_WORDS = (
    "alpha", "bravo", "carbon", "delta", "ember", "falcon", "garnet",
    "harbor", "indigo", "jasper", "kestrel", "lumen",
)


@dataclass(frozen=True)
class PlantConfig:
    """Shape of the planted corpus."""

    themes: int = 3
    windows: int = 12
    speeches_per_window: int = 40
    terms_per_theme: int = 12
    background_terms: int = 20
    tokens_per_speech: tuple[int, int] = (30, 60)
    noise_ratio: float = 0.1
    cross_theme_ratio: float = 0.35
    zipf_exponent: float = 1.0
    speakers_per_theme: int = 2
    affinity: float = 0.9
    bursts: dict[int, tuple[int, int]] = field(default_factory=dict)
    burst_share: float = 0.5
    start: date = date(1999, 7, 1)
    seed: int = 0

    def __post_init__(self):
        if self.themes < 1 or self.themes > len(_THEME_WORDS):
            raise ParameterError(f"themes must be in [1, {len(_THEME_WORDS)}]")
        if self.windows < 1:
            raise ParameterError("windows must be >= 1")
        if self.speeches_per_window < 1:
            raise ParameterError("speeches_per_window must be >= 1")
        if not 0.0 <= self.noise_ratio < 1.0:
            raise ParameterError("noise_ratio must be in [0, 1)")
        if not 0.0 <= self.cross_theme_ratio < 1.0:
            raise ParameterError("cross_theme_ratio must be in [0, 1)")
        if self.noise_ratio + self.cross_theme_ratio >= 1.0:
            raise ParameterError("noise_ratio + cross_theme_ratio must be < 1")
        if self.zipf_exponent < 0.0:
            raise ParameterError("zipf_exponent must be >= 0")
        if not 0.0 <= self.affinity <= 1.0:
            raise ParameterError("affinity must be in [0, 1]")
        if not 0.0 <= self.burst_share < 1.0:
            raise ParameterError("burst_share must be in [0, 1)")
        for theme, (lo, hi) in self.bursts.items():
            if not 0 <= theme < self.themes:
                raise ParameterError(f"burst theme {theme} out of range")
            if not 0 <= lo <= hi < self.windows:
                raise ParameterError(f"burst range {lo}-{hi} outside windows")


@dataclass
class Plant:
    """Ground truth written alongside a generated corpus."""

    config: PlantConfig
    theme_terms: list[list[str]]
    background: list[str]
    active_windows: dict[int, list[int]]
    speech_theme: dict[str, int]
    speaker_home: dict[str, int]
    speaker_affinity: dict[str, float]

    def to_json_dict(self) -> dict:
        return {
            "themes": self.config.themes,
            "windows": self.config.windows,
            "seed": self.config.seed,
            "theme_terms": self.theme_terms,
            "background_terms": self.background,
            "active_windows": {str(k): v for k, v in self.active_windows.items()},
            "speech_theme": self.speech_theme,
            "speaker_home": self.speaker_home,
            "speaker_affinity": self.speaker_affinity,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "Plant":
        config = PlantConfig(
            themes=int(payload["themes"]),
            windows=int(payload["windows"]),
            seed=int(payload["seed"]),
        )
        return cls(
            config=config,
            theme_terms=[list(block) for block in payload["theme_terms"]],
            background=list(payload["background_terms"]),
            active_windows={int(k): list(v) for k, v in payload["active_windows"].items()},
            speech_theme={k: int(v) for k, v in payload["speech_theme"].items()},
            speaker_home={k: int(v) for k, v in payload["speaker_home"].items()},
            speaker_affinity={k: float(v) for k, v in payload["speaker_affinity"].items()},
        )


def _suffixes(count: int) -> list[str]:
    letters = string.ascii_lowercase
    out = []
    for i in range(count):
        out.append(letters[i // 26] + letters[i % 26])
    return out


def _quarter_start(start: date, offset: int) -> date:
    month = start.month - 1 + 3 * offset
    return date(start.year + month // 12, month % 12 + 1, 1)


def generate_corpus(config: PlantConfig | None = None) -> tuple[list[Speech], Plant]:
    """Generate speeches plus the plant that produced them."""
    if config is None:
        config = PlantConfig()
    rng = np.random.default_rng(config.seed)

    theme_terms = [
        [_THEME_WORDS[theme] + suffix for suffix in _suffixes(config.terms_per_theme)]
        for theme in range(config.themes)
    ]
    background = ["common" + suffix for suffix in _suffixes(config.background_terms)]

    active_windows = {
        theme: list(range(config.windows)) for theme in range(config.themes)
    }
    for theme, (lo, hi) in config.bursts.items():
        active_windows[theme] = list(range(lo, hi + 1))

    # In-block term draws follow a Zipf-like law so every theme has head
    # terms; a component merging two themes then interleaves both heads in
    # its descriptor instead of hiding one theme in the tail.
    ranks = np.arange(1, config.terms_per_theme + 1, dtype=np.float64)
    block_p = ranks ** -config.zipf_exponent
    block_p /= block_p.sum()
    block_cdf = np.cumsum(block_p)

    speakers = []
    speaker_home: dict[str, int] = {}
    speaker_affinity: dict[str, float] = {}
    for theme in range(config.themes):
        for slot in range(config.speakers_per_theme):
            speaker = f"speaker{theme:02d}{chr(ord('a') + slot)}"
            speakers.append(speaker)
            speaker_home[speaker] = theme
            # The first speaker of each theme is pure: it never strays.
            speaker_affinity[speaker] = 1.0 if slot == 0 else config.affinity

    speeches: list[Speech] = []
    speech_theme: dict[str, int] = {}
    for window in range(config.windows):
        window_start = _quarter_start(config.start, window)
        window_end = _quarter_start(config.start, window + 1)
        span = (window_end - window_start).days
        active = sorted(
            theme for theme in range(config.themes) if window in active_windows[theme]
        )
        # A burst is an attention spike: while active it claims a boosted
        # share of the window's speeches from every speaker.
        bursting = sorted(th for th in config.bursts if window in active_windows[th])
        for j in range(config.speeches_per_window):
            speaker = speakers[int(rng.integers(len(speakers)))]
            home = speaker_home[speaker]
            if home in active and speaker_affinity[speaker] >= 1.0:
                # Pure speakers never stray, not even for a burst.
                theme = home
            elif bursting and rng.random() < config.burst_share:
                theme = bursting[int(rng.integers(len(bursting)))]
            elif home in active and rng.random() < speaker_affinity[speaker]:
                theme = home
            else:
                choices = [th for th in active if th != home] or active
                theme = choices[int(rng.integers(len(choices)))]

            lo, hi = config.tokens_per_speech
            n_tokens = int(rng.integers(lo, hi + 1))
            tokens = []
            # Speeches mention other active themes in passing; without this
            # cross-theme mass a low-k model can drop whole themes while
            # keeping its descriptors pure, which flattens the coherence
            # curve below the planted count. Pure speakers utter their own
            # theme's vocabulary exclusively.
            pure = speaker_affinity[speaker] >= 1.0 and theme == home
            others = [th for th in active if th != theme]
            for _ in range(n_tokens):
                draw = rng.random()
                if not pure and config.background_terms and draw < config.noise_ratio:
                    tokens.append(background[int(rng.integers(len(background)))])
                    continue
                if (
                    not pure
                    and others
                    and draw < config.noise_ratio + config.cross_theme_ratio
                ):
                    block = theme_terms[others[int(rng.integers(len(others)))]]
                else:
                    block = theme_terms[theme]
                tokens.append(block[int(np.searchsorted(block_cdf, rng.random()))])

            speech_id = f"s{window:03d}{j:04d}"
            speech_theme[speech_id] = theme
            speeches.append(
                Speech(
                    id=speech_id,
                    timestamp=window_start + timedelta(days=int(rng.integers(span))),
                    speaker_id=speaker,
                    text=" ".join(tokens),
                    speaker_name=speaker.replace("speaker", "Speaker "),
                )
            )
    plant = Plant(
        config=config,
        theme_terms=theme_terms,
        background=background,
        active_windows=active_windows,
        speech_theme=speech_theme,
        speaker_home=speaker_home,
        speaker_affinity=speaker_affinity,
    )
    return speeches, plant


def plant_embedding_space(
    plant: Plant, dimension: int = 32, tightness: float = 0.08, seed: int = 0
) -> EmbeddingSpace:
    """Embedding space aligned with the plant.

    Terms of one theme cluster tightly around a shared axis while
    background terms point in independent random directions, giving high
    within-theme cosines, near-zero cross-theme cosines, and incoherent
    background topics.
    """
    themes = len(plant.theme_terms)
    if dimension < themes + 1:
        raise ParameterError(f"dimension must be >= {themes + 1}")
    rng = np.random.default_rng(seed)
    vectors: dict[str, np.ndarray] = {}
    for theme, block in enumerate(plant.theme_terms):
        base = np.zeros(dimension)
        base[theme] = 1.0
        for term in block:
            vec = base + tightness * rng.standard_normal(dimension)
            vectors[term] = vec / np.linalg.norm(vec)
    for term in plant.background:
        vec = rng.standard_normal(dimension)
        vectors[term] = vec / np.linalg.norm(vec)
    return EmbeddingSpace(
        dimension=dimension, vectors=vectors, trained_on=f"plant(seed={seed})"
    )


def write_corpus_csv(speeches: list[Speech], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "date", "speaker_id", "speaker_name", "text"])
        for s in speeches:
            writer.writerow(
                [s.id, s.timestamp.isoformat(), s.speaker_id, s.speaker_name or "", s.text]
            )


def write_plant(plant: Plant, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(plant.to_json_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_plant(path: str | Path) -> Plant:
    return Plant.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def assignment_purity(
    member_themes: dict[tuple[int, int], int],
    assignment: dict[tuple[int, int], int],
) -> float:
    """Fraction of window topics whose dynamic group matches the plant.

    ``member_themes`` maps each window topic to its dominant planted
    theme. Purity is computed per dynamic topic: its majority theme
    claims its members, and the fraction of all window topics claimed by
    their own majority is returned.
    """
    if set(member_themes) != set(assignment):
        raise ParameterError("member_themes and assignment must cover the same keys")
    groups: dict[int, list[int]] = {}
    for key, dynamic in assignment.items():
        groups.setdefault(dynamic, []).append(member_themes[key])
    correct = 0
    for themes in groups.values():
        counts: dict[int, int] = {}
        for theme in themes:
            counts[theme] = counts.get(theme, 0) + 1
        correct += max(counts.values())
    return correct / len(assignment)
