"""Pipeline configuration: defaults, TOML/JSON loading, CLI overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .corpus import GRANULARITIES, PreprocessConfig, load_lemma_table, load_term_set
from .embeddings import SkipGramConfig
from .errors import FormatError, InputError, ParameterError


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a full pipeline run needs.

    Defaults follow the reference experiment: quarterly windows, per
    window topic counts swept over [10, 25], dynamic topic counts over
    [25, 90], 10 descriptor terms for coherence, and 20-term truncation
    when stacking window topics.
    """

    input_path: str = ""
    input_format: str | None = None
    granularity: str = "quarter"
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    window_k_min: int = 10
    window_k_max: int = 25
    dynamic_k_min: int = 25
    dynamic_k_max: int = 90
    t_coherence: int = 10
    t_truncation: int = 20
    embedding_mode: str = "train"
    embedding_path: str | None = None
    skipgram: SkipGramConfig = field(default_factory=SkipGramConfig)
    nmf_max_iter: int = 200
    nmf_tol: float = 1e-5
    cv_window_size: int = 110
    out_dir: str = "out"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.granularity not in GRANULARITIES:
            raise ParameterError(f"granularity must be one of {GRANULARITIES}")
        for lo, hi, what in (
            (self.window_k_min, self.window_k_max, "window k range"),
            (self.dynamic_k_min, self.dynamic_k_max, "dynamic k range"),
        ):
            if not 1 <= lo <= hi:
                raise ParameterError(f"{what} [{lo}, {hi}] must be non-empty and ordered")
        if self.t_coherence < 2:
            raise ParameterError("t_coherence must be >= 2")
        if self.t_truncation < 1:
            raise ParameterError("t_truncation must be >= 1")
        if self.embedding_mode not in ("train", "load"):
            raise ParameterError("embedding_mode must be 'train' or 'load'")
        if self.embedding_mode == "load" and not self.embedding_path:
            raise ParameterError("embedding_mode 'load' requires embedding_path")
        if self.threads < 1:
            raise ParameterError("threads must be >= 1")


def _build_preprocess(section: dict, base_dir: Path) -> PreprocessConfig:
    def resolve(name):
        value = section.get(name)
        if value is None:
            return None
        return base_dir / value

    kwargs = {}
    if "min_token_length" in section:
        kwargs["min_token_length"] = int(section["min_token_length"])
    if "min_document_frequency" in section:
        kwargs["min_document_frequency"] = int(section["min_document_frequency"])
    for key, file_key in (
        ("generic_stopwords", "generic_stopwords_file"),
        ("domain_stopwords", "domain_stopwords_file"),
        ("name_stopwords", "name_stopwords_file"),
    ):
        path = resolve(file_key)
        if path is not None:
            kwargs[key] = load_term_set(path)
        elif key in section:
            kwargs[key] = frozenset(str(t).lower() for t in section[key])
    lemma_path = resolve("lemma_table_file")
    if lemma_path is not None:
        kwargs["lemma_table"] = load_lemma_table(lemma_path)
    if "header_prefixes" in section:
        kwargs["header_prefixes"] = tuple(section["header_prefixes"])
    return PreprocessConfig(**kwargs)


def _build_skipgram(section: dict) -> SkipGramConfig:
    allowed = {
        "dimension", "context_window", "negative_samples",
        "epochs", "min_count", "learning_rate", "seed",
    }
    unknown = set(section) - allowed
    if unknown:
        raise FormatError(f"unknown skipgram settings: {sorted(unknown)}")
    return SkipGramConfig(**section)


def load_config(path: str | Path) -> PipelineConfig:
    """Read a TOML or JSON pipeline config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if path.suffix.lower() == ".toml":
        try:
            payload = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise FormatError(f"{path}: invalid TOML: {exc}") from exc
    else:
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise FormatError(f"{path}: expected a table/object at top level")

    base_dir = path.parent
    kwargs: dict = {}
    scalar_keys = (
        "input_path", "input_format", "granularity",
        "window_k_min", "window_k_max", "dynamic_k_min", "dynamic_k_max",
        "t_coherence", "t_truncation", "embedding_mode", "embedding_path",
        "nmf_max_iter", "nmf_tol", "cv_window_size", "out_dir", "seed", "threads",
    )
    for key in scalar_keys:
        if key in payload:
            kwargs[key] = payload[key]
    if "preprocess" in payload:
        kwargs["preprocess"] = _build_preprocess(payload["preprocess"], base_dir)
    if "skipgram" in payload:
        kwargs["skipgram"] = _build_skipgram(payload["skipgram"])
    known = set(scalar_keys) | {"preprocess", "skipgram"}
    unknown = set(payload) - known
    if unknown:
        raise FormatError(f"{path}: unknown settings: {sorted(unknown)}")
    try:
        return PipelineConfig(**kwargs)
    except TypeError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def apply_overrides(config: PipelineConfig, **overrides) -> PipelineConfig:
    """Replace config fields with any non-None override values."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    if not updates:
        return config
    return replace(config, **updates)
