"""Command-line pipeline driver.

Subcommands cover the whole pipeline: ``synth`` (test corpus generator),
``ingest``, ``embed``, ``window-model``, ``dynamic-model``, ``validate``,
and ``report``. Intermediate artifacts are plain JSON/CSV files under the
output directory, written atomically so re-runs overwrite cleanly and a
failed run leaves prior outputs intact. Exit codes: 0 success, 2 for
usage/input errors, 3 for numeric/model errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import date
from pathlib import Path

from . import corpus as corpus_mod
from . import dynamic as dynamic_mod
from . import nmf, report, synth, validation
from .coherence import KSelectionResult, select_k, topic_coherence_w2v
from .config import PipelineConfig, apply_overrides, load_config
from .embeddings import load_embeddings, save_embeddings, train_embeddings
from .errors import (
    CoherenceUndefinedError,
    InputError,
    ParameterError,
    SpeechTopicsError,
)

logger = logging.getLogger("speechtopics")


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _float_repr(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# artifact locations


def _corpus_store(out_dir: Path) -> Path:
    return out_dir / "corpus" / "speeches.jsonl"


def _window_manifest(out_dir: Path) -> Path:
    return out_dir / "corpus" / "windows.json"


def _embeddings_file(out_dir: Path) -> Path:
    return out_dir / "embeddings" / "embeddings.txt"


def _windows_dir(out_dir: Path) -> Path:
    return out_dir / "windows"


def _dynamic_dir(out_dir: Path) -> Path:
    return out_dir / "dynamic"


def _validation_dir(out_dir: Path) -> Path:
    return out_dir / "validation"


def _save_corpus(speeches: list[corpus_mod.Speech], path: Path) -> None:
    lines = []
    for s in speeches:
        record = {
            "id": s.id,
            "date": s.timestamp.isoformat(),
            "speaker_id": s.speaker_id,
            "speaker_name": s.speaker_name,
            "text": s.text,
        }
        lines.append(json.dumps(record, separators=(",", ":"), ensure_ascii=False))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _save_manifest(windows: list[corpus_mod.TimeWindow], granularity: str, path: Path) -> None:
    payload = {
        "granularity": granularity,
        "windows": [
            {
                "index": w.index,
                "label": w.label,
                "start": w.start.isoformat(),
                "end": w.end.isoformat(),
                "empty": w.empty,
                "speech_ids": list(w.speech_ids),
            }
            for w in windows
        ],
    }
    _atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def _load_manifest(out_dir: Path) -> list[corpus_mod.TimeWindow]:
    path = _window_manifest(out_dir)
    if not path.exists():
        raise InputError(f"window manifest {path} not found; run `ingest` first")
    payload = json.loads(path.read_text(encoding="utf-8"))
    return [
        corpus_mod.TimeWindow(
            index=int(w["index"]),
            label=w["label"],
            start=date.fromisoformat(w["start"]),
            end=date.fromisoformat(w["end"]),
            speech_ids=tuple(w["speech_ids"]),
        )
        for w in payload["windows"]
    ]


def _load_speeches(out_dir: Path) -> list[corpus_mod.Speech]:
    path = _corpus_store(out_dir)
    if not path.exists():
        raise InputError(f"corpus store {path} not found; run `ingest` first")
    return corpus_mod.ingest(path, format="jsonl")


def _load_space(out_dir: Path, override: str | None):
    path = Path(override) if override else _embeddings_file(out_dir)
    if not path.exists():
        raise InputError(
            f"embeddings file {path} not found; run `embed` or pass --embeddings"
        )
    return load_embeddings(path)


def _load_window_models(out_dir: Path) -> list[dynamic_mod.WindowTopicModel]:
    windows_dir = _windows_dir(out_dir)
    paths = sorted(windows_dir.glob("window_*.json"))
    if not paths:
        raise InputError(
            f"no window models found under {windows_dir}; run `window-model` first"
        )
    return [
        dynamic_mod.WindowTopicModel.from_json_dict(
            json.loads(p.read_text(encoding="utf-8"))
        )
        for p in paths
    ]


def _load_dynamic_model(out_dir: Path) -> dynamic_mod.DynamicTopicModel:
    path = _dynamic_dir(out_dir) / "dynamic_model.json"
    if not path.exists():
        raise InputError(f"dynamic model {path} not found; run `dynamic-model` first")
    return dynamic_mod.DynamicTopicModel.from_json_dict(
        json.loads(path.read_text(encoding="utf-8"))
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args, config: PipelineConfig) -> int:
    bursts = {}
    for spec in args.burst or []:
        try:
            theme_part, range_part = spec.split(":")
            lo, hi = range_part.split("-")
            bursts[int(theme_part)] = (int(lo), int(hi))
        except ValueError:
            raise ParameterError(f"bad --burst {spec!r}; expected THEME:LO-HI") from None
    plant_config = synth.PlantConfig(
        themes=args.themes,
        windows=args.windows,
        speeches_per_window=args.speeches_per_window,
        terms_per_theme=args.terms_per_theme,
        background_terms=args.background_terms,
        noise_ratio=args.noise_ratio,
        speakers_per_theme=args.speakers_per_theme,
        affinity=args.affinity,
        bursts=bursts,
        seed=config.seed,
    )
    speeches, plant = synth.generate_corpus(plant_config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus_path = out_dir / "corpus.csv"
    synth.write_corpus_csv(speeches, corpus_path)
    synth.write_plant(plant, out_dir / "plant.json")
    if args.emit_embeddings:
        space = synth.plant_embedding_space(
            plant, dimension=args.embedding_dim, seed=config.seed
        )
        save_embeddings(space, out_dir / "plant_embeddings.txt")
    logger.info("wrote %d speeches to %s", len(speeches), corpus_path)
    return 0


def cmd_ingest(args, config: PipelineConfig) -> int:
    input_path = args.input or config.input_path
    if not input_path:
        raise ParameterError("no input file; pass --input or set input_path in config")
    speeches = corpus_mod.ingest(input_path, format=args.format or config.input_format)
    if not speeches:
        raise InputError(f"no records found in {input_path}")
    windows = corpus_mod.partition_windows(speeches, config.granularity)
    out_dir = Path(config.out_dir)
    _save_corpus(speeches, _corpus_store(out_dir))
    _save_manifest(windows, config.granularity, _window_manifest(out_dir))
    non_empty = sum(1 for w in windows if not w.empty)
    logger.info(
        "ingested %d speeches into %d %s windows (%d non-empty)",
        len(speeches), len(windows), config.granularity, non_empty,
    )
    print(f"{len(speeches)} speeches, {len(windows)} windows ({non_empty} non-empty)")
    return 0


def cmd_embed(args, config: PipelineConfig) -> int:
    out_dir = Path(config.out_dir)
    mode = args.mode or config.embedding_mode
    target = _embeddings_file(out_dir)
    if mode == "load":
        source = args.embeddings or config.embedding_path
        if not source:
            raise ParameterError("--mode load requires --embeddings PATH")
        space = load_embeddings(source)
    else:
        speeches = _load_speeches(out_dir)
        docs = [corpus_mod.preprocess(s, config.preprocess) for s in speeches]
        space = train_embeddings(docs, config.skipgram)
    target.parent.mkdir(parents=True, exist_ok=True)
    save_embeddings(space, target)
    logger.info("wrote %d term vectors to %s", len(space.vectors), target)
    print(f"{len(space.vectors)} terms, dimension {space.dimension}")
    return 0


def _fit_window(
    window: corpus_mod.TimeWindow,
    speeches_by_id: dict,
    config: PipelineConfig,
    space,
) -> dynamic_mod.WindowTopicModel | None:
    try:
        matrix = corpus_mod.build_matrix(window, speeches_by_id, config.preprocess)
    except SpeechTopicsError as exc:
        logger.warning("window %s skipped: %s", window.label, exc)
        return None
    n_docs, n_terms = matrix.shape
    if n_docs < 2:
        logger.warning(
            "window %s skipped: only %d usable document(s)", window.label, n_docs
        )
        return None
    k_cap = min(n_docs, n_terms)
    k_max = min(config.window_k_max, k_cap)
    k_min = min(config.window_k_min, k_max)
    if (k_min, k_max) != (config.window_k_min, config.window_k_max):
        logger.warning(
            "window %s: k range clamped to [%d, %d] by matrix shape %dx%d",
            window.label, k_min, k_max, n_docs, n_terms,
        )
    selection = select_k(
        matrix, k_min, k_max, config.t_coherence, space,
        max_iter=config.nmf_max_iter, tol=config.nmf_tol,
    )
    fitted = nmf.factorize(
        matrix, selection.chosen_k, init="nndsvd",
        max_iter=config.nmf_max_iter, tol=config.nmf_tol,
    )
    descriptors = [
        nmf.top_terms(fitted, h, min(config.t_truncation, n_terms))
        for h in range(fitted.k)
    ]
    return dynamic_mod.WindowTopicModel(
        window_index=window.index,
        factorization=fitted,
        chosen_k=fitted.k,
        descriptors=descriptors,
        window_label=window.label,
        k_selection=selection,
    )


def cmd_window_model(args, config: PipelineConfig) -> int:
    out_dir = Path(config.out_dir)
    speeches = _load_speeches(out_dir)
    speeches_by_id = {s.id: s for s in speeches}
    windows = _load_manifest(out_dir)
    space = _load_space(out_dir, args.embeddings)

    candidates = [w for w in windows if not w.empty]
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            futures = [
                pool.submit(_fit_window, w, speeches_by_id, config, space)
                for w in candidates
            ]
            results = [f.result() for f in futures]
    else:
        results = [_fit_window(w, speeches_by_id, config, space) for w in candidates]

    windows_dir = _windows_dir(out_dir)
    summary_rows = []
    fitted_count = 0
    for model in results:
        if model is None:
            continue
        fitted_count += 1
        path = windows_dir / f"window_{model.window_index:03d}.json"
        _atomic_write_text(
            path, json.dumps(model.to_json_dict(), separators=(",", ":")) + "\n"
        )
        summary_rows.append(
            [
                model.window_index,
                model.window_label,
                model.chosen_k,
                len(model.factorization.doc_ids or ()),
                len(model.factorization.vocabulary or ()),
                _float_repr(model.k_selection.scores[model.chosen_k]),
            ]
        )
    if fitted_count == 0:
        raise InputError("no window produced a usable topic model")
    _atomic_write_text(
        windows_dir / "window_k_selection.csv",
        _csv_text(
            ["window_index", "window_label", "chosen_k", "n_documents", "n_terms", "coherence"],
            summary_rows,
        ),
    )
    logger.info("fitted %d window models under %s", fitted_count, windows_dir)
    print(f"{fitted_count} window models")
    return 0


def cmd_dynamic_model(args, config: PipelineConfig) -> int:
    out_dir = Path(config.out_dir)
    speeches = _load_speeches(out_dir)
    windows = _load_manifest(out_dir)
    models = _load_window_models(out_dir)
    space = _load_space(out_dir, args.embeddings)

    matrix_b = dynamic_mod.build_topic_document_matrix(models, config.t_truncation)
    n_rows, n_cols = matrix_b.shape
    cap = min(n_rows, n_cols)
    k_max = min(config.dynamic_k_max, cap)
    k_min = min(config.dynamic_k_min, k_max)
    if (k_min, k_max) != (config.dynamic_k_min, config.dynamic_k_max):
        logger.warning(
            "dynamic k range clamped to [%d, %d] by topic matrix shape %dx%d",
            k_min, k_max, n_rows, n_cols,
        )
    dtm, selection = dynamic_mod.fit_dynamic(
        matrix_b, k_min, k_max, config.t_coherence, space,
        max_iter=config.nmf_max_iter, tol=config.nmf_tol,
    )

    dynamic_dir = _dynamic_dir(out_dir)
    _atomic_write_text(
        dynamic_dir / "dynamic_model.json",
        json.dumps(dtm.to_json_dict(), separators=(",", ":")) + "\n",
    )
    _atomic_write_text(
        dynamic_dir / "k_selection.json",
        json.dumps(selection.to_json_dict(), separators=(",", ":")) + "\n",
    )

    label_of = {w.index: w.label for w in windows}
    series = dynamic_mod.topic_time_series(
        dtm, models, window_indices=[w.index for w in windows]
    )
    series_rows = []
    for ts in series:
        for w in sorted(ts.per_window):
            count, weight = ts.per_window[w]
            series_rows.append(
                [ts.dynamic_topic, label_of.get(w, str(w)), count, _float_repr(weight)]
            )
    _atomic_write_text(
        dynamic_dir / "time_series.csv",
        _csv_text(["dynamic_topic", "window_label", "speech_count", "weight_sum"], series_rows),
    )

    weights = dynamic_mod.speaker_contributions(dtm, models, speeches, mode="weight_sum")
    counts = dynamic_mod.speaker_contributions(dtm, models, speeches, mode="count")
    speakers = sorted({s.speaker_id for s in speeches})
    contribution_rows = []
    for speaker in speakers:
        for topic in range(dtm.k_prime):
            key = (speaker, topic)
            contribution_rows.append(
                [
                    speaker,
                    topic,
                    _float_repr(weights.get(key, 0.0)),
                    int(counts.get(key, 0)),
                ]
            )
    _atomic_write_text(
        dynamic_dir / "contributions.csv",
        _csv_text(["speaker_id", "dynamic_topic", "weight_sum", "count"], contribution_rows),
    )

    frequency = {ts.dynamic_topic: ts.temporal_frequency for ts in series}
    table_rows = []
    for d in range(dtm.k_prime):
        terms = dtm.descriptors[d].term_list()[: config.t_coherence]
        try:
            coherence = _float_repr(topic_coherence_w2v(terms, space))
        except CoherenceUndefinedError:
            coherence = "na"
        table_rows.append([d, "", ", ".join(terms), coherence, frequency[d]])
    _atomic_write_text(
        dynamic_dir / "descriptor_table.csv",
        _csv_text(
            ["dynamic_topic", "label", "top_terms", "coherence", "frequency"], table_rows
        ),
    )
    logger.info("dynamic model with k'=%d written under %s", dtm.k_prime, dynamic_dir)
    print(f"k'={dtm.k_prime} dynamic topics from {n_rows} window topics")
    return 0


def cmd_validate(args, config: PipelineConfig) -> int:
    out_dir = Path(config.out_dir)
    models = _load_window_models(out_dir)
    dtm = _load_dynamic_model(out_dir)
    validation_dir = _validation_dir(out_dir)

    stability = validation.term_stability(dtm, models, args.t or config.t_coherence)
    rows = [
        [r.dynamic_topic, "na" if r.mean_jaccard is None else _float_repr(r.mean_jaccard), r.n_members]
        for r in stability
    ]
    _atomic_write_text(
        validation_dir / "stability.csv",
        _csv_text(["dynamic_topic", "mean_jaccard", "n_members"], rows),
    )
    overall = validation.overall_stability(stability)
    if overall is not None:
        print(f"mean stability {overall:.4f} over {len(stability)} dynamic topics")

    if dtm.k_prime >= 2:
        dendrogram = validation.cluster_topics(dtm)
        _atomic_write_text(
            validation_dir / "dendrogram.json", dendrogram.to_json() + "\n"
        )
        _atomic_write_text(
            validation_dir / "dendrogram.newick", dendrogram.to_newick() + "\n"
        )
    else:
        logger.warning("only one dynamic topic; dendrogram skipped")

    if args.taxonomy:
        subjects = validation.load_taxonomy(args.taxonomy, level=args.taxonomy_level)
        matches = validation.match_taxonomy(
            dtm, subjects, args.t or config.t_coherence, config=config.preprocess
        )
        match_rows = [
            [m.code, m.title, m.dynamic_topic, _float_repr(m.similarity)]
            for m in matches
        ]
        _atomic_write_text(
            validation_dir / "taxonomy_matches.csv",
            _csv_text(["code", "title", "dynamic_topic", "similarity"], match_rows),
        )
    else:
        logger.info("no taxonomy file supplied; matching skipped")
        print("taxonomy matching skipped (no --taxonomy)")
    return 0


def _parse_topic_filter(text: str | None) -> list[int] | None:
    if text is None:
        return None
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ParameterError(f"bad --topics {text!r}; expected e.g. '3,5'") from None


def cmd_report(args, config: PipelineConfig) -> int:
    out_dir = Path(config.out_dir)
    dynamic_dir = _dynamic_dir(out_dir)
    required = {
        "window manifest": _window_manifest(out_dir),
        "window summary": _windows_dir(out_dir) / "window_k_selection.csv",
        "dynamic model": dynamic_dir / "dynamic_model.json",
        "dynamic k selection": dynamic_dir / "k_selection.json",
        "time series": dynamic_dir / "time_series.csv",
        "descriptor table": dynamic_dir / "descriptor_table.csv",
    }
    missing = [f"{name} ({path})" for name, path in required.items() if not path.exists()]
    if missing:
        raise InputError("missing inputs: " + "; ".join(missing))

    windows = _load_manifest(out_dir)
    label_to_index = {w.label: w.index for w in windows}
    window_labels = {w.index: w.label for w in windows}
    dtm = _load_dynamic_model(out_dir)
    selection = KSelectionResult.from_json_dict(
        json.loads(required["dynamic k selection"].read_text(encoding="utf-8"))
    )

    with open(required["window summary"], encoding="utf-8") as handle:
        window_summary = [
            {
                "window_index": int(row["window_index"]),
                "window_label": row["window_label"],
                "chosen_k": int(row["chosen_k"]),
            }
            for row in csv.DictReader(handle)
        ]

    per_topic: dict[int, dict[int, tuple[int, float]]] = {}
    with open(required["time series"], encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            topic = int(row["dynamic_topic"])
            index = label_to_index[row["window_label"]]
            per_topic.setdefault(topic, {})[index] = (
                int(row["speech_count"]),
                float(row["weight_sum"]),
            )
    series = [
        dynamic_mod.TopicTimeSeries(
            dynamic_topic=topic,
            per_window=windows_map,
            temporal_frequency=sum(1 for c, _ in windows_map.values() if c > 0),
        )
        for topic, windows_map in sorted(per_topic.items())
    ]

    topic_stats: dict[int, dict] = {}
    with open(required["descriptor table"], encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            coherence = None if row["coherence"] == "na" else float(row["coherence"])
            topic_stats[int(row["dynamic_topic"])] = {
                "coherence": coherence,
                "frequency": int(row["frequency"]),
            }

    topics = _parse_topic_filter(args.topics)
    index = report.render_report(
        out_dir / "report",
        dtm,
        series,
        window_labels,
        selection,
        window_summary,
        topic_stats,
        topics=topics,
    )
    logger.info("report written to %s", index)
    print(str(index))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="speechtopics",
        description="Two-layer NMF dynamic topic modeling for timestamped speech corpora",
    )
    parser.add_argument("--config", help="TOML or JSON pipeline config file")
    parser.add_argument("--seed", type=int, help="override the pipeline seed")
    parser.add_argument("--out-dir", help="output directory (default 'out')")
    parser.add_argument("--threads", type=int, help="worker threads for per-window fits")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic planted corpus")
    p.add_argument("--themes", type=int, default=3)
    p.add_argument("--windows", type=int, default=12)
    p.add_argument("--speeches-per-window", type=int, default=40)
    p.add_argument("--terms-per-theme", type=int, default=12)
    p.add_argument("--background-terms", type=int, default=20)
    p.add_argument("--noise-ratio", type=float, default=0.1)
    p.add_argument("--speakers-per-theme", type=int, default=2)
    p.add_argument("--affinity", type=float, default=0.9)
    p.add_argument(
        "--burst", action="append", metavar="THEME:LO-HI",
        help="restrict a theme to a window range (repeatable)",
    )
    p.add_argument(
        "--emit-embeddings", action="store_true",
        help="also write a plant-aligned embedding file",
    )
    p.add_argument("--embedding-dim", type=int, default=32)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="read a corpus and build the window index")
    p.add_argument("--input", help="CSV or JSONL corpus file")
    p.add_argument("--format", choices=["csv", "jsonl"])
    p.add_argument("--granularity", choices=list(corpus_mod.GRANULARITIES))
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("embed", help="train or load the term embedding space")
    p.add_argument("--mode", choices=["train", "load"])
    p.add_argument("--embeddings", help="word2vec text file for --mode load")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("window-model", help="fit one topic model per window")
    p.add_argument("--embeddings", help="embedding file (default from out dir)")
    p.set_defaults(func=cmd_window_model)

    p = sub.add_parser("dynamic-model", help="fit the second-layer dynamic model")
    p.add_argument("--embeddings", help="embedding file (default from out dir)")
    p.set_defaults(func=cmd_dynamic_model)

    p = sub.add_parser("validate", help="stability, clustering, taxonomy matching")
    p.add_argument("--taxonomy", help="TSV taxonomy file")
    p.add_argument("--taxonomy-level", type=int, default=None)
    p.add_argument("--t", type=int, help="descriptor length (default t_coherence)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="render CSV + SVG + HTML report")
    p.add_argument("--topics", help="comma-separated dynamic topics to include")
    p.set_defaults(func=cmd_report)
    return parser


def _resolve_config(args) -> PipelineConfig:
    if args.config:
        config = load_config(args.config)
    else:
        config = PipelineConfig()
    config = apply_overrides(
        config,
        out_dir=args.out_dir,
        seed=args.seed,
        threads=args.threads,
        granularity=getattr(args, "granularity", None),
    )
    if args.seed is not None:
        config = apply_overrides(config, skipgram=replace(config.skipgram, seed=args.seed))
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = _resolve_config(args)
        return args.func(args, config)
    except SpeechTopicsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
