"""Static report rendering: matplotlib SVG figures plus one HTML page.

Figures are written as standalone SVG files next to the CSV outputs and
also inlined into a self-contained index.html, so the page needs no
external resources. Rendering is deterministic for identical inputs: the
SVG id hash salt is pinned and the creation date metadata is stripped.
"""

from __future__ import annotations

import html
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .coherence import KSelectionResult
from .dynamic import DynamicTopicModel, TopicTimeSeries

matplotlib.rcParams["svg.hashsalt"] = "speechtopics"

_FIG_SIZE = (7.0, 3.2)


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _series_figure(
    series: TopicTimeSeries, window_labels: dict[int, str], title: str, path: Path
) -> None:
    windows = sorted(series.per_window)
    counts = [series.per_window[w][0] for w in windows]
    weights = [series.per_window[w][1] for w in windows]
    labels = [window_labels.get(w, str(w)) for w in windows]

    fig, ax = plt.subplots(figsize=_FIG_SIZE)
    ax.plot(range(len(windows)), counts, marker="o", markersize=3, label="speeches")
    ax.set_ylabel("assigned speeches")
    ax.set_ylim(bottom=0)
    ax2 = ax.twinx()
    ax2.plot(
        range(len(windows)), weights, color="tab:orange",
        linestyle="--", linewidth=1.0, label="weight sum",
    )
    ax2.set_ylabel("weight sum")
    ax2.set_ylim(bottom=0)
    step = max(1, len(windows) // 12)
    ax.set_xticks(range(0, len(windows), step))
    ax.set_xticklabels(labels[::step], rotation=45, ha="right", fontsize=7)
    ax.set_title(title)
    lines = ax.get_lines() + ax2.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], fontsize=7, loc="upper left")
    fig.tight_layout()
    _save(fig, path)


def _selection_figure(selection: KSelectionResult, title: str, path: Path) -> None:
    ks = sorted(selection.scores)
    scores = [selection.scores[k] for k in ks]
    fig, ax = plt.subplots(figsize=_FIG_SIZE)
    ax.plot(ks, scores, marker="o", markersize=3)
    ax.axvline(selection.chosen_k, color="tab:red", linestyle=":", linewidth=1.0)
    ax.annotate(
        f"k={selection.chosen_k}",
        (selection.chosen_k, selection.scores[selection.chosen_k]),
        textcoords="offset points", xytext=(4, 4), fontsize=8,
    )
    ax.set_xlabel("number of topics")
    ax.set_ylabel("mean coherence")
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def _window_counts_figure(
    windows: Sequence[dict], title: str, path: Path
) -> None:
    indices = [w["window_index"] for w in windows]
    ks = [w["chosen_k"] for w in windows]
    labels = [w["window_label"] for w in windows]
    fig, ax = plt.subplots(figsize=_FIG_SIZE)
    ax.plot(range(len(indices)), ks, marker="o", markersize=3)
    step = max(1, len(indices) // 12)
    ax.set_xticks(range(0, len(indices), step))
    ax.set_xticklabels(labels[::step], rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("topics per window")
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def render_report(
    report_dir: str | Path,
    dtm: DynamicTopicModel,
    series: Sequence[TopicTimeSeries],
    window_labels: dict[int, str],
    dynamic_selection: KSelectionResult,
    window_summary: Sequence[dict],
    topic_stats: dict[int, dict],
    topics: Sequence[int] | None = None,
) -> Path:
    """Render all figures and the HTML page; returns the index path.

    ``topic_stats`` maps dynamic topic -> {"coherence": float | None,
    "frequency": int}. With ``topics`` set, only those dynamic topics get
    charts and table rows.
    """
    report_dir = Path(report_dir)
    figures_dir = report_dir / "figures"
    figures_dir.mkdir(parents=True, exist_ok=True)

    chosen = list(topics) if topics is not None else [s.dynamic_topic for s in series]
    chosen_set = set(chosen)
    shown = [s for s in series if s.dynamic_topic in chosen_set]

    figure_files: list[tuple[str, Path]] = []
    selection_path = figures_dir / "dynamic_k_selection.svg"
    _selection_figure(dynamic_selection, "Dynamic topic count selection", selection_path)
    figure_files.append(("Dynamic topic count selection", selection_path))

    if window_summary:
        counts_path = figures_dir / "window_topic_counts.svg"
        _window_counts_figure(window_summary, "Topics per window", counts_path)
        figure_files.append(("Topics per window", counts_path))

    for s in shown:
        path = figures_dir / f"topic_{s.dynamic_topic:03d}.svg"
        _series_figure(
            s, window_labels, f"Dynamic topic {s.dynamic_topic}", path
        )
        figure_files.append((f"Dynamic topic {s.dynamic_topic}", path))

    # k-vs-coherence series as CSV, for external plotting.
    lines = ["k,coherence"]
    for k in sorted(dynamic_selection.scores):
        lines.append(f"{k},{dynamic_selection.scores[k]!r}")
    (report_dir / "k_selection.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    parts = [
        "<!DOCTYPE html>",
        "<html><head><meta charset='utf-8'><title>Dynamic topic report</title>",
        "<style>",
        "body{font-family:sans-serif;max-width:1000px;margin:2em auto;}",
        "table{border-collapse:collapse;margin:1em 0;}",
        "td,th{border:1px solid #999;padding:4px 8px;font-size:13px;text-align:left;}",
        "figure{margin:1.5em 0;}",
        "</style></head><body>",
        "<h1>Dynamic topic report</h1>",
        f"<p>{dtm.k_prime} dynamic topics; showing {len(shown)}.</p>",
        "<h2>Topic descriptors</h2>",
        "<table><tr><th>Topic</th><th>Label</th><th>Top terms</th>"
        "<th>Coherence</th><th>Frequency</th></tr>",
    ]
    for d in sorted(chosen_set):
        if d < 0 or d >= dtm.k_prime:
            continue
        descriptor = dtm.descriptors[d]
        stats = topic_stats.get(d, {})
        coherence = stats.get("coherence")
        coherence_text = f"{coherence:.4f}" if coherence is not None else "na"
        frequency = stats.get("frequency", "na")
        terms = ", ".join(html.escape(t) for t in descriptor.term_list())
        parts.append(
            f"<tr><td>{d}</td><td></td><td>{terms}</td>"
            f"<td>{coherence_text}</td><td>{frequency}</td></tr>"
        )
    parts.append("</table>")

    for title, path in figure_files:
        svg = path.read_text(encoding="utf-8")
        # Strip the XML prolog and DOCTYPE so the SVG can sit inline.
        start = svg.find("<svg")
        if start > 0:
            svg = svg[start:]
        parts.append(f"<figure>{svg}<figcaption>{html.escape(title)}</figcaption></figure>")
    parts.append("</body></html>")

    index = report_dir / "index.html"
    index.write_text("\n".join(parts), encoding="utf-8")
    return index
