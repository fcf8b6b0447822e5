"""Graph statistics: tab-delimited summary rows plus optional figures.

The figure path uses the Agg backend only, so it works headless; PNGs land
next to whatever delimited output the caller requested.
"""

from __future__ import annotations

from collections import Counter
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .graph import Category, KnowledgeGraph, Status


def stats_rows(graph: KnowledgeGraph) -> list[tuple[str, str, int]]:
    """(section, key, value) rows describing the graph, stable order."""
    rows: list[tuple[str, str, int]] = [
        ("graph", "version", graph.version),
        ("graph", "entities", len(graph.entities)),
        ("graph", "relations", len(graph.relations)),
    ]
    by_category = Counter(e.category.value for e in graph.entities.values())
    for name in sorted(by_category):
        rows.append(("entities-by-category", name, by_category[name]))
    by_specialty = Counter(e.specialty.value for e in graph.entities.values())
    for name in sorted(by_specialty):
        rows.append(("entities-by-specialty", name, by_specialty[name]))
    by_predicate = Counter(r.predicate for r in graph.relations.values())
    for name in sorted(by_predicate):
        rows.append(("relations-by-predicate", name, by_predicate[name]))
    by_status = Counter(r.status.value for r in graph.relations.values())
    for name in sorted(by_status):
        rows.append(("relations-by-status", name, by_status[name]))
    return rows


def render_stats_tsv(graph: KnowledgeGraph) -> str:
    lines = ["section\tkey\tvalue"]
    lines += [f"{s}\t{k}\t{v}" for s, k, v in stats_rows(graph)]
    return "\n".join(lines) + "\n"


def _bar(ax, counter: Counter, title: str, color: str) -> None:
    names = sorted(counter)
    ax.bar(names, [counter[n] for n in names], color=color)
    ax.set_title(title)
    ax.tick_params(axis="x", rotation=45)
    for label in ax.get_xticklabels():
        label.set_horizontalalignment("right")


def render_figures(graph: KnowledgeGraph, out_dir: str | Path) -> list[Path]:
    """Write summary figures to out_dir and return the file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    by_category = Counter(e.category.value for e in graph.entities.values())
    by_status = Counter(r.status.value for r in graph.relations.values())
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    _bar(axes[0], by_category, "entities by category", "#4878a8")
    _bar(axes[1], by_status, "relations by status", "#a85448")
    fig.tight_layout()
    path = out / "graph_overview.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    symptom_counts = Counter()
    for ent in graph.entities.values():
        if ent.category is Category.DISEASE:
            live = [
                r
                for r in graph.relations.values()
                if r.subject == ent.id
                and r.predicate == "has-symptom"
                and r.status is not Status.REJECTED
            ]
            symptom_counts[len(live)] += 1
    fig, ax = plt.subplots(figsize=(6, 4))
    sizes = sorted(symptom_counts)
    ax.bar(sizes, [symptom_counts[s] for s in sizes], color="#508a58")
    ax.set_xlabel("symptoms per disease")
    ax.set_ylabel("diseases")
    ax.set_title("symptom coverage")
    fig.tight_layout()
    path = out / "symptom_coverage.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written
