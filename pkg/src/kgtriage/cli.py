"""Command-line interface.

Batch counterparts of the HTTP gateway: corpus ingestion, one-shot and
scripted diagnosis, review verdicts, graph export, stats with optional
figures, and the service runner. Exit codes: 0 success, 2 usage error,
3 data error.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from .config import ServiceConfig, parse_config
from .errors import KgTriageError
from .graph import Provenance, Status
from .ingest import Document
from .reporting import render_figures, render_stats_tsv
from .service import ServiceState, canonical_json, create_app


def _load_config(config_path: str | None, data_dir: str | None) -> ServiceConfig:
    cfg = parse_config(config_path) if config_path else ServiceConfig()
    if data_dir:
        cfg.data_dir = Path(data_dir)
    return cfg


def _data_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except KgTriageError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)

    return wrapper


@click.group()
def main() -> None:
    """Knowledge-graph triage toolkit."""


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--lexicon", type=click.Path(exists=True, dir_okay=False), help="Lexicon TSV (defaults to the packaged seed).")
@click.option("--patterns", type=click.Path(exists=True, dir_okay=False), help="Relation pattern TSV (defaults to the packaged seed).")
@click.option("--data-dir", type=click.Path(file_okay=False), help="State directory (default kgtriage-data).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--augmenter", help="External augmenter endpoint URL.")
@_data_errors
def ingest(corpus_dir, lexicon, patterns, data_dir, config_path, augmenter) -> None:
    """Ingest every .txt document under CORPUS_DIR into the graph."""
    cfg = _load_config(config_path, data_dir)
    if lexicon:
        cfg.lexicon = Path(lexicon)
    if patterns:
        cfg.patterns = Path(patterns)
    if augmenter:
        cfg.augmenter_endpoint = augmenter
    state = ServiceState(cfg)
    docs = [
        Document(id=path.stem, text=path.read_text(encoding="utf-8"), source=str(path))
        for path in sorted(Path(corpus_dir).glob("*.txt"))
    ]
    if not docs:
        raise click.UsageError(f"no .txt documents under {corpus_dir}")
    report = state.ingest(docs)
    click.echo("metric\tvalue")
    for key in ("documents", "chunks", "mentions", "triples_extracted",
                "triples_pending", "augmenter_dropped"):
        click.echo(f"{key}\t{report[key]}")
    for err in report["errors"]:
        click.echo(f"document-error\t{err['doc_id']}: {err['error']}", err=True)


@main.command()
@click.option("--symptoms", help="Comma-separated symptom ids or labels.")
@click.option("--text", help="Free-text complaint, normalized via the lexicon.")
@click.option("--data-dir", type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@_data_errors
def diagnose(symptoms, text, data_dir, config_path) -> None:
    """One-shot diagnosis; prints the canonical outcome document."""
    if not symptoms and not text:
        raise click.UsageError("provide --symptoms and/or --text")
    state = ServiceState(_load_config(config_path, data_dir))
    tokens = [s.strip() for s in (symptoms or "").split(",") if s.strip()]
    doc = state.diagnose_once(tokens, text)
    sys.stdout.write(canonical_json(doc).decode("utf-8"))


@main.command(name="session")
@click.option("--text", required=True, help="Intake complaint.")
@click.option(
    "--answer",
    "answers",
    multiple=True,
    help="Scripted reply 'symptom-id=yes|no'; repeatable, consumed in order.",
)
@click.option("--data-dir", type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@_data_errors
def session_cmd(text, answers, data_dir, config_path) -> None:
    """Run a scripted dialog session and print the full session document."""
    from .sessions import Session, SessionState

    state = ServiceState(_load_config(config_path, data_dir))
    graph = state.require_graph()
    session = Session(
        "cli-session",
        text,
        graph,
        state.lexicon,
        state.engine_config,
        state.roster,
        max_questions=state.config.max_clarifying_questions,
        clock=lambda: 0.0,
    )
    script = list(answers)
    while session.state is SessionState.CLARIFYING and script:
        entry = script.pop(0)
        symptom, _, reply = entry.partition("=")
        if reply.lower() not in ("yes", "no"):
            raise click.UsageError(f"answer {entry!r} must end in =yes or =no")
        session.answer(symptom.strip(), reply.lower() == "yes")
    sys.stdout.write(canonical_json(session.to_doc()).decode("utf-8"))


@main.command(name="export-graph")
@click.option("--out", type=click.Path(dir_okay=False), help="Write to a file instead of stdout.")
@click.option("--data-dir", type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@_data_errors
def export_graph(out, data_dir, config_path) -> None:
    """Print (or write) the canonical graph export document."""
    state = ServiceState(_load_config(config_path, data_dir))
    payload = state.export_bytes()
    if out:
        Path(out).write_bytes(payload)
        click.echo(f"wrote {out}")
    else:
        sys.stdout.write(payload.decode("utf-8"))


@main.group()
def review() -> None:
    """Review queue workflow."""


@review.command(name="list")
@click.option("--data-dir", type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@_data_errors
def review_list(data_dir, config_path) -> None:
    """Pending review items, oldest first."""
    state = ServiceState(_load_config(config_path, data_dir))
    click.echo("item_id\trevision\tproposed_by\tsubject\tpredicate\tobject")
    for doc in state.review_queue_docs():
        triple = doc["triple"]
        click.echo(
            f"{doc['item_id']}\t{doc['revision']}\t{doc['proposed_by']}\t"
            f"{triple['subject']}\t{triple['predicate']}\t{triple['object']}"
        )


def _verdict_command(name: str, verdict: str):
    @review.command(name=name)
    @click.argument("item_id")
    @click.option("--reviewer", required=True)
    @click.option("--revision", type=int, default=0, show_default=True, help="Expected revision token.")
    @click.option("--note")
    @click.option("--data-dir", type=click.Path(file_okay=False))
    @click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
    @_data_errors
    def _cmd(item_id, reviewer, revision, note, data_dir, config_path) -> None:
        state = ServiceState(_load_config(config_path, data_dir))
        doc = state.review_verdict(item_id, verdict, reviewer, revision, note)
        click.echo(f"{doc['item_id']}\t{doc['state']}\t{doc['triple']['status']}")

    _cmd.__doc__ = f"{verdict.capitalize()} a pending item."
    return _cmd


_verdict_command("approve", "approve")
_verdict_command("reject", "reject")


@main.command()
@click.option("--out", type=click.Path(dir_okay=False), help="Write the TSV to a file instead of stdout.")
@click.option("--figures", type=click.Path(file_okay=False), help="Also render PNG figures into this directory.")
@click.option("--data-dir", type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@_data_errors
def stats(out, figures, data_dir, config_path) -> None:
    """Graph statistics as TSV, with optional figures alongside."""
    state = ServiceState(_load_config(config_path, data_dir))
    graph = state.require_graph()
    tsv = render_stats_tsv(graph)
    if out:
        Path(out).write_text(tsv, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        sys.stdout.write(tsv)
    if figures:
        for path in render_figures(graph, figures):
            click.echo(f"wrote {path}", err=bool(out is None))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--data-dir", type=click.Path(file_okay=False))
@click.option("--host", help="Override the configured listen host.")
@click.option("--port", type=int, help="Override the configured listen port.")
@_data_errors
def serve(config_path, data_dir, host, port) -> None:
    """Run the HTTP gateway."""
    import uvicorn

    cfg = _load_config(config_path, data_dir)
    state = ServiceState(cfg)
    app = create_app(state)
    uvicorn.run(app, host=host or cfg.host, port=port or cfg.port, log_level="info")


DEMO_PENDING = [
    ("obesity", "comorbid-with", "heart-failure"),
    ("wegovy", "reduces-risk-of", "cardiovascular-disease"),
    ("metformin", "treats", "obesity"),
    ("smoking", "causes", "stroke"),
    ("sedentary-lifestyle", "causes", "obesity"),
]


@main.command()
@click.option("--data-dir", type=click.Path(file_okay=False), required=True)
@click.option("--pending", type=int, default=5, show_default=True, help="Pending review items to fabricate.")
@_data_errors
def seed(data_dir, pending) -> None:
    """Build a demo state: packaged corpus ingested plus pending review items."""
    from .config import seed_path

    cfg = ServiceConfig(data_dir=Path(data_dir))
    state = ServiceState(cfg)
    corpus = sorted(seed_path("corpus").glob("*.txt"))
    docs = [Document(id=p.stem, text=p.read_text(encoding="utf-8"), source=str(p)) for p in corpus]
    report = state.ingest(docs)
    graph = state.require_graph()
    added = 0
    for subject, predicate, obj in DEMO_PENDING[: max(0, pending)]:
        if graph.resolve(subject) and graph.resolve(obj):
            rel_id = graph.add_relation(
                graph.resolve(subject), predicate, graph.resolve(obj),
                Provenance.AUGMENTER, Status.PENDING_REVIEW,
            )
            state.queue.enqueue([graph.relations[rel_id]])
            added += 1
    state.save_graph()
    click.echo(
        f"seeded {report['documents']} documents, "
        f"{report['triples_extracted']} extracted triples, {added} pending items"
    )


if __name__ == "__main__":
    main()
