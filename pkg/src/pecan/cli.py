"""Command-line surface.

Configuration layering, most specific wins: built-in defaults, then the
TOML config file, then PECAN_ENDPOINT / PECAN_AUTH_TOKEN environment
variables, then explicit flags. The effective configuration is printed to
stderr (auth token redacted) so every run is replayable.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from importlib import resources

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import click

from . import graph as graph_io
from .builder import BuildError, build_graph
from .evaluation import (
    GraphStore,
    load_dataset,
    run_benchmark,
    run_sweep,
    write_histogram_csv,
    write_sweep_csv,
)
from .graph import BuildConfig, GraphError
from .ingest import EmptyDocument, load_jsonl_corpus, load_text_document
from .providers import EndpointConfig, HttpProvider, MockProvider, ProviderError
from .search import SearchConfig, run_search
from .tokenizers import WHITESPACE_PUNCT_ID

logger = logging.getLogger(__name__)

_REDACTED = "***"


def _load_presets() -> dict:
    ref = resources.files("pecan") / "data" / "presets.toml"
    return tomllib.loads(ref.read_text(encoding="utf-8"))


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise click.ClickException(f"cannot read config file: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise click.ClickException(f"bad config file {path}: {exc}") from exc


def _parse_script(text: str) -> list[tuple[float, float]]:
    """Turn "no,no,yes" or "0.6:0.2,0.1:0.7" into raw probability pairs."""
    script: list[tuple[float, float]] = []
    for i, raw in enumerate(text.split(",")):
        token = raw.strip().lower()
        if token == "yes":
            script.append((1.0, 0.0))
        elif token == "no":
            script.append((0.0, 1.0))
        elif ":" in token:
            a, _, b = token.partition(":")
            try:
                script.append((float(a), float(b)))
            except ValueError:
                raise click.UsageError(f"bad script entry {raw!r} at position {i}")
        else:
            raise click.UsageError(
                f"bad script entry {raw!r} at position {i}; use yes, no, or p_yes:p_no"
            )
    return script


def _provider_settings(cfg_file: dict, provider, endpoint, seed, script) -> dict:
    section = cfg_file.get("provider", {})
    kind = provider or section.get("kind") or "mock"
    if kind not in ("mock", "http"):
        raise click.UsageError(f"unknown provider kind {kind!r}; use mock or http")
    endpoint = endpoint or os.environ.get("PECAN_ENDPOINT") or section.get("endpoint")
    auth_token = os.environ.get("PECAN_AUTH_TOKEN") or section.get("auth_token")
    if seed is None:
        seed = section.get("seed", 0)
    settings = {
        "kind": kind,
        "endpoint": endpoint,
        "auth_token": auth_token,
        "seed": int(seed),
        "script": script,
    }
    if kind == "http" and not endpoint:
        raise click.UsageError("http provider requires --endpoint, PECAN_ENDPOINT, or config")
    if kind == "http" and script:
        raise click.UsageError("--script only applies to the mock provider")
    return settings


def _make_provider(settings: dict):
    if settings["kind"] == "http":
        return HttpProvider(
            EndpointConfig(base_url=settings["endpoint"], auth_token=settings["auth_token"])
        )
    script = _parse_script(settings["script"]) if settings["script"] else None
    return MockProvider(decision_script=script, seed=settings["seed"])


def _build_config(cfg_file: dict, chunk_size, batch_threshold, min_levels, tokenizer_id) -> BuildConfig:
    section = cfg_file.get("build", {})
    try:
        return BuildConfig(
            chunk_size_tokens=chunk_size if chunk_size is not None else section.get("chunk_size_tokens", 300),
            batch_threshold_s=batch_threshold if batch_threshold is not None else section.get("batch_threshold_s", 8000),
            min_levels=min_levels if min_levels is not None else section.get("min_levels", 2),
            tokenizer_id=tokenizer_id or section.get("tokenizer_id", WHITESPACE_PUNCT_ID),
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _search_config(cfg_file: dict, preset, **flags) -> SearchConfig:
    section = cfg_file.get("search", {})

    t_p = flags.get("t_p")
    if t_p is None and preset is not None:
        presets = _load_presets()["t_p"]
        if preset not in presets:
            raise click.UsageError(
                f"unknown preset {preset!r}; known: {', '.join(sorted(presets))}"
            )
        t_p = presets[preset]
    if t_p is None:
        t_p = section.get("t_p", 0.5)

    def pick(name, default):
        value = flags.get(name)
        return value if value is not None else section.get(name, default)

    max_retrievals = pick("max_retrievals", None)
    try:
        return SearchConfig(
            t_p=float(t_p),
            t_n=int(pick("t_n", 1)),
            max_retrievals=int(max_retrievals) if max_retrievals is not None else None,
            fixed_budget=int(pick("fixed_budget", 10)),
            attention_retrieval=bool(pick("attention_retrieval", True)),
            embedding_similarity=bool(pick("embedding_similarity", True)),
            dynamic_control=bool(pick("dynamic_control", True)),
            params=float(pick("params", 8.03e9)),
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _echo_effective(command: str, **sections) -> None:
    blob = {"command": command}
    for name, value in sections.items():
        if value is None:
            continue
        if hasattr(value, "to_dict"):
            value = value.to_dict()
        blob[name] = value
    if isinstance(blob.get("provider"), dict) and blob["provider"].get("auth_token"):
        blob["provider"] = {**blob["provider"], "auth_token": _REDACTED}
    click.echo(f"effective config: {json.dumps(blob, sort_keys=True)}", err=True)


# -- shared option groups ---------------------------------------------------

def provider_options(fn):
    fn = click.option("--provider", type=click.Choice(["mock", "http"]), default=None,
                      help="Provider kind (default mock).")(fn)
    fn = click.option("--endpoint", default=None, help="HTTP provider base URL.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Mock provider decision seed.")(fn)
    fn = click.option("--script", default=None,
                      help="Mock decision script, e.g. no,no,yes or 0.6:0.2,0.1:0.7.")(fn)
    return fn


def build_options(fn):
    fn = click.option("--chunk-size", type=int, default=None, help="Chunk size in tokens.")(fn)
    fn = click.option("--batch-threshold", type=int, default=None,
                      help="Batch token threshold s.")(fn)
    fn = click.option("--min-levels", type=int, default=None, help="Minimum level count.")(fn)
    fn = click.option("--tokenizer-id", default=None, help="Tokenizer registry id.")(fn)
    fn = click.option("--tree", is_flag=True, default=False,
                      help="Many-to-one summaries (tree ablation) instead of bullet points.")(fn)
    return fn


def search_options(fn):
    fn = click.option("--t-n", "t_n", type=int, default=None, help="Stop patience.")(fn)
    fn = click.option("--t-p", "t_p", type=float, default=None, help="Confidence threshold.")(fn)
    fn = click.option("--preset", default=None,
                      help="Named t_p preset (narrativeqa, qasper, hotpotqa, musique).")(fn)
    fn = click.option("--max-retrievals", type=int, default=None, help="Retrieval safety cap.")(fn)
    fn = click.option("--fixed-budget", type=int, default=None,
                      help="Retrieval count when dynamic control is off.")(fn)
    fn = click.option("--attention/--no-attention", "attention_retrieval", default=None,
                      help="Use attention-propagated scores.")(fn)
    fn = click.option("--embedding/--no-embedding", "embedding_similarity", default=None,
                      help="Add embedding similarity to scores.")(fn)
    fn = click.option("--dynamic/--no-dynamic", "dynamic_control", default=None,
                      help="Adaptive stop rule vs fixed budget.")(fn)
    fn = click.option("--params", type=float, default=None,
                      help="Model parameter count for the TFLOPs estimate.")(fn)
    return fn


@click.group()
@click.option("--config", "config_path", default=None, help="TOML config file.")
@click.option("--verbose", is_flag=True, default=False, help="Debug logging.")
@click.pass_context
def cli(ctx, config_path, verbose):
    """Build weighted summary graphs over long documents and search them."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    ctx.obj = _load_config_file(config_path)


@cli.command()
@click.option("--input", "input_path", default=None, help="Plain-text document.")
@click.option("--corpus", "corpus_path", default=None, help="JSONL corpus file.")
@click.option("--doc-id", default=None, help="Document id inside --corpus.")
@click.option("--out", "out_path", required=True, help="Output graph file.")
@click.option("--trace", "trace_path", default=None, help="Optional build trace JSON.")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Concurrent summarize calls per level.")
@provider_options
@build_options
@click.pass_context
def build(ctx, input_path, corpus_path, doc_id, out_path, trace_path, workers,
          provider, endpoint, seed, script,
          chunk_size, batch_threshold, min_levels, tokenizer_id, tree):
    """Build a graph from one document and write it to a file."""
    if (input_path is None) == (corpus_path is None):
        raise click.UsageError("provide exactly one of --input or --corpus with --doc-id")
    settings = _provider_settings(ctx.obj, provider, endpoint, seed, script)
    cfg = _build_config(ctx.obj, chunk_size, batch_threshold, min_levels, tokenizer_id)
    _echo_effective("build", provider=settings, build=cfg.to_dict(),
                    paths={"input": input_path or corpus_path, "out": out_path})

    if input_path is not None:
        doc = load_text_document(input_path)
    else:
        if doc_id is None:
            raise click.UsageError("--corpus requires --doc-id")
        corpus = load_jsonl_corpus(corpus_path)
        if doc_id not in corpus:
            raise click.ClickException(f"doc id {doc_id!r} not found in {corpus_path}")
        doc = corpus[doc_id]

    graph, trace = build_graph(
        doc, _make_provider(settings), cfg, ip_graph=not tree, max_workers=workers
    )
    graph_io.save(graph, out_path)
    if trace_path:
        trace.save(trace_path)
    click.echo(f"wrote {graph.num_nodes} nodes / {len(graph.edges)} edges"
               f" across {len(graph.levels)} levels to {out_path}")


def _run_query(command, ctx, graph_path, query, provider, endpoint, seed, script, preset, **flags):
    settings = _provider_settings(ctx.obj, provider, endpoint, seed, script)
    cfg = _search_config(ctx.obj, preset, **flags)
    _echo_effective(command, provider=settings, search=cfg, paths={"graph": graph_path})
    graph = graph_io.load(graph_path)
    return run_search(graph, query, _make_provider(settings), cfg)


@cli.command()
@click.option("--graph", "graph_path", required=True, help="Graph file to search.")
@click.option("--query", required=True, help="Question to answer.")
@provider_options
@search_options
@click.pass_context
def search(ctx, graph_path, query, provider, endpoint, seed, script, preset, **flags):
    """Search a graph and print the full result JSON."""
    result = _run_query("search", ctx, graph_path, query, provider, endpoint, seed, script,
                        preset, **flags)
    click.echo(result.to_json())


@cli.command()
@click.option("--graph", "graph_path", required=True, help="Graph file to search.")
@click.option("--query", required=True, help="Question to answer.")
@provider_options
@search_options
@click.pass_context
def answer(ctx, graph_path, query, provider, endpoint, seed, script, preset, **flags):
    """Search a graph and print only the answer text."""
    result = _run_query("answer", ctx, graph_path, query, provider, endpoint, seed, script,
                        preset, **flags)
    click.echo(result.answer)


@cli.command(name="eval")
@click.option("--dataset", "dataset_path", required=True, help="JSONL eval examples.")
@click.option("--corpus", "corpus_path", default=None, help="JSONL corpus for on-demand builds.")
@click.option("--graphs-dir", default=None, help="Directory of prebuilt per-doc graphs.")
@click.option("--out-report", default=None, help="Report JSON path.")
@click.option("--out-histogram", default=None, help="Retrieval histogram CSV path.")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Concurrent searches.")
@provider_options
@build_options
@search_options
@click.pass_context
def eval_cmd(ctx, dataset_path, corpus_path, graphs_dir, out_report, out_histogram, workers,
             provider, endpoint, seed, script,
             chunk_size, batch_threshold, min_levels, tokenizer_id, tree,
             preset, **flags):
    """Score a dataset and write a report."""
    settings = _provider_settings(ctx.obj, provider, endpoint, seed, script)
    build_cfg = _build_config(ctx.obj, chunk_size, batch_threshold, min_levels, tokenizer_id)
    search_cfg = _search_config(ctx.obj, preset, **flags)
    _echo_effective("eval", provider=settings, build=build_cfg.to_dict(), search=search_cfg,
                    paths={"dataset": dataset_path, "corpus": corpus_path,
                           "graphs_dir": graphs_dir})

    dataset = load_dataset(dataset_path)
    corpus = load_jsonl_corpus(corpus_path) if corpus_path else {}
    prov = _make_provider(settings)
    store = GraphStore(corpus, prov, build_cfg, graphs_dir=graphs_dir, ip_graph=not tree)
    report = run_benchmark(dataset, store, prov, search_cfg, workers=workers)

    if out_report:
        report.save(out_report)
    if out_histogram:
        write_histogram_csv(report, out_histogram)
    click.echo(json.dumps({"aggregates": report.aggregates,
                           "scored": len(report.rows),
                           "skipped": len(report.skipped)}, sort_keys=True))


@cli.command()
@click.option("--dataset", "dataset_path", required=True, help="JSONL eval examples.")
@click.option("--corpus", "corpus_path", default=None, help="JSONL corpus for on-demand builds.")
@click.option("--graphs-dir", default=None, help="Directory of prebuilt per-doc graphs.")
@click.option("--param", type=click.Choice(["t_n", "t_p"]), required=True,
              help="Parameter to sweep.")
@click.option("--values", required=True, help="Comma-separated sweep values.")
@click.option("--out-csv", default=None, help="Sweep table CSV path.")
@click.option("--workers", type=int, default=1, show_default=True)
@provider_options
@build_options
@search_options
@click.pass_context
def sweep(ctx, dataset_path, corpus_path, graphs_dir, param, values, out_csv, workers,
          provider, endpoint, seed, script,
          chunk_size, batch_threshold, min_levels, tokenizer_id, tree,
          preset, **flags):
    """Run the benchmark across a range of t_n or t_p values."""
    settings = _provider_settings(ctx.obj, provider, endpoint, seed, script)
    build_cfg = _build_config(ctx.obj, chunk_size, batch_threshold, min_levels, tokenizer_id)
    base_cfg = _search_config(ctx.obj, preset, **flags)
    _echo_effective("sweep", provider=settings, build=build_cfg.to_dict(), search=base_cfg,
                    paths={"dataset": dataset_path, "corpus": corpus_path})

    try:
        parsed_values = [int(v) if param == "t_n" else float(v) for v in values.split(",")]
    except ValueError:
        raise click.UsageError(f"bad --values {values!r}; expected comma-separated numbers")

    dataset = load_dataset(dataset_path)
    corpus = load_jsonl_corpus(corpus_path) if corpus_path else {}
    build_provider = _make_provider(settings)
    store = GraphStore(corpus, build_provider, build_cfg, graphs_dir=graphs_dir, ip_graph=not tree)
    rows = run_sweep(dataset, store, lambda: _make_provider(settings), base_cfg,
                     param, parsed_values, workers=workers)
    if out_csv:
        write_sweep_csv(rows, out_csv)
    click.echo(json.dumps([row.to_dict() for row in rows], sort_keys=True))


@cli.group()
def graph():
    """Inspect stored graph files."""


@graph.command()
@click.argument("path")
def stats(path):
    """Print level sizes, edge-weight distribution, and build flags."""
    g = graph_io.load(path)
    weights = [e.weight for e in g.edges]
    info = {
        "nodes": g.num_nodes,
        "edges": len(g.edges),
        "levels": {str(level): len(ids) for level, ids in sorted(g.levels.items())},
        "edge_weights": {
            "min": min(weights) if weights else None,
            "max": max(weights) if weights else None,
            "mean": sum(weights) / len(weights) if weights else None,
        },
        "flags": g.meta.get("flags", []),
        "config_hash": g.meta.get("config_hash"),
        "provider_id": g.meta.get("provider_id"),
    }
    click.echo(json.dumps(info, sort_keys=True, indent=2))


@graph.command()
@click.argument("path")
def validate(path):
    """Check a stored graph against every structural invariant."""
    g = graph_io.load(path)
    report = graph_io.validate(g)
    if report.valid:
        click.echo("valid")
    else:
        for v in report.violations:
            click.echo(f"{v.code}: {v.message}", err=True)
        raise click.ClickException(f"{len(report.violations)} violation(s)")


def main(argv=None) -> int:
    """Entry point mapping errors onto stable exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 2
    except (ProviderError, GraphError, BuildError, EmptyDocument, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
