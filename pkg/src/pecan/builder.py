"""Level-by-level graph construction.

Each level is built by batching the previous level's nodes, asking the
provider to summarize every batch into bullet-point summary units, parsing
the bullets back into token spans, and aggregating the returned attention
into row-normalized edges. Levels stack until the newest one both fits a
single batch and satisfies the minimum level count; that level seeds the
search.

Construction is deterministic for a deterministic provider: node ids are
assigned level-major in batch order regardless of how many workers issue
the provider calls.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .attention import IPSpan, aggregate_edges
from .graph import (
    FORMAT_VERSION,
    NODE_SOURCE_GENERATED,
    BuildConfig,
    Edge,
    HWDAG,
    IPNode,
    validate,
)
from .ingest import Document, batch_nodes, chunk_document
from .providers import BatchItem, ProviderError, SummarizeRequest, SummarizeResponse
from .providers import templates
from .tokenizers import get_tokenizer

# Hard stop against providers whose summaries never shrink; normal builds
# terminate levels earlier via the token-count rule.
MAX_LEVELS = 64


class BuildError(Exception):
    """Build aborted; carries the partial trace for post-mortem."""

    def __init__(self, message: str, trace: "BuildTrace | None" = None):
        super().__init__(message)
        self.trace = trace


@dataclass
class ParsedIPs:
    spans: list[IPSpan]
    texts: list[str]
    unstructured: bool = False


@dataclass
class BatchRecord:
    call_id: int
    level: int  # level being produced
    batch_index: int
    source_node_ids: list[int]
    generated_text: str
    produced_node_ids: list[int]
    unstructured: bool
    degenerate_rows: list[int]
    empty_generation: bool
    dropped_empty_ips: int
    tokens_prompt: int
    tokens_generated: int


@dataclass
class BuildTrace:
    doc_id: str
    config: dict
    provider_id: str
    records: list[BatchRecord] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2, ensure_ascii=False)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")


def parse_ips(generated_tokens: list[str]) -> ParsedIPs:
    """Split generated tokens into bullet-point spans.

    A span starts at a token whose first non-whitespace character is ``*``
    at the start of a line, and runs to the next bullet or the end. The
    bullet marker stays inside the span (its attention row belongs to the
    point) but is stripped from the text. Text before the first bullet is
    preamble: no span covers it. Output without any bullet collapses to a
    single span over everything, flagged unstructured.
    """
    if not generated_tokens:
        raise ValueError("parse_ips requires a non-empty token list")

    full = "".join(generated_tokens)
    starts: list[int] = []
    offset = 0
    offsets = []
    for tok in generated_tokens:
        offsets.append(offset)
        offset += len(tok)

    for i, tok in enumerate(generated_tokens):
        stripped = tok.lstrip()
        if not stripped.startswith("*"):
            continue
        abs_pos = offsets[i] + (len(tok) - len(stripped))
        line_start = full.rfind("\n", 0, abs_pos) + 1
        if full[line_start:abs_pos].strip() == "":
            starts.append(i)

    if not starts:
        text = full.strip()
        return ParsedIPs(
            spans=[IPSpan(ip_index=0, start=0, end=len(generated_tokens))],
            texts=[text],
            unstructured=True,
        )

    spans: list[IPSpan] = []
    texts: list[str] = []
    bounds = starts + [len(generated_tokens)]
    for m in range(len(starts)):
        a, b = bounds[m], bounds[m + 1]
        spans.append(IPSpan(ip_index=m, start=a, end=b))
        raw = full[offsets[a] : offsets[b] if b < len(generated_tokens) else len(full)]
        text = raw.lstrip()
        if text.startswith("*"):
            text = text[1:]
        texts.append(text.strip())
    return ParsedIPs(spans=spans, texts=texts, unstructured=False)


def _summarize_batch(provider, batch: list[IPNode], template_id: str) -> SummarizeResponse:
    req = SummarizeRequest(
        batch=[BatchItem(node_id=n.id, text=n.text) for n in batch],
        template_id=template_id,
    )
    return provider.summarize(req)


def build_level(
    nodes: list[IPNode],
    provider,
    cfg: BuildConfig,
    *,
    level: int,
    id_start: int,
    trace: BuildTrace | None = None,
    ip_graph: bool = True,
    max_workers: int = 1,
) -> tuple[list[IPNode], list[Edge]]:
    """Summarize one level into the next, returning new nodes and edges.

    ``level`` is the level being produced (sources are at ``level - 1``).
    With ``ip_graph=False`` each batch yields a single many-to-one summary
    node instead of per-bullet nodes (the tree-shaped ablation).
    """
    tokenizer = get_tokenizer(cfg.tokenizer_id)
    batches = batch_nodes(nodes, cfg.batch_threshold_s)

    # Responses are consumed in batch order either way so ids and the trace
    # are worker-count independent; streaming them keeps the trace partial
    # rather than empty when a later call in the level fails.
    if max_workers > 1:
        pool = ThreadPoolExecutor(max_workers=max_workers)
        futures = [
            pool.submit(_summarize_batch, provider, batch, templates.SUMMARIZE_V1)
            for batch in batches
        ]

        def _responses():
            try:
                for future in futures:
                    yield future.result()
            finally:
                pool.shutdown(wait=False, cancel_futures=True)

        response_iter = _responses()
    else:
        response_iter = (
            _summarize_batch(provider, batch, templates.SUMMARIZE_V1) for batch in batches
        )

    new_nodes: list[IPNode] = []
    new_edges: list[Edge] = []
    next_id = id_start
    call_id_base = len(trace.records) if trace is not None else 0

    for batch_index, (batch, resp) in enumerate(zip(batches, response_iter)):
        record = BatchRecord(
            call_id=call_id_base + batch_index,
            level=level,
            batch_index=batch_index,
            source_node_ids=[n.id for n in batch],
            generated_text=resp.generated_text,
            produced_node_ids=[],
            unstructured=False,
            degenerate_rows=[],
            empty_generation=False,
            dropped_empty_ips=0,
            tokens_prompt=resp.tokens_prompt,
            tokens_generated=len(resp.generated_tokens),
        )

        if not resp.generated_tokens or not resp.generated_text.strip():
            record.empty_generation = True
            if trace is not None:
                trace.records.append(record)
                trace.flags.append(f"empty generation for batch {batch_index} at level {level}")
            continue

        if ip_graph:
            parsed = parse_ips(resp.generated_tokens)
        else:
            parsed = ParsedIPs(
                spans=[IPSpan(ip_index=0, start=0, end=len(resp.generated_tokens))],
                texts=[resp.generated_text.strip()],
                unstructured=False,
            )
        record.unstructured = parsed.unstructured

        # Drop points whose cleaned text has no tokens; keep span/text rows aligned.
        kept: list[tuple[IPSpan, str, int]] = []
        for span, text in zip(parsed.spans, parsed.texts):
            count = tokenizer.count(text)
            if count >= 1:
                kept.append((span, text, count))
            else:
                record.dropped_empty_ips += 1
        if not kept:
            record.empty_generation = True
            if trace is not None:
                trace.records.append(record)
                trace.flags.append(f"no usable summary points in batch {batch_index} at level {level}")
            continue

        attn = np.asarray(resp.token_node_attention, dtype=np.float64)
        aggregated = aggregate_edges(attn, [span for span, _, _ in kept])
        record.degenerate_rows = aggregated.degenerate_rows

        for row_index, (_, text, count) in enumerate(kept):
            node = IPNode(
                id=next_id,
                level=level,
                text=text,
                token_count=count,
                source=NODE_SOURCE_GENERATED,
            )
            new_nodes.append(node)
            record.produced_node_ids.append(node.id)
            for col, src_node in enumerate(batch):
                weight = float(aggregated.weights[row_index, col])
                if weight > 0.0:
                    new_edges.append(Edge(src=node.id, dst=src_node.id, weight=weight))
            next_id += 1

        if trace is not None:
            trace.records.append(record)
            if aggregated.degenerate_rows:
                trace.flags.append(
                    f"degenerate attention rows {aggregated.degenerate_rows}"
                    f" in batch {batch_index} at level {level}"
                )

    return new_nodes, new_edges


def build_graph(
    doc: Document,
    provider,
    cfg: BuildConfig,
    *,
    ip_graph: bool = True,
    max_workers: int = 1,
) -> tuple[HWDAG, BuildTrace]:
    """Construct the full hierarchy for one document.

    Levels are added until the newest level's total token count fits the
    batch threshold and at least ``min_levels`` levels exist; that level is
    the top. The returned graph always passes validation.
    """
    provider_id = provider.info().provider_id if hasattr(provider, "info") else repr(provider)
    trace = BuildTrace(doc_id=doc.doc_id, config=cfg.to_dict(), provider_id=provider_id)

    chunks = chunk_document(doc, cfg)
    nodes: list[IPNode] = list(chunks)
    edges: list[Edge] = []
    current = chunks
    level = 1

    try:
        while not (
            level >= cfg.min_levels
            and sum(n.token_count for n in current) <= cfg.batch_threshold_s
        ):
            if level >= MAX_LEVELS:
                raise BuildError(f"exceeded {MAX_LEVELS} levels without terminating", trace)
            produced, produced_edges = build_level(
                current,
                provider,
                cfg,
                level=level + 1,
                id_start=len(nodes),
                trace=trace,
                ip_graph=ip_graph,
                max_workers=max_workers,
            )
            if not produced:
                trace.flags.append(f"construction stalled: level {level + 1} produced no nodes")
                break
            nodes.extend(produced)
            edges.extend(produced_edges)
            current = produced
            level += 1
    except ProviderError as exc:
        raise BuildError(f"provider failure during build: {exc}", trace) from exc

    meta = {
        "format_version": FORMAT_VERSION,
        "doc_id": doc.doc_id,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "provider_id": provider_id,
        "tokenizer_id": cfg.tokenizer_id,
        "ip_graph": ip_graph,
        "levels": level,
        "flags": list(trace.flags),
    }
    graph = HWDAG(nodes, edges, meta=meta)
    report = validate(graph)
    if not report.valid:
        raise BuildError(
            f"constructed graph failed validation: {report.violations[0].message}", trace
        )
    return graph, trace
