"""Benchmark harness: score answers over a JSONL dataset.

Datasets are LongBench-shaped: one example per line with a query, a doc_id
pointing into a sibling corpus file, and one or more reference answers.
Graphs are loaded from a directory when present and built on demand
otherwise; examples whose document is missing are skipped and reported,
never silently dropped.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from . import graph as graph_io
from .builder import build_graph
from .graph import BuildConfig, HWDAG
from .ingest import Document
from .metrics import rouge_l, token_f1
from .search import SearchConfig, run_search

logger = logging.getLogger(__name__)

FLOPS_FORMULA_NOTE = "2 * params * new_tokens / 1e12; quadratic attention term ignored"


@dataclass(frozen=True)
class EvalExample:
    id: str
    doc_id: str
    query: str
    answers: list[str]

    def __post_init__(self) -> None:
        if not self.answers:
            raise ValueError(f"example {self.id}: at least one reference answer required")


@dataclass
class ExampleRow:
    example_id: str
    doc_id: str
    f1: float
    rouge_l: float
    nodes_retrieved: int
    tokens_processed: int
    tflops: float
    answer: str

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EvalReport:
    rows: list[ExampleRow]
    skipped: list[dict]
    metadata: dict = field(default_factory=dict)

    @property
    def aggregates(self) -> dict:
        if not self.rows:
            return {
                "mean_f1": 0.0,
                "mean_rouge_l": 0.0,
                "mean_nodes_retrieved": 0.0,
                "mean_tokens_processed": 0.0,
                "mean_tflops": 0.0,
            }
        n = len(self.rows)
        return {
            "mean_f1": sum(r.f1 for r in self.rows) / n,
            "mean_rouge_l": sum(r.rouge_l for r in self.rows) / n,
            "mean_nodes_retrieved": sum(r.nodes_retrieved for r in self.rows) / n,
            "mean_tokens_processed": sum(r.tokens_processed for r in self.rows) / n,
            "mean_tflops": sum(r.tflops for r in self.rows) / n,
        }

    def histogram(self) -> list[tuple[int, int]]:
        counts = Counter(r.nodes_retrieved for r in self.rows)
        return sorted(counts.items())

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "aggregates": self.aggregates,
            "rows": [r.to_dict() for r in self.rows],
            "skipped": self.skipped,
            "histogram": [{"nodes_retrieved": k, "count": v} for k, v in self.histogram()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")


def load_dataset(path: str | os.PathLike) -> list[EvalExample]:
    examples: list[EvalExample] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                ex = EvalExample(
                    id=str(obj["id"]),
                    doc_id=str(obj["doc_id"]),
                    query=str(obj["query"]),
                    answers=[str(a) for a in obj["answers"]],
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad example record: {exc}") from exc
            if ex.id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate example id {ex.id!r}")
            seen.add(ex.id)
            examples.append(ex)
    return examples


class GraphStore:
    """Per-document graph cache backed by an optional directory.

    Lookup order: in-memory cache, then ``{graphs_dir}/{doc_id}.json``,
    then an on-demand build from the corpus (persisted back to the
    directory when one is configured).
    """

    def __init__(
        self,
        corpus: dict[str, Document],
        provider,
        build_cfg: BuildConfig,
        graphs_dir: str | os.PathLike | None = None,
        ip_graph: bool = True,
    ):
        self.corpus = corpus
        self.provider = provider
        self.build_cfg = build_cfg
        self.graphs_dir = Path(graphs_dir) if graphs_dir is not None else None
        self.ip_graph = ip_graph
        self._cache: dict[str, HWDAG] = {}

    def get(self, doc_id: str) -> HWDAG | None:
        if doc_id in self._cache:
            return self._cache[doc_id]
        if self.graphs_dir is not None:
            path = self.graphs_dir / f"{doc_id}.json"
            if path.exists():
                g = graph_io.load(path)
                self._cache[doc_id] = g
                return g
        doc = self.corpus.get(doc_id)
        if doc is None:
            return None
        g, _trace = build_graph(doc, self.provider, self.build_cfg, ip_graph=self.ip_graph)
        self._cache[doc_id] = g
        if self.graphs_dir is not None:
            self.graphs_dir.mkdir(parents=True, exist_ok=True)
            graph_io.save(g, self.graphs_dir / f"{doc_id}.json")
        return g


def run_benchmark(
    dataset: list[EvalExample],
    store: GraphStore,
    provider,
    search_cfg: SearchConfig,
    workers: int = 1,
) -> EvalReport:
    skipped: list[dict] = []
    runnable: list[tuple[EvalExample, HWDAG]] = []
    # Graph builds mutate the store cache, so resolve them serially; the
    # searches themselves are independent sessions.
    for ex in dataset:
        graph = store.get(ex.doc_id)
        if graph is None:
            logger.warning("skipping example %s: no document or graph for %r", ex.id, ex.doc_id)
            skipped.append({"example_id": ex.id, "doc_id": ex.doc_id, "reason": "missing document"})
        else:
            runnable.append((ex, graph))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda pair: run_search(pair[1], pair[0].query, provider, search_cfg), runnable)
            )
    else:
        results = [run_search(graph, ex.query, provider, search_cfg) for ex, graph in runnable]

    rows: list[ExampleRow] = []
    for (ex, _), result in zip(runnable, results):
        rows.append(
            ExampleRow(
                example_id=ex.id,
                doc_id=ex.doc_id,
                f1=token_f1(result.answer, ex.answers),
                rouge_l=rouge_l(result.answer, ex.answers),
                nodes_retrieved=result.retrievals,
                tokens_processed=result.tokens_processed,
                tflops=result.flops_estimate,
                answer=result.answer,
            )
        )
    metadata = {
        "examples": len(dataset),
        "scored": len(rows),
        "params": search_cfg.params,
        "flops_formula": FLOPS_FORMULA_NOTE,
        "stemming": False,
        "search_config": search_cfg.to_dict(),
        "build_config": store.build_cfg.to_dict(),
    }
    return EvalReport(rows=rows, skipped=skipped, metadata=metadata)


@dataclass
class SweepRow:
    param: str
    value: float
    mean_f1: float
    mean_rouge_l: float
    mean_nodes_retrieved: float
    mean_tflops: float

    def to_dict(self) -> dict:
        return asdict(self)


def run_sweep(
    dataset: list[EvalExample],
    store: GraphStore,
    provider_factory: Callable[[], object],
    base_cfg: SearchConfig,
    param: str,
    values: list,
    workers: int = 1,
) -> list[SweepRow]:
    """Re-run the benchmark once per parameter value.

    ``param`` is "t_n" or "t_p". A fresh provider per point keeps scripted
    decision oracles from leaking state across points; graphs are shared
    through the store.
    """
    if param not in ("t_n", "t_p"):
        raise ValueError("sweep parameter must be 't_n' or 't_p'")
    rows: list[SweepRow] = []
    for value in values:
        kwargs = base_cfg.to_dict()
        kwargs[param] = value
        cfg = SearchConfig(**kwargs)
        report = run_benchmark(dataset, store, provider_factory(), cfg, workers=workers)
        agg = report.aggregates
        rows.append(
            SweepRow(
                param=param,
                value=float(value),
                mean_f1=agg["mean_f1"],
                mean_rouge_l=agg["mean_rouge_l"],
                mean_nodes_retrieved=agg["mean_nodes_retrieved"],
                mean_tflops=agg["mean_tflops"],
            )
        )
    return rows


def write_histogram_csv(report: EvalReport, path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["nodes_retrieved", "count"])
        for value, count in report.histogram():
            writer.writerow([value, count])


def write_sweep_csv(rows: list[SweepRow], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["param", "value", "mean_f1", "mean_rouge_l", "mean_nodes_retrieved", "mean_tflops"]
        )
        for row in rows:
            writer.writerow(
                [
                    row.param,
                    row.value,
                    f"{row.mean_f1:.6f}",
                    f"{row.mean_rouge_l:.6f}",
                    f"{row.mean_nodes_retrieved:.6f}",
                    f"{row.mean_tflops:.6f}",
                ]
            )
