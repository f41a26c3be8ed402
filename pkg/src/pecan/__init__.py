"""Hierarchical weighted-graph retrieval over long documents.

Build once: chunk a document, summarize level by level into short
information points, and keep the generation attention as weighted edges.
Search per query: seed with the top level, let the provider judge
answerability, and walk the strongest edges until it is confident.
"""

from .attention import aggregate_edges, position_normalize
from .builder import BuildError, BuildTrace, build_graph, build_level, parse_ips
from .evaluation import (
    EvalExample,
    EvalReport,
    GraphStore,
    load_dataset,
    run_benchmark,
    run_sweep,
)
from .graph import (
    BuildConfig,
    Edge,
    HWDAG,
    InvalidGraph,
    IPNode,
    load,
    loads,
    save,
    dumps,
    validate,
)
from .ingest import Document, batch_nodes, chunk_document, load_jsonl_corpus, load_text_document
from .metrics import flops_estimate, normalize_answer, rouge_l, token_f1
from .search import (
    DecisionRecord,
    SearchConfig,
    SearchResult,
    SearchSession,
    TokenLedger,
    retrieval_scores,
    run_search,
    select_next,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "aggregate_edges",
    "position_normalize",
    "BuildError",
    "BuildTrace",
    "build_graph",
    "build_level",
    "parse_ips",
    "EvalExample",
    "EvalReport",
    "GraphStore",
    "load_dataset",
    "run_benchmark",
    "run_sweep",
    "BuildConfig",
    "Edge",
    "HWDAG",
    "InvalidGraph",
    "IPNode",
    "load",
    "loads",
    "save",
    "dumps",
    "validate",
    "Document",
    "batch_nodes",
    "chunk_document",
    "load_jsonl_corpus",
    "load_text_document",
    "flops_estimate",
    "normalize_answer",
    "rouge_l",
    "token_f1",
    "DecisionRecord",
    "SearchConfig",
    "SearchResult",
    "SearchSession",
    "TokenLedger",
    "retrieval_scores",
    "run_search",
    "select_next",
]
