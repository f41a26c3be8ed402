"""Hierarchical weighted DAG data model, validation, and persistence.

Nodes live on integer levels starting at 1 (level-1 nodes are document
chunks, higher levels are generated summary points). Every edge points from
a node at level l+1 to a node at level l and carries a weight in [0, 1];
for any node with outgoing edges the weights sum to 1. Graphs are immutable
once built and safe to share across concurrent searches.

The on-disk format is a versioned JSON document with a content checksum.
Weights are serialized as 17-significant-digit decimal strings so that a
load/save round trip is bit-exact on any platform.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

FORMAT_VERSION = 1
WEIGHT_SUM_TOL = 1e-6

NODE_SOURCE_CHUNK = "chunk"
NODE_SOURCE_GENERATED = "generated"


class GraphError(Exception):
    """Base class for graph persistence and integrity errors."""


class UnknownFormatVersion(GraphError):
    pass


class ChecksumMismatch(GraphError):
    pass


class GraphSchemaError(GraphError):
    pass


class InvalidGraph(GraphError):
    """Raised when saving a graph that fails validation."""


@dataclass(frozen=True)
class IPNode:
    """One information point (or level-1 chunk).

    ``token_count`` is the bundled tokenizer's count of ``text`` and is
    fixed at construction time.
    """

    id: int
    level: int
    text: str
    token_count: int
    source: str  # NODE_SOURCE_CHUNK or NODE_SOURCE_GENERATED


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    weight: float


@dataclass
class BuildConfig:
    chunk_size_tokens: int = 300
    batch_threshold_s: int = 8000
    min_levels: int = 2
    tokenizer_id: str = "whitespace_punct_v1"

    def __post_init__(self) -> None:
        if self.chunk_size_tokens < 1:
            raise ValueError("chunk_size_tokens must be >= 1")
        if self.batch_threshold_s < self.chunk_size_tokens:
            raise ValueError("batch_threshold_s must be >= chunk_size_tokens")
        if self.min_levels < 1:
            raise ValueError("min_levels must be >= 1")

    def to_dict(self) -> dict:
        return {
            "chunk_size_tokens": self.chunk_size_tokens,
            "batch_threshold_s": self.batch_threshold_s,
            "min_levels": self.min_levels,
            "tokenizer_id": self.tokenizer_id,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    node_id: int | None = None
    edge: tuple[int, int] | None = None


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


class HWDAG:
    """Immutable hierarchical weighted DAG.

    Node ids are dense 0..N-1, assigned level-major in construction order,
    so arrays indexed by node id are the natural representation for the
    scoring kernels.
    """

    def __init__(self, nodes: Iterable[IPNode], edges: Iterable[Edge], meta: dict | None = None):
        node_list = list(nodes)
        self.nodes: dict[int, IPNode] = {n.id: n for n in node_list}
        if len(self.nodes) != len(node_list):
            raise GraphSchemaError("duplicate node ids")
        self.edges: list[Edge] = list(edges)
        self.meta: dict = dict(meta or {})
        self.levels: dict[int, list[int]] = {}
        for node in sorted(self.nodes.values(), key=lambda n: n.id):
            self.levels.setdefault(node.level, []).append(node.id)
        self._csr: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    # -- basic views ---------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def max_level(self) -> int:
        return max(self.levels) if self.levels else 0

    def top_level_ids(self) -> list[int]:
        return list(self.levels.get(self.max_level, []))

    def out_edges(self, node_id: int) -> list[Edge]:
        return [e for e in self.edges if e.src == node_id]

    def csr_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR layout of the edge set keyed by source node id.

        Returns (indptr, indices, weights): for src i its out-edges occupy
        weights[indptr[i]:indptr[i+1]] targeting indices[...]. Requires
        dense ids; cached after first call.
        """
        if self._csr is None:
            n = self.num_nodes
            if set(self.nodes) != set(range(n)):
                raise GraphError("csr_arrays requires dense 0..N-1 node ids")
            buckets: list[list[tuple[int, float]]] = [[] for _ in range(n)]
            for e in self.edges:
                buckets[e.src].append((e.dst, e.weight))
            indptr = np.zeros(n + 1, dtype=np.int64)
            for i, b in enumerate(buckets):
                indptr[i + 1] = indptr[i] + len(b)
            indices = np.zeros(int(indptr[-1]), dtype=np.int64)
            weights = np.zeros(int(indptr[-1]), dtype=np.float64)
            pos = 0
            for b in buckets:
                b.sort(key=lambda t: t[0])
                for dst, w in b:
                    indices[pos] = dst
                    weights[pos] = w
                    pos += 1
            self._csr = (indptr, indices, weights)
        return self._csr

    def adjacency_matrix(self) -> np.ndarray:
        """Dense |V|x|V| matrix E with E[i, j] = weight of edge i->j.

        Absent edges materialize as zeros. Intended for small graphs and
        tests; searches use the CSR view.
        """
        n = self.num_nodes
        mat = np.zeros((n, n), dtype=np.float64)
        for e in self.edges:
            mat[e.src, e.dst] = e.weight
        return mat

    def token_count_of_level(self, level: int) -> int:
        return sum(self.nodes[i].token_count for i in self.levels.get(level, []))


# -- validation ---------------------------------------------------------


def validate(graph: HWDAG) -> ValidationReport:
    """Check every structural invariant; never raises, only reports."""
    report = ValidationReport()
    add = report.violations.append

    for node in graph.nodes.values():
        if node.level < 1:
            add(Violation("bad-level", f"node {node.id} has level {node.level} < 1", node.id))
        if node.token_count < 1:
            add(Violation("bad-token-count", f"node {node.id} has token_count {node.token_count} < 1", node.id))
        if node.source not in (NODE_SOURCE_CHUNK, NODE_SOURCE_GENERATED):
            add(Violation("bad-source", f"node {node.id} has unknown source {node.source!r}", node.id))
        elif (node.level == 1) != (node.source == NODE_SOURCE_CHUNK):
            add(
                Violation(
                    "level-source-mismatch",
                    f"node {node.id}: level {node.level} with source {node.source!r}"
                    " (level 1 iff source=chunk)",
                    node.id,
                )
            )

    out_sums: dict[int, float] = {}
    for e in graph.edges:
        pair = (e.src, e.dst)
        if e.src not in graph.nodes or e.dst not in graph.nodes:
            add(Violation("dangling-edge", f"edge {pair} references a missing node", edge=pair))
            continue
        if not math.isfinite(e.weight):
            add(Violation("non-finite-weight", f"edge {pair} weight {e.weight} is not finite", edge=pair))
            continue
        if e.weight < 0:
            add(Violation("negative-weight", f"edge {pair} weight {e.weight} < 0", edge=pair))
        if e.weight > 1:
            add(Violation("weight-above-one", f"edge {pair} weight {e.weight} > 1", edge=pair))
        src_level = graph.nodes[e.src].level
        dst_level = graph.nodes[e.dst].level
        if src_level != dst_level + 1:
            add(
                Violation(
                    "non-adjacent-levels",
                    f"edge {pair} spans levels {src_level}->{dst_level}; must be l+1 -> l",
                    edge=pair,
                )
            )
        out_sums[e.src] = out_sums.get(e.src, 0.0) + e.weight

    for node_id, total in sorted(out_sums.items()):
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            add(
                Violation(
                    "normalization",
                    f"node {node_id} outgoing weights sum to {total!r},"
                    f" off by {abs(total - 1.0):.3g} > {WEIGHT_SUM_TOL}",
                    node_id,
                )
            )

    return report


# -- persistence --------------------------------------------------------


def _payload_dict(graph: HWDAG) -> dict:
    nodes = [
        {
            "id": n.id,
            "level": n.level,
            "text": n.text,
            "token_count": n.token_count,
            "source": n.source,
        }
        for n in sorted(graph.nodes.values(), key=lambda n: n.id)
    ]
    edges = [
        {"src": e.src, "dst": e.dst, "weight": format(e.weight, ".17g")}
        for e in sorted(graph.edges, key=lambda e: (e.src, e.dst))
    ]
    return {"version": FORMAT_VERSION, "meta": graph.meta, "nodes": nodes, "edges": edges}


def _checksum(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def dumps(graph: HWDAG) -> str:
    payload = _payload_dict(graph)
    doc = {"checksum": _checksum(payload), **payload}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def save(graph: HWDAG, path: str | os.PathLike) -> None:
    report = validate(graph)
    if not report.valid:
        raise InvalidGraph(
            f"refusing to save invalid graph: {len(report.violations)} violation(s),"
            f" first: {report.violations[0].message}"
        )
    data = dumps(graph)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(data)
        fh.write("\n")


def loads(data: str) -> HWDAG:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise GraphSchemaError(f"not a graph file: {exc}") from exc
    if not isinstance(doc, dict):
        raise GraphSchemaError("graph document must be a JSON object")

    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise UnknownFormatVersion(f"unknown format version {version!r} (expected {FORMAT_VERSION})")

    for key in ("checksum", "meta", "nodes", "edges"):
        if key not in doc:
            raise GraphSchemaError(f"missing required key {key!r}")

    payload = {"version": doc["version"], "meta": doc["meta"], "nodes": doc["nodes"], "edges": doc["edges"]}
    expected = _checksum(payload)
    if doc["checksum"] != expected:
        raise ChecksumMismatch(f"checksum mismatch: file says {doc['checksum']!r}, content hashes to {expected!r}")

    try:
        nodes = [
            IPNode(
                id=int(n["id"]),
                level=int(n["level"]),
                text=str(n["text"]),
                token_count=int(n["token_count"]),
                source=str(n["source"]),
            )
            for n in doc["nodes"]
        ]
        edges = [Edge(src=int(e["src"]), dst=int(e["dst"]), weight=float(e["weight"])) for e in doc["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphSchemaError(f"malformed node or edge record: {exc}") from exc

    ids = [n.id for n in nodes]
    if len(set(ids)) != len(ids):
        raise GraphSchemaError("duplicate node ids")

    return HWDAG(nodes, edges, meta=doc["meta"])


def load(path: str | os.PathLike) -> HWDAG:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())
