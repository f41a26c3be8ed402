"""Query-time graph search with adaptive retrieval budget.

The session seeds its context with every top-level node, then alternates
between asking the provider whether the question is answerable and
retrieving one more node. Retrieval scores combine relevance propagated
down the weighted edges with plain embedding similarity; the stop rule is
a confidence threshold (t_p) with patience (t_n cumulative confident
decisions).

Everything the provider reads stays in its context for the rest of the
session, so each call only pays for newly appended tokens. The ledger
records that accounting and feeds the FLOPs estimate.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .attention import position_normalize
from .graph import HWDAG
from .metrics import DEFAULT_PARAMS, flops_estimate
from .providers import BatchItem, DecideResponse, ProviderError

EXHAUSTED_FLAG = "budget/graph exhausted"


@dataclass
class SearchConfig:
    t_p: float
    t_n: int = 1
    max_retrievals: int | None = None  # None means the graph's node count
    fixed_budget: int = 10
    attention_retrieval: bool = True
    embedding_similarity: bool = True
    dynamic_control: bool = True
    ip_graph: bool = True
    params: float = DEFAULT_PARAMS
    seed_token_budget: int | None = None  # None means the graph's batch threshold

    def __post_init__(self) -> None:
        if not 0.0 < self.t_p < 1.0:
            raise ValueError("t_p must be in (0, 1)")
        if self.t_n < 1:
            raise ValueError("t_n must be >= 1")
        if self.max_retrievals is not None and self.max_retrievals < 0:
            raise ValueError("max_retrievals must be >= 0")
        if self.fixed_budget < 0:
            raise ValueError("fixed_budget must be >= 0")
        if not (self.attention_retrieval or self.embedding_similarity):
            raise ValueError("at least one of attention_retrieval, embedding_similarity required")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DecisionRecord:
    index: int
    p_yes_raw: float
    p_no_raw: float
    p_yes: float
    verdict: str  # "continue" or "stop"
    yes_count: int  # cumulative, after this decision

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TokenLedger:
    """New-token accounting across one session, by provider call kind."""

    session_prompt: int = 0  # first-turn scaffold + query
    appended: int = 0  # node texts appended into the cached context
    decide_scaffold: int = 0
    decide_generated: int = 0
    answer_prompt: int = 0
    answer_generated: int = 0

    @property
    def total_new_tokens(self) -> int:
        return (
            self.session_prompt
            + self.appended
            + self.decide_scaffold
            + self.decide_generated
            + self.answer_prompt
            + self.answer_generated
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total_new_tokens"] = self.total_new_tokens
        return d


@dataclass
class SearchResult:
    answer: str
    visited: list[int]
    decisions: list[DecisionRecord]
    tokens_processed: int
    flops_estimate: float
    retrievals: int
    seed_ids: list[int]
    stop_reason: str  # "confident", "budget", "exhausted", "fixed"
    flags: list[str]
    relevance: dict[int, float]
    ledger: TokenLedger

    def to_dict(self) -> dict:
        return {
            "answer": self.answer,
            "visited": list(self.visited),
            "decisions": [d.to_dict() for d in self.decisions],
            "tokens_processed": self.tokens_processed,
            "flops_estimate": self.flops_estimate,
            "retrievals": self.retrievals,
            "seed_ids": list(self.seed_ids),
            "stop_reason": self.stop_reason,
            "flags": list(self.flags),
            "relevance": {str(k): v for k, v in self.relevance.items()},
            "ledger": self.ledger.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)


def renormalize_decision(p_yes_raw: float | None, p_no_raw: float | None) -> float:
    """Two-way renormalized stop probability.

    Both masses zero means the provider put no weight on either verdict;
    that carries no signal, so it reads as even odds.
    """
    if p_yes_raw is None or p_no_raw is None:
        raise ProviderError("provider lacks decision probabilities")
    if p_yes_raw < 0 or p_no_raw < 0:
        raise ProviderError("decision probabilities must be >= 0")
    total = p_yes_raw + p_no_raw
    if total <= 0.0:
        return 0.5
    return p_yes_raw / total


def retrieval_scores(graph: HWDAG, relevance: np.ndarray) -> np.ndarray:
    """Propagate visited-node relevance one hop down the weighted edges.

    relevance is dense over node ids, zero for unvisited nodes; the result
    z[i] sums r[j] * e[j, i] over visited predecessors j.
    """
    indptr, indices, weights = graph.csr_arrays()
    r = np.ascontiguousarray(relevance, dtype=np.float64)
    if r.shape[0] != graph.num_nodes:
        raise ValueError("relevance length must equal the node count")
    return kernels.propagate_scores(indptr, indices, weights, r)


def select_next(
    z: np.ndarray,
    sims: np.ndarray | None,
    visited_mask: np.ndarray,
    *,
    attention_retrieval: bool = True,
    embedding_similarity: bool = True,
) -> int | None:
    """Pick the unvisited node with the highest fused score.

    The fused score adds propagated relevance and cosine similarity with
    no weighting. Ties go to the lowest node id; returns None only when
    every node is visited.
    """
    if visited_mask.all():
        return None
    f = np.zeros(z.shape[0], dtype=np.float64)
    if attention_retrieval:
        f += z
    if embedding_similarity:
        if sims is None:
            raise ValueError("embedding similarities required when the flag is on")
        f += sims
    f[visited_mask] = -np.inf
    return int(np.argmax(f))


def cosine_similarities(query_vec: np.ndarray, node_vecs: np.ndarray) -> np.ndarray:
    qn = float(np.linalg.norm(query_vec))
    norms = np.linalg.norm(node_vecs, axis=1)
    sims = np.zeros(node_vecs.shape[0], dtype=np.float64)
    if qn == 0.0:
        return sims
    ok = norms > 0.0
    sims[ok] = (node_vecs[ok] @ query_vec) / (norms[ok] * qn)
    return sims


class SearchSession:
    """Single-owner mutable state for one query over one graph.

    Tracks the append-only visited set S (order matters: a node's position
    index is fixed when it enters the context and never recomputed), the
    per-node relevance, the decision log, and the token ledger.
    """

    def __init__(self, graph: HWDAG, cfg: SearchConfig):
        self.graph = graph
        self.cfg = cfg
        self.visited: list[int] = []
        self.visited_mask = np.zeros(graph.num_nodes, dtype=bool)
        self.relevance = np.zeros(graph.num_nodes, dtype=np.float64)
        self.decisions: list[DecisionRecord] = []
        self.ledger = TokenLedger()
        self.flags: list[str] = []
        self.yes_count = 0
        self._next_position = 2  # the query itself occupies position 1
        self._context_total: int | None = None

    def record_append(self, items: list[BatchItem], resp: DecideResponse) -> None:
        if len(resp.node_query_attention) != len(items):
            raise ProviderError(
                f"provider returned {len(resp.node_query_attention)} relevance values"
                f" for {len(items)} appended nodes"
            )
        for item, r_raw in zip(items, resp.node_query_attention):
            self.visited.append(item.node_id)
            self.visited_mask[item.node_id] = True
            self.relevance[item.node_id] = position_normalize(r_raw, self._next_position)
            self._next_position += 1
        self.ledger.appended += resp.tokens_appended
        self.ledger.decide_scaffold += resp.tokens_scaffold
        self.ledger.decide_generated += resp.tokens_generated
        if self._context_total is not None:
            expected = self._context_total + resp.tokens_appended
            if resp.context_tokens_total != expected:
                raise ProviderError(
                    "cache accounting mismatch: context grew to "
                    f"{resp.context_tokens_total}, expected {expected}"
                )
        self._context_total = resp.context_tokens_total

    def record_decision(self, resp: DecideResponse) -> DecisionRecord:
        p_yes = renormalize_decision(resp.p_yes_raw, resp.p_no_raw)
        verdict = "stop" if p_yes > self.cfg.t_p else "continue"
        if verdict == "stop":
            self.yes_count += 1
        record = DecisionRecord(
            index=len(self.decisions),
            p_yes_raw=resp.p_yes_raw,
            p_no_raw=resp.p_no_raw,
            p_yes=p_yes,
            verdict=verdict,
            yes_count=self.yes_count,
        )
        self.decisions.append(record)
        return record


def _node_items(graph: HWDAG, ids: list[int]) -> list[BatchItem]:
    return [BatchItem(node_id=i, text=graph.nodes[i].text) for i in ids]


def _seed_ids(graph: HWDAG, cfg: SearchConfig, sims: np.ndarray | None, provider, query: str) -> list[int]:
    top = graph.top_level_ids()
    budget = cfg.seed_token_budget
    if budget is None:
        budget = int(graph.meta.get("config", {}).get("batch_threshold_s", 0)) or None
    total = sum(graph.nodes[i].token_count for i in top)
    if budget is None or total <= budget:
        return top
    # Graphs built elsewhere can carry an oversized top level; fall back to
    # seeding only the nodes most similar to the query, best first, while
    # they fit the budget.
    if sims is None:
        sims = _node_similarities(graph, provider, query)
    order = sorted(top, key=lambda i: (-sims[i], i))
    chosen: list[int] = []
    used = 0
    for i in order:
        cost = graph.nodes[i].token_count
        if chosen and used + cost > budget:
            continue
        chosen.append(i)
        used += cost
    return sorted(chosen)


def _node_similarities(graph: HWDAG, provider, query: str) -> np.ndarray:
    texts = [graph.nodes[i].text for i in range(graph.num_nodes)]
    resp = provider.embed([query] + texts)
    vectors = np.asarray(resp.vectors, dtype=np.float64)
    return cosine_similarities(vectors[0], vectors[1:])


def run_search(graph: HWDAG, query: str, provider, cfg: SearchConfig) -> SearchResult:
    """Answer one query against a built graph.

    Seeds the provider session with the top-level nodes, then repeats:
    ask for a stop decision, and while the stop rule is unmet retrieve the
    best-scoring unvisited node and append it. With dynamic_control off the
    decision probabilities are ignored and exactly fixed_budget nodes are
    retrieved. Always finishes with an answer turn.
    """
    if graph.num_nodes == 0:
        raise ValueError("cannot search an empty graph")
    if not query.strip():
        raise ValueError("query must be non-empty")

    session = SearchSession(graph, cfg)
    max_retrievals = cfg.max_retrievals if cfg.max_retrievals is not None else graph.num_nodes

    sims: np.ndarray | None = None
    if cfg.embedding_similarity:
        sims = _node_similarities(graph, provider, query)

    seed_ids = _seed_ids(graph, cfg, sims, provider, query)
    handle = provider.create_session(query)
    session.ledger.session_prompt = handle.tokens_prompt

    retrievals = 0
    stop_reason = "exhausted"
    pending = _node_items(graph, seed_ids)
    try:
        while True:
            resp = provider.decide(handle, pending)
            session.record_append(pending, resp)
            pending = []

            if cfg.dynamic_control:
                session.record_decision(resp)
                if session.yes_count >= cfg.t_n:
                    stop_reason = "confident"
                    break
                if retrievals >= max_retrievals:
                    stop_reason = "budget"
                    break
            else:
                if retrievals >= cfg.fixed_budget:
                    stop_reason = "fixed"
                    break

            z = retrieval_scores(graph, session.relevance)
            nxt = select_next(
                z,
                sims,
                session.visited_mask,
                attention_retrieval=cfg.attention_retrieval,
                embedding_similarity=cfg.embedding_similarity,
            )
            if nxt is None:
                stop_reason = "exhausted"
                break
            retrievals += 1
            pending = _node_items(graph, [nxt])

        if stop_reason in ("budget", "exhausted"):
            session.flags.append(EXHAUSTED_FLAG)

        answer_resp = provider.answer(handle)
        session.ledger.answer_prompt = answer_resp.tokens_prompt
        session.ledger.answer_generated = answer_resp.tokens_generated
    finally:
        try:
            provider.close_session(handle)
        except ProviderError:
            pass

    total = session.ledger.total_new_tokens
    return SearchResult(
        answer=answer_resp.text,
        visited=list(session.visited),
        decisions=list(session.decisions),
        tokens_processed=total,
        flops_estimate=flops_estimate(total, cfg.params),
        retrievals=retrievals,
        seed_ids=list(seed_ids),
        stop_reason=stop_reason,
        flags=list(session.flags),
        relevance={i: float(session.relevance[i]) for i in session.visited},
        ledger=session.ledger,
    )
