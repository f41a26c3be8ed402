"""Attention aggregation arithmetic.

Providers deliver attention already averaged over heads, layers, and each
source node's tokens, as a T_gen x K matrix (one row per generated token,
one column per source node in the batch; intra-node and prompt attention
never appear). This module reduces that matrix to per-summary-point edge
rows and handles the query-relevance scaling used during search.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


class AttentionError(ValueError):
    pass


@dataclass(frozen=True)
class IPSpan:
    """Half-open token range [start, end) of one generated summary point."""

    ip_index: int
    start: int
    end: int


@dataclass(frozen=True)
class QueryRelevance:
    """Relevance of a visited node to the query.

    ``r`` is the raw query attention scaled by the node's position index in
    the session context (the query occupies position 1), compensating for
    attention drift toward earlier positions.
    """

    node_id: int
    r_raw: float
    position_index: int
    r: float


@dataclass
class AggregatedEdges:
    """Row-normalized edge weights plus degeneracy bookkeeping.

    ``degenerate_rows`` lists rows whose attention was entirely zero and
    fell back to the uniform distribution over the K sources.
    """

    weights: np.ndarray  # (M, K), rows sum to 1
    degenerate_rows: list[int]


def _check_spans(spans: list[IPSpan], t_gen: int) -> None:
    prev_end = 0
    for span in spans:
        if span.start >= span.end:
            raise AttentionError(f"empty IP span (ip {span.ip_index}: [{span.start}, {span.end}))")
        if span.start < prev_end or span.end > t_gen:
            raise AttentionError(
                f"IP span {span.ip_index} [{span.start}, {span.end}) out of order or beyond T_gen={t_gen}"
            )
        prev_end = span.end


def aggregate_edges(attn: np.ndarray, spans: list[IPSpan]) -> AggregatedEdges:
    """Collapse token-level attention into one normalized row per IP.

    Row m is the mean of the attention rows inside span m, divided by its
    sum. An all-zero row has no normalization; it becomes uniform over the
    K sources and is flagged.
    """
    attn = np.asarray(attn, dtype=np.float64)
    if attn.ndim != 2 or attn.shape[0] < 1 or attn.shape[1] < 1:
        raise AttentionError(f"attention matrix must be T_gen x K with both >= 1, got {attn.shape}")
    if not np.all(np.isfinite(attn)) or np.any(attn < 0):
        raise AttentionError("attention entries must be finite and non-negative")
    if not spans:
        raise AttentionError("no IP spans")
    _check_spans(spans, attn.shape[0])

    starts = np.array([s.start for s in spans], dtype=np.int64)
    ends = np.array([s.end for s in spans], dtype=np.int64)
    means = kernels.span_means(attn, starts, ends)

    k = attn.shape[1]
    sums = means.sum(axis=1)
    degenerate = [int(i) for i in np.nonzero(sums == 0.0)[0]]
    weights = np.empty_like(means)
    for i in range(means.shape[0]):
        if sums[i] == 0.0:
            weights[i] = 1.0 / k
        else:
            weights[i] = means[i] / sums[i]
    return AggregatedEdges(weights=weights, degenerate_rows=degenerate)


def position_normalize(r_raw: float, position_index: int) -> float:
    """Scale raw query attention by the node's context position index.

    The query sits at position 1, so the first visited node has index 2.
    """
    if position_index < 2:
        raise AttentionError("query occupies position 1; node position index must be >= 2")
    if not np.isfinite(r_raw) or r_raw < 0:
        raise AttentionError(f"r_raw must be finite and >= 0, got {r_raw}")
    return r_raw * position_index
