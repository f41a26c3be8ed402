"""Wire-protocol message types shared by every provider implementation.

A provider exposes five calls: summarize (graph construction), session
create / decide / answer (search), and embed. The HTTP transport carries
these as JSON bodies matching the schemas in ``providers/schemas``; the
dataclasses here are their in-process form.

Token accounting fields exist so the search ledger can audit the
append-only cache contract: each call reports how many NEW tokens it
processed, split into appended context, transient scaffold, and generated
output. ``context_tokens_total`` is the session's cached context length
after the call, which must grow by exactly ``tokens_appended``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

PROTOCOL_VERSION = "1"
PROTOCOL_HEADER = "pecan-protocol"


class ProviderError(Exception):
    """Base class for provider failures."""


class ProtocolVersionMismatch(ProviderError):
    pass


class SchemaViolation(ProviderError):
    pass


class RetriesExhausted(ProviderError):
    pass


class UnknownSession(ProviderError):
    pass


class ScriptExhausted(ProviderError):
    pass


@dataclass(frozen=True)
class BatchItem:
    node_id: int
    text: str


@dataclass
class SummarizeRequest:
    batch: list[BatchItem]
    template_id: str


@dataclass
class SummarizeResponse:
    generated_text: str
    generated_tokens: list[str]
    # (T_gen, K) per-generated-token attention to each source node, already
    # averaged over heads, layers, and the source node's tokens; intra-node
    # and prompt positions excluded upstream.
    token_node_attention: list[list[float]]
    tokens_prompt: int = 0


@dataclass(frozen=True)
class SessionHandle:
    session_id: str
    tokens_prompt: int  # first-turn prompt incl. query, processed at create


@dataclass
class DecideResponse:
    p_yes_raw: float
    p_no_raw: float
    node_query_attention: list[float]  # raw r per appended node, in order
    tokens_appended: int
    tokens_scaffold: int
    tokens_generated: int
    context_tokens_total: int


@dataclass
class AnswerResponse:
    text: str
    tokens_prompt: int  # second-turn prompt tokens
    tokens_generated: int


@dataclass
class EmbedResponse:
    vectors: list[list[float]]
    dim: int


@dataclass
class ProviderInfo:
    provider_id: str
    protocol_version: str = PROTOCOL_VERSION
    extra: dict = field(default_factory=dict)
