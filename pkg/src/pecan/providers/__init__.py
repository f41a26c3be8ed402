"""Provider protocol: message types, prompt templates, mock and HTTP handles.

A provider handle is any object implementing ``summarize``,
``create_session`` / ``decide`` / ``answer`` / ``close_session``, ``embed``,
and ``info``. The conformance suite in :mod:`pecan.providers.conformance`
is the contract test every implementation must pass.
"""

from .types import (
    AnswerResponse,
    BatchItem,
    DecideResponse,
    EmbedResponse,
    PROTOCOL_HEADER,
    PROTOCOL_VERSION,
    ProviderError,
    ProviderInfo,
    ProtocolVersionMismatch,
    RetriesExhausted,
    SchemaViolation,
    ScriptExhausted,
    SessionHandle,
    SummarizeRequest,
    SummarizeResponse,
    UnknownSession,
)
from .mock import MockProvider
from .http import EndpointConfig, HttpProvider

__all__ = [
    "AnswerResponse",
    "BatchItem",
    "DecideResponse",
    "EmbedResponse",
    "EndpointConfig",
    "HttpProvider",
    "MockProvider",
    "PROTOCOL_HEADER",
    "PROTOCOL_VERSION",
    "ProviderError",
    "ProviderInfo",
    "ProtocolVersionMismatch",
    "RetriesExhausted",
    "SchemaViolation",
    "ScriptExhausted",
    "SessionHandle",
    "SummarizeRequest",
    "SummarizeResponse",
    "UnknownSession",
]
