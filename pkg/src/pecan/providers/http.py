"""HTTP client for the provider protocol.

Speaks JSON over the six endpoints (summarize, session create/delete,
decide, answer, embed), tags every request with the protocol version
header, validates response bodies against the shipped schemas, and retries
transient failures (connection errors and 5xx) with exponential backoff.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import httpx

from . import templates
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
    SessionHandle,
    SummarizeRequest,
    SummarizeResponse,
    UnknownSession,
)
from . import wire

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 3
BACKOFF_BASE_S = 0.25


@dataclass
class EndpointConfig:
    base_url: str
    auth_token: str | None = None
    timeout_s: float = 60.0
    max_attempts: int = MAX_ATTEMPTS
    backoff_base_s: float = BACKOFF_BASE_S


class HttpProvider:
    """Provider handle backed by a remote inference service."""

    def __init__(self, config: EndpointConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        headers = {PROTOCOL_HEADER: PROTOCOL_VERSION}
        if config.auth_token:
            headers["Authorization"] = f"Bearer {config.auth_token}"
        self._client = httpx.Client(
            base_url=config.base_url,
            headers=headers,
            timeout=config.timeout_s,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def info(self) -> ProviderInfo:
        return ProviderInfo(provider_id=f"http({self.config.base_url})")

    # -- transport ---------------------------------------------------------

    def _request(self, method: str, path: str, payload: dict | None = None) -> httpx.Response:
        last_error: Exception | None = None
        for attempt in range(1, self.config.max_attempts + 1):
            try:
                response = self._client.request(method, path, json=payload)
            except httpx.TransportError as exc:
                last_error = exc
            else:
                if response.status_code < 500:
                    self._check_protocol(response)
                    return response
                last_error = ProviderError(f"server error {response.status_code}: {response.text[:200]}")
            if attempt < self.config.max_attempts:
                delay = self.config.backoff_base_s * (2 ** (attempt - 1))
                logger.warning(
                    "provider call %s %s failed (attempt %d/%d): %s; retrying in %.2fs",
                    method, path, attempt, self.config.max_attempts, last_error, delay,
                )
                time.sleep(delay)
        raise RetriesExhausted(
            f"{method} {path} failed after {self.config.max_attempts} attempts: {last_error}"
        )

    @staticmethod
    def _check_protocol(response: httpx.Response) -> None:
        version = response.headers.get(PROTOCOL_HEADER)
        if version is not None and version != PROTOCOL_VERSION:
            raise ProtocolVersionMismatch(
                f"protocol version mismatch: server speaks {version!r}, client {PROTOCOL_VERSION!r}"
            )

    def _post_json(self, path: str, payload: dict, schema: str | None = None) -> dict:
        response = self._request("POST", path, payload)
        if response.status_code == 404:
            raise UnknownSession(response.text[:200])
        if response.status_code >= 400:
            if response.status_code == 409:
                raise ProtocolVersionMismatch(response.text[:200])
            raise ProviderError(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            body = response.json()
        except ValueError as exc:
            raise SchemaViolation(f"non-JSON response from {path}") from exc
        if schema is not None:
            wire.validate_message(schema, body)
        return body

    # -- protocol calls ------------------------------------------------------

    def summarize(self, req: SummarizeRequest) -> SummarizeResponse:
        body = self._post_json("/v1/summarize", wire.summarize_request_to_wire(req))
        return wire.summarize_response_from_wire(body)

    def create_session(self, query: str, template_id: str = templates.DECIDE_V1) -> SessionHandle:
        body = self._post_json(
            "/v1/session", {"query": query, "template_id": template_id}, schema="session_response"
        )
        return SessionHandle(session_id=body["session_id"], tokens_prompt=int(body["tokens_prompt"]))

    def decide(self, handle: SessionHandle, append_nodes: list[BatchItem]) -> DecideResponse:
        body = self._post_json(
            "/v1/decide",
            {"session_id": handle.session_id, "append_nodes": wire.batch_to_wire(append_nodes)},
        )
        return wire.decide_response_from_wire(body)

    def answer(self, handle: SessionHandle) -> AnswerResponse:
        body = self._post_json("/v1/answer", {"session_id": handle.session_id})
        return wire.answer_response_from_wire(body)

    def close_session(self, handle: SessionHandle) -> None:
        response = self._request("DELETE", f"/v1/session/{handle.session_id}")
        if response.status_code not in (200, 204, 404):
            raise ProviderError(f"session delete failed: HTTP {response.status_code}")

    def embed(self, texts: list[str]) -> EmbedResponse:
        body = self._post_json("/v1/embed", {"texts": texts})
        return wire.embed_response_from_wire(body)
