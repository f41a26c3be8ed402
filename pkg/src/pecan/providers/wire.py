"""JSON (de)serialization and schema enforcement for the wire protocol."""

from __future__ import annotations

import importlib.resources
import json
from functools import lru_cache

import jsonschema

from .types import (
    AnswerResponse,
    BatchItem,
    DecideResponse,
    EmbedResponse,
    SchemaViolation,
    SummarizeRequest,
    SummarizeResponse,
)


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    ref = importlib.resources.files("pecan.providers") / "schemas" / f"{name}.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def validate_message(name: str, payload: dict) -> None:
    """Raise SchemaViolation naming the schema and first offending path."""
    try:
        jsonschema.validate(payload, load_schema(name))
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaViolation(f"schema violation ({name} at {path}): {exc.message}") from exc


# -- request encoding ------------------------------------------------------


def batch_to_wire(batch: list[BatchItem]) -> list[dict]:
    return [{"node_id": item.node_id, "text": item.text} for item in batch]


def summarize_request_to_wire(req: SummarizeRequest) -> dict:
    return {"batch": batch_to_wire(req.batch), "template_id": req.template_id}


# -- response decoding -----------------------------------------------------


def summarize_response_from_wire(payload: dict) -> SummarizeResponse:
    validate_message("summarize_response", payload)
    return SummarizeResponse(
        generated_text=payload["generated_text"],
        generated_tokens=list(payload["generated_tokens"]),
        token_node_attention=[list(row) for row in payload["token_node_attention"]],
        tokens_prompt=int(payload.get("tokens_prompt", 0)),
    )


def decide_response_from_wire(payload: dict) -> DecideResponse:
    validate_message("decide_response", payload)
    return DecideResponse(
        p_yes_raw=float(payload["p_yes_raw"]),
        p_no_raw=float(payload["p_no_raw"]),
        node_query_attention=[float(x) for x in payload["node_query_attention"]],
        tokens_appended=int(payload["tokens_appended"]),
        tokens_scaffold=int(payload["tokens_scaffold"]),
        tokens_generated=int(payload["tokens_generated"]),
        context_tokens_total=int(payload["context_tokens_total"]),
    )


def answer_response_from_wire(payload: dict) -> AnswerResponse:
    validate_message("answer_response", payload)
    return AnswerResponse(
        text=payload["text"],
        tokens_prompt=int(payload["tokens_prompt"]),
        tokens_generated=int(payload["tokens_generated"]),
    )


def embed_response_from_wire(payload: dict) -> EmbedResponse:
    validate_message("embed_response", payload)
    return EmbedResponse(vectors=[list(v) for v in payload["vectors"]], dim=int(payload["dim"]))


# -- response encoding (used by in-process providers and the sidecar's twin) --


def summarize_response_to_wire(resp: SummarizeResponse) -> dict:
    return {
        "generated_text": resp.generated_text,
        "generated_tokens": resp.generated_tokens,
        "token_node_attention": resp.token_node_attention,
        "tokens_prompt": resp.tokens_prompt,
    }


def decide_response_to_wire(resp: DecideResponse) -> dict:
    return {
        "p_yes_raw": resp.p_yes_raw,
        "p_no_raw": resp.p_no_raw,
        "node_query_attention": resp.node_query_attention,
        "tokens_appended": resp.tokens_appended,
        "tokens_scaffold": resp.tokens_scaffold,
        "tokens_generated": resp.tokens_generated,
        "context_tokens_total": resp.context_tokens_total,
    }


def answer_response_to_wire(resp: AnswerResponse) -> dict:
    return {
        "text": resp.text,
        "tokens_prompt": resp.tokens_prompt,
        "tokens_generated": resp.tokens_generated,
    }


def embed_response_to_wire(resp: EmbedResponse) -> dict:
    return {"vectors": resp.vectors, "dim": resp.dim}
