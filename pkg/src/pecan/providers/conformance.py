"""Provider conformance suite.

One suite, every provider: the in-process mock and any HTTP service must
pass the identical checks. Each check raises ``ConformanceFailure`` with a
named check id on violation; ``run_conformance`` returns the list of checks
that passed.

Checks cover: wire-schema validity of responses, attention matrix shape and
sign, token-surface reconstruction, summarize determinism, append-only
session accounting, decision probability bounds, embedding normalization,
and unknown-session rejection.
"""

from __future__ import annotations

import math

from . import templates, wire
from .types import (
    BatchItem,
    ProviderError,
    SessionHandle,
    SummarizeRequest,
)

FIXTURE_BATCH = [
    BatchItem(node_id=0, text="The tabby cat slept on the warm windowsill all afternoon."),
    BatchItem(node_id=1, text="A spotted dog barked at the mail carrier near the gate."),
    BatchItem(node_id=2, text="Rain fell on the quiet village and filled the stone well."),
]
FIXTURE_QUERY = "Where did the tabby cat sleep during the afternoon?"


class ConformanceFailure(AssertionError):
    def __init__(self, check: str, message: str):
        super().__init__(f"[{check}] {message}")
        self.check = check


def _require(check: str, condition: bool, message: str) -> None:
    if not condition:
        raise ConformanceFailure(check, message)


def check_summarize(provider) -> None:
    req = SummarizeRequest(batch=list(FIXTURE_BATCH), template_id=templates.SUMMARIZE_V1)
    resp = provider.summarize(req)
    payload = wire.summarize_response_to_wire(resp)
    wire.validate_message("summarize_response", payload)

    t_gen = len(resp.generated_tokens)
    _require("summarize.nonempty", t_gen >= 1, "no generated tokens")
    _require(
        "summarize.token-surface",
        "".join(resp.generated_tokens) == resp.generated_text,
        "generated_tokens do not concatenate to generated_text",
    )
    _require(
        "summarize.shape",
        len(resp.token_node_attention) == t_gen
        and all(len(row) == len(req.batch) for row in resp.token_node_attention),
        f"attention must be T_gen x K = {t_gen} x {len(req.batch)}",
    )
    flat = [x for row in resp.token_node_attention for x in row]
    _require(
        "summarize.sign",
        all(math.isfinite(x) and x >= 0 for x in flat),
        "attention entries must be finite and >= 0",
    )

    again = provider.summarize(SummarizeRequest(batch=list(FIXTURE_BATCH), template_id=templates.SUMMARIZE_V1))
    _require(
        "summarize.deterministic",
        wire.summarize_response_to_wire(again) == payload,
        "identical requests must produce identical responses",
    )


def check_session_lifecycle(provider) -> None:
    handle = provider.create_session(FIXTURE_QUERY, templates.DECIDE_V1)
    _require("session.prompt-tokens", handle.tokens_prompt >= 1, "prompt token count must be >= 1")

    context = handle.tokens_prompt
    seen_appended = 0
    for group in ([FIXTURE_BATCH[0], FIXTURE_BATCH[1]], [FIXTURE_BATCH[2]], []):
        resp = provider.decide(handle, list(group))
        wire.validate_message("decide_response", wire.decide_response_to_wire(resp))
        _require(
            "decide.probability-bounds",
            math.isfinite(resp.p_yes_raw)
            and math.isfinite(resp.p_no_raw)
            and resp.p_yes_raw >= 0
            and resp.p_no_raw >= 0,
            f"raw probabilities out of range: ({resp.p_yes_raw}, {resp.p_no_raw})",
        )
        _require(
            "decide.relevance-shape",
            len(resp.node_query_attention) == len(group)
            and all(math.isfinite(r) and r >= 0 for r in resp.node_query_attention),
            "node_query_attention must hold one finite non-negative value per appended node",
        )
        _require(
            "session.append-only",
            resp.context_tokens_total == context + resp.tokens_appended,
            f"context must grow by exactly tokens_appended"
            f" ({context} + {resp.tokens_appended} != {resp.context_tokens_total})",
        )
        context = resp.context_tokens_total
        seen_appended += resp.tokens_appended
    _require("session.appended-positive", seen_appended >= 1, "appending nodes processed no tokens")

    answer = provider.answer(handle)
    wire.validate_message("answer_response", wire.answer_response_to_wire(answer))
    _require("answer.text", isinstance(answer.text, str) and len(answer.text) > 0, "empty answer")

    provider.close_session(handle)


def check_unknown_session(provider) -> None:
    bogus = SessionHandle(session_id="no-such-session", tokens_prompt=0)
    try:
        provider.decide(bogus, [FIXTURE_BATCH[0]])
    except ProviderError:
        return
    raise ConformanceFailure("session.unknown", "decide on an unknown session must fail")


def check_embed(provider) -> None:
    resp = provider.embed([item.text for item in FIXTURE_BATCH])
    wire.validate_message("embed_response", wire.embed_response_to_wire(resp))
    _require("embed.count", len(resp.vectors) == len(FIXTURE_BATCH), "one vector per input text")
    for vec in resp.vectors:
        _require("embed.dim", len(vec) == resp.dim, "vector length must equal declared dim")
        norm = math.sqrt(sum(x * x for x in vec))
        _require("embed.unit-norm", abs(norm - 1.0) <= 1e-6, f"vector norm {norm} not within 1e-6 of 1")


CHECKS = [
    ("summarize", check_summarize),
    ("session-lifecycle", check_session_lifecycle),
    ("unknown-session", check_unknown_session),
    ("embed", check_embed),
]


def run_conformance(provider) -> list[str]:
    """Run every check against a provider handle; returns passed check names."""
    passed = []
    for name, check in CHECKS:
        check(provider)
        passed.append(name)
    return passed
