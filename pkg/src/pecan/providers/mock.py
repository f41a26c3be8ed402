"""Deterministic in-process provider for GPU-free builds and tests.

Summaries are one bullet point per source node (the node's first sentence,
truncated to 30 tokens). Attention is token-set overlap: every generated
token in a bullet shares that bullet's Jaccard row against the batch's
source nodes, which gives real, non-uniform geometry without a model.
Decisions follow either a fixed script of raw (yes, no) pairs or a seeded
per-session random stream. Identical requests always produce byte-identical
responses.
"""

from __future__ import annotations

import hashlib
import itertools
import re

import numpy as np

from ..tokenizers import WHITESPACE_PUNCT_ID, get_tokenizer
from . import templates
from .types import (
    AnswerResponse,
    BatchItem,
    DecideResponse,
    EmbedResponse,
    ProviderInfo,
    ScriptExhausted,
    SessionHandle,
    SummarizeRequest,
    SummarizeResponse,
    UnknownSession,
)

EMBED_DIM = 256
_IP_MAX_TOKENS = 30
_SENTENCE_END = re.compile(r"[.!?]")
_WORD = re.compile(r"[A-Za-z0-9_]+")


def _word_set(text: str) -> frozenset[str]:
    return frozenset(w.lower() for w in _WORD.findall(text))


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a or not b:
        return 0.0
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def _stable_seed(*parts: str) -> int:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class _MockSession:
    def __init__(self, session_id: str, query: str, rng: np.random.Generator | None):
        self.session_id = session_id
        self.query = query
        self.query_words = _word_set(query)
        self.node_texts: list[str] = []
        self.context_tokens = 0
        self.rng = rng


class MockProvider:
    """Scriptable, fully deterministic provider implementing all five calls.

    ``decision_script`` is an ordered list of raw ``(p_yes, p_no)`` pairs
    consumed across decide calls; when absent, decisions are drawn from a
    per-session RNG seeded by ``(seed, query)`` so evaluation order never
    changes a query's decision stream.
    """

    def __init__(
        self,
        decision_script: list[tuple[float, float]] | None = None,
        seed: int = 0,
        tokenizer_id: str = WHITESPACE_PUNCT_ID,
    ):
        self._script = list(decision_script) if decision_script is not None else None
        self._script_pos = 0
        self._seed = seed
        self._tokenizer = get_tokenizer(tokenizer_id)
        self._sessions: dict[str, _MockSession] = {}
        self._session_counter = itertools.count()

    # -- identity -------------------------------------------------------

    def info(self) -> ProviderInfo:
        mode = "script" if self._script is not None else f"seed={self._seed}"
        return ProviderInfo(provider_id=f"mock/v1({mode})")

    # -- summarize -------------------------------------------------------

    def _first_sentence(self, text: str) -> str:
        stripped = text.strip()
        match = _SENTENCE_END.search(stripped)
        sentence = stripped[: match.end()] if match else stripped
        tokens = self._tokenizer.split(sentence)
        if len(tokens) > _IP_MAX_TOKENS:
            sentence = sentence[: tokens[_IP_MAX_TOKENS - 1].end]
        return " ".join(sentence.split())

    def summarize(self, req: SummarizeRequest) -> SummarizeResponse:
        if not req.batch:
            raise ValueError("summarize requires a non-empty batch")
        templates.get_template(req.template_id)

        ips = [self._first_sentence(item.text) for item in req.batch]
        generated_text = "\n".join(f"* {ip}" for ip in ips)
        tokens = self._tokenizer.wire_tokens(generated_text)

        node_words = [_word_set(item.text) for item in req.batch]
        ip_rows = [
            [_jaccard(_word_set(ip), words) for words in node_words] for ip in ips
        ]

        # Map each generated token to its bullet: bullets are one per line,
        # and a token whose whitespace prefix holds the newline already
        # belongs to the next bullet.
        attention: list[list[float]] = []
        line = 0
        for tok in tokens:
            line = min(line + tok.count("\n"), len(ip_rows) - 1)
            attention.append(ip_rows[line])
        prompt = templates.render_summarize([item.text for item in req.batch], req.template_id)
        return SummarizeResponse(
            generated_text=generated_text,
            generated_tokens=tokens,
            token_node_attention=attention,
            tokens_prompt=self._tokenizer.count(prompt),
        )

    # -- search session ----------------------------------------------------

    def create_session(self, query: str, template_id: str = templates.DECIDE_V1) -> SessionHandle:
        prefix = templates.render_decide_prefix(query, template_id)
        session_id = f"mock-{next(self._session_counter)}"
        rng = None
        if self._script is None:
            rng = np.random.default_rng(_stable_seed(str(self._seed), query))
        session = _MockSession(session_id, query, rng)
        session.context_tokens = self._tokenizer.count(prefix)
        self._sessions[session_id] = session
        return SessionHandle(session_id=session_id, tokens_prompt=session.context_tokens)

    def _session(self, handle: SessionHandle) -> _MockSession:
        try:
            return self._sessions[handle.session_id]
        except KeyError:
            raise UnknownSession(f"unknown session_id: {handle.session_id!r}") from None

    def _next_decision(self, session: _MockSession) -> tuple[float, float]:
        if self._script is not None:
            if self._script_pos >= len(self._script):
                raise ScriptExhausted("script exhausted")
            pair = self._script[self._script_pos]
            self._script_pos += 1
            return pair
        p_yes = float(session.rng.random())
        return p_yes, 1.0 - p_yes

    def decide(self, handle: SessionHandle, append_nodes: list[BatchItem]) -> DecideResponse:
        session = self._session(handle)
        appended_tokens = 0
        relevance: list[float] = []
        for item in append_nodes:
            session.node_texts.append(item.text)
            appended_tokens += self._tokenizer.count(item.text)
            relevance.append(_jaccard(_word_set(item.text), session.query_words))
        session.context_tokens += appended_tokens
        p_yes_raw, p_no_raw = self._next_decision(session)
        return DecideResponse(
            p_yes_raw=p_yes_raw,
            p_no_raw=p_no_raw,
            node_query_attention=relevance,
            tokens_appended=appended_tokens,
            tokens_scaffold=0,
            tokens_generated=1,  # the one-word verdict
            context_tokens_total=session.context_tokens,
        )

    def answer(self, handle: SessionHandle) -> AnswerResponse:
        session = self._session(handle)
        if session.node_texts:
            best = max(
                session.node_texts,
                key=lambda text: (_jaccard(_word_set(text), session.query_words), -len(text)),
            )
        else:
            best = "No information available."
        prompt_tokens = self._tokenizer.count(templates.get_template(templates.ANSWER_V1))
        return AnswerResponse(
            text=best,
            tokens_prompt=prompt_tokens,
            tokens_generated=self._tokenizer.count(best),
        )

    def close_session(self, handle: SessionHandle) -> None:
        self._sessions.pop(handle.session_id, None)

    # -- embeddings --------------------------------------------------------

    def embed(self, texts: list[str]) -> EmbedResponse:
        vectors = [self._embed_one(text) for text in texts]
        return EmbedResponse(vectors=[v.tolist() for v in vectors], dim=EMBED_DIM)

    def _embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(EMBED_DIM, dtype=np.float64)
        for word in _WORD.findall(text.lower()):
            digest = hashlib.sha256(word.encode("utf-8")).digest()
            idx = int.from_bytes(digest[:4], "big") % EMBED_DIM
            sign = 1.0 if digest[4] & 1 else -1.0
            vec[idx] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[0] = 1.0
            norm = 1.0
        return vec / norm
