"""Inference engine: a causal LM with its attention surfaced per source span.

One model, three duties. ``summarize`` runs the graph-construction prompt and
reports, for every generated token, the head- and layer-averaged attention to
each source node's token span. Sessions hold an append-only KV cache for the
retrieval dialogue: ``decide`` extends the cache with node tokens and probes
the Yes/No verdict on a throwaway copy, so the persistent context grows by
exactly the appended tokens and nothing else. ``embed`` mean-pools the last
hidden layer.

All token bookkeeping is in model-tokenizer positions. Prompts are tokenized
piecewise around their template slots so span boundaries are exact rather
than recovered by string search.
"""

from __future__ import annotations

import copy
import logging
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field

import torch

from pecan.providers import templates

logger = logging.getLogger(__name__)

# Fixed per-call probe suffixes. They are processed on a copy of the session
# cache and never retained, so the client sees them only as scaffold counts.
DECIDE_SCAFFOLD = "\nAnswer:"
ANSWER_SCAFFOLD = "\n{instruction}\nAnswer:"

YES_SURFACES = ("Yes", " Yes")
NO_SURFACES = ("No", " No")


class EngineError(Exception):
    pass


class UnknownSessionError(EngineError):
    pass


class WindowExceeded(EngineError):
    pass


@dataclass
class EngineConfig:
    model_id: str | None = None
    device: str = "cpu"
    window: int = 4096
    max_sessions: int = 64
    summary_max_new: int = 256
    answer_max_new: int = 128
    seed: int = 0


@dataclass
class SummarizeResult:
    generated_text: str
    generated_tokens: list[str]
    token_node_attention: list[list[float]]
    tokens_prompt: int


@dataclass
class DecideResult:
    p_yes_raw: float
    p_no_raw: float
    node_query_attention: list[float]
    tokens_appended: int
    tokens_scaffold: int
    tokens_generated: int
    context_tokens_total: int


@dataclass
class AnswerResult:
    text: str
    tokens_prompt: int
    tokens_generated: int


@dataclass
class _Session:
    session_id: str
    cache: object
    context_ids: list[int]
    query_span: tuple[int, int]
    created_at: float = field(default_factory=time.time)


class InferenceEngine:
    """Model + tokenizer behind the six protocol operations.

    A single lock serializes all forwards: the service runs one model on one
    device, and per-session ordering falls out of the same lock.
    """

    def __init__(self, model, tokenizer, config: EngineConfig | None = None):
        self._config = config or EngineConfig()
        self._model = model.eval()
        self._tokenizer = tokenizer
        self._device = next(model.parameters()).device
        self._lock = threading.RLock()
        self._sessions: OrderedDict[str, _Session] = OrderedDict()

        self._eos_id = self._resolve_eos()
        self._yes_ids = self._surface_ids(YES_SURFACES)
        self._no_ids = self._surface_ids(NO_SURFACES)
        if not self._yes_ids or not self._no_ids:
            raise EngineError("tokenizer has no single-token Yes/No surfaces")
        self._decide_scaffold_ids = self._encode(DECIDE_SCAFFOLD)
        self._answer_scaffold_ids = self._encode(
            ANSWER_SCAFFOLD.replace(
                "{instruction}", templates.get_template(templates.ANSWER_V1)
            )
        )
        if not self._decide_scaffold_ids or not self._answer_scaffold_ids:
            raise EngineError("probe scaffolds tokenize to zero tokens")

    @classmethod
    def from_pretrained(cls, config: EngineConfig) -> "InferenceEngine":
        from transformers import AutoModelForCausalLM, AutoTokenizer

        if not config.model_id:
            raise EngineError("model_id required to load a pretrained model")
        torch.manual_seed(config.seed)
        tokenizer = AutoTokenizer.from_pretrained(config.model_id)
        # Attention extraction needs real per-head matrices; fused kernels
        # do not expose them.
        model = AutoModelForCausalLM.from_pretrained(
            config.model_id, attn_implementation="eager"
        )
        model.to(config.device)
        logger.info("loaded %s on %s", config.model_id, config.device)
        return cls(model, tokenizer, config)

    @property
    def config(self) -> EngineConfig:
        return self._config

    @property
    def model_id(self) -> str:
        return self._config.model_id or type(self._model).__name__

    # -- tokenizer plumbing --------------------------------------------------

    def _resolve_eos(self) -> int | None:
        eos = self._tokenizer.eos_token_id
        if eos is None:
            eos = getattr(self._model.config, "eos_token_id", None)
        if isinstance(eos, (list, tuple)):
            eos = eos[0] if eos else None
        return eos

    def _surface_ids(self, surfaces: tuple[str, ...]) -> list[int]:
        ids = set()
        for surface in surfaces:
            encoded = self._tokenizer.encode(surface, add_special_tokens=False)
            if len(encoded) == 1:
                ids.add(encoded[0])
        return sorted(ids)

    def _encode(self, text: str) -> list[int]:
        return self._tokenizer.encode(text, add_special_tokens=False)

    def _tensor(self, ids: list[int]) -> torch.Tensor:
        return torch.tensor([ids], dtype=torch.long, device=self._device)

    def _wire_tokens(self, ids: list[int]) -> list[str]:
        """Token surfaces whose concatenation is exactly the decoded text."""
        tokens = []
        prev = ""
        for i in range(len(ids)):
            cur = self._tokenizer.decode(ids[: i + 1])
            tokens.append(cur[len(prev):])
            prev = cur
        return tokens

    @staticmethod
    def _fold_empty_tokens(
        tokens: list[str], rows: list[list[float]]
    ) -> tuple[list[str], list[list[float]]]:
        """Merge zero-length surfaces (partial byte pieces) into a neighbor.

        Attention rows of folded tokens are averaged so row count keeps
        matching the surfaced token count.
        """
        out_tokens: list[str] = []
        out_rows: list[list[float]] = []
        pending: list[list[float]] = []
        for token, row in zip(tokens, rows):
            if token == "":
                pending.append(row)
                continue
            if pending:
                group = pending + [row]
                row = [sum(col) / len(col) for col in zip(*group)]
                pending = []
            out_tokens.append(token)
            out_rows.append(row)
        if pending and out_rows:
            group = [out_rows[-1]] + pending
            out_rows[-1] = [sum(col) / len(col) for col in zip(*group)]
        return out_tokens, out_rows

    # -- attention aggregation -------------------------------------------------

    @staticmethod
    def _attention_avg(attentions) -> torch.Tensor:
        """Head- and layer-averaged rows, accumulated one layer at a time."""
        acc = None
        for layer in attentions:
            mean_heads = layer[0].mean(dim=0)
            acc = mean_heads if acc is None else acc + mean_heads
        return acc / len(attentions)

    def _pick(self, logits: torch.Tensor, ban_eos: bool) -> int:
        if ban_eos and self._eos_id is not None:
            logits = logits.clone()
            logits[self._eos_id] = float("-inf")
        return int(torch.argmax(logits))

    # -- summarize -------------------------------------------------------------

    def summarize(self, texts: list[str], template_id: str) -> SummarizeResult:
        template = templates.get_template(template_id)
        if "{segments}" not in template:
            raise EngineError(f"template {template_id!r} has no segments slot")
        prefix, suffix = template.split("{segments}", 1)

        ids = self._encode(prefix)
        spans: list[tuple[int, int]] = []
        for i, text in enumerate(texts):
            if i:
                ids.extend(self._encode("\n"))
            start = len(ids)
            ids.extend(self._encode(text))
            spans.append((start, len(ids)))
        ids.extend(self._encode(suffix))

        max_new = min(self._config.summary_max_new, self._config.window - len(ids))
        if max_new < 1:
            raise WindowExceeded(
                f"prompt of {len(ids)} tokens leaves no room in a {self._config.window}-token window"
            )

        with self._lock, torch.no_grad():
            out = self._model(self._tensor(ids), use_cache=True)
            cache = out.past_key_values
            logits = out.logits[0, -1]
            gen_ids: list[int] = []
            rows: list[list[float]] = []
            for step in range(max_new):
                next_id = self._pick(logits, ban_eos=step == 0)
                if next_id == self._eos_id:
                    break
                out = self._model(
                    self._tensor([next_id]),
                    past_key_values=cache,
                    use_cache=True,
                    output_attentions=True,
                )
                gen_ids.append(next_id)
                row = self._attention_avg(out.attentions)[0]
                rows.append(
                    [float(row[s:e].mean()) if e > s else 0.0 for s, e in spans]
                )
                cache = out.past_key_values
                logits = out.logits[0, -1]

        tokens, rows = self._fold_empty_tokens(self._wire_tokens(gen_ids), rows)
        return SummarizeResult(
            generated_text="".join(tokens),
            generated_tokens=tokens,
            token_node_attention=rows,
            tokens_prompt=len(ids),
        )

    # -- sessions ----------------------------------------------------------------

    def create_session(self, query: str, template_id: str) -> tuple[str, int]:
        template = templates.get_template(template_id)
        if "{question}" not in template:
            raise EngineError(f"template {template_id!r} has no question slot")
        before, after = template.split("{question}", 1)

        ids = self._encode(before)
        q_start = len(ids)
        ids.extend(self._encode(query))
        q_end = len(ids)
        ids.extend(self._encode(after))
        if len(ids) + len(self._decide_scaffold_ids) + 1 > self._config.window:
            raise WindowExceeded(
                f"session prompt of {len(ids)} tokens exceeds the {self._config.window}-token window"
            )

        with self._lock:
            with torch.no_grad():
                out = self._model(self._tensor(ids), use_cache=True)
            session_id = uuid.uuid4().hex
            self._sessions[session_id] = _Session(
                session_id=session_id,
                cache=out.past_key_values,
                context_ids=list(ids),
                query_span=(q_start, q_end),
            )
            while len(self._sessions) > self._config.max_sessions:
                evicted, _ = self._sessions.popitem(last=False)
                logger.info("evicted session %s (capacity %d)", evicted, self._config.max_sessions)
        return session_id, len(ids)

    def _get_session(self, session_id: str) -> _Session:
        try:
            session = self._sessions[session_id]
        except KeyError:
            raise UnknownSessionError(f"unknown session_id: {session_id!r}") from None
        self._sessions.move_to_end(session_id)
        return session

    def session_context_ids(self, session_id: str) -> list[int]:
        with self._lock:
            return list(self._get_session(session_id).context_ids)

    def delete_session(self, session_id: str) -> bool:
        with self._lock:
            return self._sessions.pop(session_id, None) is not None

    def decide(self, session_id: str, texts: list[str]) -> DecideResult:
        with self._lock:
            session = self._get_session(session_id)
            # Trailing newline per node keeps the appended spans a partition
            # of the non-prompt context.
            append_ids = [self._encode(text + "\n") for text in texts]
            appended = sum(len(piece) for piece in append_ids)
            budget = len(session.context_ids) + appended + len(self._decide_scaffold_ids) + 1
            if budget > self._config.window:
                raise WindowExceeded(
                    f"decide needs {budget} tokens, window is {self._config.window}"
                )

            node_attention: list[float] = []
            with torch.no_grad():
                if appended:
                    flat = [tok for piece in append_ids for tok in piece]
                    out = self._model(
                        self._tensor(flat),
                        past_key_values=session.cache,
                        use_cache=True,
                        output_attentions=True,
                    )
                    session.cache = out.past_key_values
                    att = self._attention_avg(out.attentions)
                    q_start, q_end = session.query_span
                    pos = 0
                    for piece in append_ids:
                        if piece and q_end > q_start:
                            block = att[pos : pos + len(piece), q_start:q_end]
                            node_attention.append(float(block.sum(dim=1).mean()))
                        else:
                            node_attention.append(0.0)
                        pos += len(piece)
                    session.context_ids.extend(flat)
                else:
                    node_attention = [0.0] * len(texts)

                probe = copy.deepcopy(session.cache)
                out = self._model(
                    self._tensor(self._decide_scaffold_ids),
                    past_key_values=probe,
                    use_cache=True,
                )
                dist = torch.softmax(out.logits[0, -1].double(), dim=-1)
                p_yes = float(sum(dist[i] for i in self._yes_ids))
                p_no = float(sum(dist[i] for i in self._no_ids))

        return DecideResult(
            p_yes_raw=p_yes,
            p_no_raw=p_no,
            node_query_attention=node_attention,
            tokens_appended=appended,
            tokens_scaffold=len(self._decide_scaffold_ids),
            tokens_generated=1,
            context_tokens_total=len(session.context_ids),
        )

    def answer(self, session_id: str) -> AnswerResult:
        with self._lock:
            session = self._get_session(session_id)
            scaffold = self._answer_scaffold_ids
            max_new = min(
                self._config.answer_max_new,
                self._config.window - len(session.context_ids) - len(scaffold),
            )
            if max_new < 1:
                raise WindowExceeded(
                    f"answer prompt exceeds the {self._config.window}-token window"
                )
            with torch.no_grad():
                probe = copy.deepcopy(session.cache)
                out = self._model(
                    self._tensor(scaffold), past_key_values=probe, use_cache=True
                )
                cache = out.past_key_values
                logits = out.logits[0, -1]
                gen_ids: list[int] = []
                for step in range(max_new):
                    next_id = self._pick(logits, ban_eos=step == 0)
                    if next_id == self._eos_id:
                        break
                    out = self._model(
                        self._tensor([next_id]), past_key_values=cache, use_cache=True
                    )
                    gen_ids.append(next_id)
                    cache = out.past_key_values
                    logits = out.logits[0, -1]

        return AnswerResult(
            text=self._tokenizer.decode(gen_ids),
            tokens_prompt=len(scaffold),
            tokens_generated=len(gen_ids),
        )

    # -- embeddings ----------------------------------------------------------------

    def embed(self, texts: list[str]) -> tuple[list[list[float]], int]:
        dim = int(self._model.config.hidden_size)
        vectors: list[list[float]] = []
        with self._lock, torch.no_grad():
            for text in texts:
                ids = self._encode(text)
                if not ids:
                    # Whitespace-only text has no tokens; embed the terminator.
                    ids = [self._eos_id if self._eos_id is not None else 0]
                if len(ids) > self._config.window:
                    raise WindowExceeded(
                        f"embed input of {len(ids)} tokens exceeds the"
                        f" {self._config.window}-token window"
                    )
                out = self._model(self._tensor(ids), output_hidden_states=True)
                pooled = out.hidden_states[-1][0].double().mean(dim=0)
                norm = float(pooled.norm())
                if norm < 1e-12:
                    pooled = torch.zeros(dim, dtype=torch.float64)
                    pooled[0] = 1.0
                else:
                    pooled = pooled / norm
                vectors.append([float(x) for x in pooled])
        return vectors, dim
