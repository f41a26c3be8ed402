"""Document loading, chunking into level-1 nodes, and batching.

Chunking is by raw token count (no sentence awareness): the token stream is
partitioned in order into chunks of exactly ``chunk_size_tokens`` tokens,
except possibly the last. Batching greedily packs consecutive nodes and
closes a batch *before* adding a node that would push the total past the
threshold, so a rendered prompt always fits the provider window; a single
node that is itself oversized forms its own batch and is logged.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass

from .graph import NODE_SOURCE_CHUNK, BuildConfig, IPNode
from .tokenizers import get_tokenizer

logger = logging.getLogger(__name__)


class EmptyDocument(ValueError):
    pass


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str

    def __post_init__(self) -> None:
        if not re.sub(r"\s+", "", self.text):
            raise EmptyDocument("empty input")


def chunk_document(doc: Document, cfg: BuildConfig, id_start: int = 0) -> list[IPNode]:
    """Split a document into ordered level-1 chunk nodes.

    Chunk text is the exact source span from the first to the last token of
    the chunk, so boundaries never split a token and token counts sum to
    the document's total.
    """
    tokenizer = get_tokenizer(cfg.tokenizer_id)
    tokens = tokenizer.split(doc.text)
    if not tokens:
        raise EmptyDocument("empty input")

    nodes: list[IPNode] = []
    size = cfg.chunk_size_tokens
    for start in range(0, len(tokens), size):
        group = tokens[start : start + size]
        text = doc.text[group[0].start : group[-1].end]
        nodes.append(
            IPNode(
                id=id_start + len(nodes),
                level=1,
                text=text,
                token_count=len(group),
                source=NODE_SOURCE_CHUNK,
            )
        )
    return nodes


def batch_nodes(nodes: list[IPNode], s: int) -> list[list[IPNode]]:
    """Pack ordered nodes into batches of at most ``s`` total tokens.

    Order-preserving partition: concatenating the batches reproduces the
    input. A batch only exceeds ``s`` when it holds a single node whose own
    token count is above the threshold.
    """
    if not nodes:
        raise ValueError("batch_nodes requires a non-empty node list")

    batches: list[list[IPNode]] = []
    current: list[IPNode] = []
    current_tokens = 0
    for node in nodes:
        if node.token_count > s and not current:
            logger.warning(
                "node %d alone exceeds batch threshold (%d tokens > s=%d); emitting oversize batch",
                node.id,
                node.token_count,
                s,
            )
            batches.append([node])
            continue
        if current and current_tokens + node.token_count > s:
            batches.append(current)
            current = []
            current_tokens = 0
        if node.token_count > s:
            # previous batch just closed; oversize node still goes alone
            logger.warning(
                "node %d alone exceeds batch threshold (%d tokens > s=%d); emitting oversize batch",
                node.id,
                node.token_count,
                s,
            )
            batches.append([node])
            continue
        current.append(node)
        current_tokens += node.token_count
    if current:
        batches.append(current)
    return batches


# -- corpus I/O ----------------------------------------------------------


def load_text_document(path: str | os.PathLike, doc_id: str | None = None) -> Document:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if doc_id is None:
        doc_id = os.path.splitext(os.path.basename(str(path)))[0]
    return Document(doc_id=doc_id, text=text)


def load_jsonl_corpus(path: str | os.PathLike) -> dict[str, Document]:
    """Load a JSONL corpus of ``{"doc_id": ..., "text": ...}`` records."""
    docs: dict[str, Document] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                doc = Document(doc_id=str(record["doc_id"]), text=str(record["text"]))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad corpus record: {exc}") from exc
            if doc.doc_id in docs:
                raise ValueError(f"{path}:{lineno}: duplicate doc_id {doc.doc_id!r}")
            docs[doc.doc_id] = doc
    return docs
