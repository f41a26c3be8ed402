"""Pluggable tokenization behind a small handle type.

The engine never assumes a specific model tokenizer: everything that needs
token counts or token boundaries goes through a :class:`TokenizerHandle`.
The bundled default is a deterministic regex tokenizer (words and single
punctuation marks) so builds and tests never require model assets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

# Words (incl. digits/underscore) or a single non-space symbol. Matches are
# context-free: tokenizing any substring that starts and ends on token
# boundaries yields the same tokens, which chunking relies on.
_TOKEN_RE = re.compile(r"[A-Za-z0-9_]+|[^\sA-Za-z0-9_]")

WHITESPACE_PUNCT_ID = "whitespace_punct_v1"


@dataclass(frozen=True)
class Token:
    """One token surface form with its half-open span in the source text."""

    text: str
    start: int
    end: int


class TokenizerHandle:
    """A named tokenizer exposing counting and offset-preserving splitting."""

    def __init__(self, tokenizer_id: str, split_fn: Callable[[str], list[Token]]):
        self.tokenizer_id = tokenizer_id
        self._split_fn = split_fn

    def split(self, text: str) -> list[Token]:
        return self._split_fn(text)

    def count(self, text: str) -> int:
        return len(self._split_fn(text))

    def wire_tokens(self, text: str) -> list[str]:
        """Split ``text`` into surface chunks that concatenate back to it.

        Each chunk holds exactly one token plus the whitespace that precedes
        it; trailing whitespace is appended to the last chunk. This is the
        shape token lists take on the provider wire, where
        ``"".join(tokens) == generated_text`` must hold.
        """
        tokens = self._split_fn(text)
        if not tokens:
            return []
        out: list[str] = []
        prev_end = 0
        for tok in tokens:
            out.append(text[prev_end : tok.end])
            prev_end = tok.end
        if prev_end < len(text):
            out[-1] += text[prev_end:]
        return out


def _regex_split(text: str) -> list[Token]:
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


_REGISTRY: dict[str, TokenizerHandle] = {
    WHITESPACE_PUNCT_ID: TokenizerHandle(WHITESPACE_PUNCT_ID, _regex_split),
}


def get_tokenizer(tokenizer_id: str) -> TokenizerHandle:
    try:
        return _REGISTRY[tokenizer_id]
    except KeyError:
        raise KeyError(f"unknown tokenizer_id: {tokenizer_id!r}") from None


def register_tokenizer(handle: TokenizerHandle) -> None:
    _REGISTRY[handle.tokenizer_id] = handle
