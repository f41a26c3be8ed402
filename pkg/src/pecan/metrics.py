"""Answer-quality metrics and the compute-cost estimate.

Text metrics follow the usual reading-comprehension convention: normalize
both sides (lowercase, drop punctuation, collapse whitespace), compare
tokens, and take the best score over the reference answers. English
articles are additionally dropped for token F1 but kept for ROUGE-L,
matching the reference scorers for each. No stemming is applied.
"""

from __future__ import annotations

import re
import string
from collections import Counter
from collections.abc import Iterable

DEFAULT_PARAMS = 8.03e9

_ARTICLES_RE = re.compile(r"\b(a|an|the)\b")


def normalize_answer(s: str) -> str:
    s = s.lower()
    s = "".join(ch for ch in s if ch not in string.punctuation)
    s = _ARTICLES_RE.sub(" ", s)
    return " ".join(s.split())


def _tokens(s: str) -> list[str]:
    return normalize_answer(s).split()


def _rouge_tokens(s: str) -> list[str]:
    s = "".join(ch for ch in s.lower() if ch not in string.punctuation)
    return s.split()


def token_f1(prediction: str, references: Iterable[str]) -> float:
    """Token-multiset F1, maximized over references."""
    pred = _tokens(prediction)
    best = 0.0
    for ref in references:
        gold = _tokens(ref)
        if not pred or not gold:
            best = max(best, float(pred == gold))
            continue
        overlap = sum((Counter(pred) & Counter(gold)).values())
        if overlap == 0:
            continue
        precision = overlap / len(pred)
        recall = overlap / len(gold)
        best = max(best, 2 * precision * recall / (precision + recall))
    return best


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(prediction: str, references: Iterable[str]) -> float:
    """LCS-based F-measure with equal precision/recall weighting.

    Articles stay in: ROUGE tooling tokenizes plainly, unlike the QA F1
    convention.
    """
    pred = _rouge_tokens(prediction)
    best = 0.0
    for ref in references:
        gold = _rouge_tokens(ref)
        lcs = _lcs_length(pred, gold)
        if lcs == 0:
            continue
        precision = lcs / len(pred)
        recall = lcs / len(gold)
        best = max(best, 2 * precision * recall / (precision + recall))
    return best


def flops_estimate(new_tokens, params: float = DEFAULT_PARAMS) -> float:
    """Decoder cost in TFLOPs: 2 * params * tokens, ignoring attention terms.

    Counts only NEW tokens; cached context is free by construction.
    Accepts a total, an iterable of per-step counts, or any ledger object
    exposing ``total_new_tokens`` (the estimate is additive over steps).
    """
    if hasattr(new_tokens, "total_new_tokens"):
        total = int(new_tokens.total_new_tokens)
    elif isinstance(new_tokens, (int, float)):
        total = int(new_tokens)
    else:
        total = sum(int(t) for t in new_tokens)
    if total < 0:
        raise ValueError("new_tokens must be >= 0")
    if params <= 0:
        raise ValueError("params must be > 0")
    return 2.0 * params * total / 1e12
