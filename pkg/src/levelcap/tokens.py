"""Shared word-tokenization rule used by budget checks and all text metrics.

A token is a maximal non-whitespace run, lowercased, with leading and
trailing punctuation stripped. Tokens that are pure punctuation vanish.
Budgets and metrics must count words identically, so both import from here.
"""

from __future__ import annotations

import unicodedata


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and _is_punct(token[start]):
        start += 1
    while end > start and _is_punct(token[end - 1]):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Split on Unicode whitespace, lowercase, strip edge punctuation."""
    out = []
    for raw in text.split():
        tok = _strip_punct(raw.lower())
        if tok:
            out.append(tok)
    return out


def word_count(text: str) -> int:
    return len(tokenize(text))
