"""Tokenization and title canonicalization shared by indexing, matching and scoring."""

from __future__ import annotations

import re
import unicodedata

_WORD_RE = re.compile(r"\w+", re.UNICODE)

WH_WORDS = frozenset(
    "what which who whom whose where when why how".split()
)
NEGATION_WORDS = frozenset(
    "not no never none nobody nothing neither nor cannot".split()
)
# \w+ splits "isn't" into isn/t, so contracted negations are counted on raw text.
_NEG_RE = re.compile(r"\b(not|no|never|none|nobody|nothing|neither|nor|cannot)\b|n't", re.IGNORECASE)


def count_negations(text: str) -> int:
    return len(_NEG_RE.findall(text))


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens at Unicode word boundaries. No stemming, no stopwords."""
    return _WORD_RE.findall(text.lower())


def bigrams(tokens: list[str]) -> list[tuple[str, str]]:
    return list(zip(tokens, tokens[1:]))


def canonicalize_title(title: str) -> str:
    """Canonical document title: NFC, underscores folded to spaces, whitespace collapsed.

    Idempotent; parenthetical disambiguators are retained.
    """
    folded = unicodedata.normalize("NFC", title).replace("_", " ")
    return " ".join(folded.split())


def contains_subsequence(haystack: list[str], needle: list[str]) -> bool:
    """True if `needle` occurs as a contiguous run inside `haystack`."""
    if not needle or len(needle) > len(haystack):
        return False
    first = needle[0]
    n = len(needle)
    for i, tok in enumerate(haystack[: len(haystack) - n + 1]):
        if tok == first and haystack[i : i + n] == needle:
            return True
    return False
