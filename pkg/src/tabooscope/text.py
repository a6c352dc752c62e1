"""Tokenization, stop-word removal, and n-gram extraction.

The same normalization is applied to dictionary definitions and to article
titles so that titles and induced n-grams live in the same token space.
"""

import re

# Maximal runs of letters. Splitting on every non-alphabetic character means
# digit-bearing tokens cannot survive tokenization.
_TOKEN_RE = re.compile(r"[^\W\d_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it on every non-alphabetic character."""
    return _TOKEN_RE.findall(text.lower())


def normalize_text(text: str, stopwords: frozenset[str]) -> list[str]:
    """Tokenize ``text`` and drop stop words, preserving token order.

    An empty result is valid: some inputs consist entirely of stop words.
    """
    return [tok for tok in tokenize(text) if tok not in stopwords]


def extract_ngrams(tokens: list[str], ngram_range: tuple[int, int] = (1, 3)) -> list[str]:
    """Return all contiguous n-grams of ``tokens`` as space-joined strings.

    n-grams are formed over the token sequence as given, i.e. after stop-word
    removal, so words that were adjacent only across a removed stop word do
    form an n-gram.
    """
    lo, hi = ngram_range
    if lo < 1 or hi < lo:
        raise ValueError(f"bad ngram_range {ngram_range!r}: need 1 <= lo <= hi")
    grams = []
    for n in range(lo, hi + 1):
        for i in range(len(tokens) - n + 1):
            grams.append(" ".join(tokens[i:i + n]))
    return grams
