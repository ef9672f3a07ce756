"""Length-aware distinct-n, verb variety and corpus word counts."""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from plotnode.errors import EmptyCorpus, EmptyText, TextTooShort

DEFAULT_NS = (2, 3, 4, 5)


@dataclass(frozen=True)
class TokenizedText:
    tokens: tuple[str, ...]

    @property
    def word_count(self) -> int:
        return len(self.tokens)

    def ngrams(self, n: int) -> list[tuple[str, ...]]:
        return [self.tokens[i : i + n] for i in range(len(self.tokens) - n + 1)]


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and _is_punct(token[start]):
        start += 1
    while end > start and _is_punct(token[end - 1]):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> TokenizedText:
    """Whitespace split, edge punctuation stripped, lower-cased.

    Tokens made only of punctuation vanish. Inner punctuation stays, so
    "don't" and "well-known" are single tokens.
    """
    tokens = []
    for raw in text.split():
        tok = _strip_punct(raw).lower()
        if tok:
            tokens.append(tok)
    return TokenizedText(tuple(tokens))


TextLike = Union[str, TokenizedText, Sequence[str]]


def _as_tokens(text: TextLike) -> TokenizedText:
    if isinstance(text, TokenizedText):
        return text
    if isinstance(text, str):
        return tokenize(text)
    return TokenizedText(tuple(text))


def distinctl_n(text: TextLike, n: int, log_base: Optional[float] = None) -> float:
    """(unique n-grams / total n-grams) * (1 + log(word_count)).

    Natural log by default; pass ``log_base=10`` for the base-10 variant.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    tt = _as_tokens(text)
    wc = tt.word_count
    if wc == 0:
        raise EmptyText("text has no tokens")
    if wc < n:
        raise TextTooShort(f"{wc} tokens is fewer than n={n}")
    grams = tt.ngrams(n)
    ratio = len(set(grams)) / len(grams)
    length_term = math.log(wc) if log_base is None else math.log(wc, log_base)
    return ratio * (1.0 + length_term)


# --- verbs -----------------------------------------------------------------


def load_verb_lexicon(path: Optional[str | Path] = None) -> dict[str, str]:
    """Map verb form -> lemma. Lines are ``form [lemma]``; '#' starts a comment."""
    if path is None:
        text = (resources.files("plotnode") / "data" / "verbs.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    lexicon: dict[str, str] = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        form = parts[0].lower()
        lexicon[form] = parts[1].lower() if len(parts) > 1 else form
    return lexicon


def diverse_verbs(text: TextLike, verb_lexicon: Mapping[str, str] | Iterable[str]) -> float:
    """Distinct verb types over verb tokens; 1.0 when the text has no verbs.

    A mapping lexicon counts types by lemma; a plain collection counts
    surface forms.
    """
    if not isinstance(verb_lexicon, Mapping):
        verb_lexicon = {v.lower(): v.lower() for v in verb_lexicon}
    if not verb_lexicon:
        raise ValueError("verb lexicon is empty")
    tokens = _as_tokens(text).tokens
    verbs = [verb_lexicon[t] for t in tokens if t in verb_lexicon]
    if not verbs:
        return 1.0
    return len(set(verbs)) / len(verbs)


# --- corpus ------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusStats:
    avg_word_count: float
    counts: list[int]
    exact_mean: Fraction


def corpus_stats(corpus: Iterable[TextLike]) -> CorpusStats:
    counts = [_as_tokens(t).word_count for t in corpus]
    if not counts:
        raise EmptyCorpus("corpus has no texts")
    mean = Fraction(sum(counts), len(counts))
    return CorpusStats(float(mean), counts, mean)
