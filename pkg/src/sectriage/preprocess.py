"""Text preprocessing: lowercasing, token extraction, stopword removal,
stemming, and vocabulary construction.

The pipeline is tokenize -> remove_stopwords -> stem, applied in that
order: stopwords are matched on surface tokens because stemmed stopwords
would no longer match standard lists.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .stemmer import stem

__all__ = [
    "TokenSequence",
    "Vocabulary",
    "tokenize",
    "load_stopwords",
    "remove_stopwords",
    "stem",
    "preprocess_document",
    "preprocess_documents",
    "build_vocabulary",
    "write_token_cache",
    "read_token_cache",
]

# Letter runs; \w minus digits and underscore. Tokens containing stray
# non-alpha word characters (e.g. Roman-numeral codepoints) are re-split
# in tokenize().
_LETTER_RUN = re.compile(r"[^\W\d_]+", re.UNICODE)


@dataclass
class TokenSequence:
    """Ordered stems for one document."""

    doc_id: str
    tokens: list[str]


class Vocabulary:
    """Dense 0-based token index with per-token counts.

    Indices are assigned by descending count, ties broken
    lexicographically, so the mapping is stable across runs.
    """

    def __init__(self, tokens_in_order: Sequence[str], counts: dict[str, int],
                 min_count: int):
        self.index_to_token: list[str] = list(tokens_in_order)
        self.token_to_index: dict[str, int] = {
            tok: i for i, tok in enumerate(self.index_to_token)
        }
        self.counts = dict(counts)
        self.min_count = min_count

    def __len__(self) -> int:
        return len(self.index_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.index_to_token == other.index_to_token

    def index(self, token: str) -> int:
        return self.token_to_index[token]

    def token(self, index: int) -> str:
        return self.index_to_token[index]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        """Map tokens to indices, silently dropping out-of-vocabulary ones."""
        t2i = self.token_to_index
        return [t2i[t] for t in tokens if t in t2i]


def tokenize(text: str) -> list[str]:
    """Split lowercased text into alphabetic tokens.

    Digits, punctuation, and symbol characters all act as separators;
    every returned token consists of letters only.
    """
    tokens: list[str] = []
    for run in _LETTER_RUN.findall(text.lower()):
        if run.isalpha():
            tokens.append(run)
        else:
            # Rare: the run contains non-letter word characters.
            buf: list[str] = []
            for ch in run:
                if ch.isalpha():
                    buf.append(ch)
                elif buf:
                    tokens.append("".join(buf))
                    buf.clear()
            if buf:
                tokens.append("".join(buf))
    return tokens


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a stopword file (one token per line, '#' comments allowed).

    With no path, the list shipped with the package is used.
    """
    if path is None:
        text = (
            resources.files("sectriage") / "data" / "stopwords_en.txt"
        ).read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def remove_stopwords(tokens: Sequence[str], stoplist: frozenset[str] | set[str]) -> list[str]:
    """Order-preserving filter removing tokens found in the stoplist."""
    return [t for t in tokens if t not in stoplist]


def preprocess_document(doc, stoplist: frozenset[str] | set[str]) -> TokenSequence:
    """Full pipeline for one document: tokenize, drop stopwords, stem.

    May yield an empty token list; the caller decides how to handle that.
    """
    surface = remove_stopwords(tokenize(doc.text), stoplist)
    return TokenSequence(doc_id=doc.id, tokens=[stem(t) for t in surface])


def preprocess_documents(docs: Iterable, stoplist: frozenset[str] | set[str]) -> list[TokenSequence]:
    return [preprocess_document(d, stoplist) for d in docs]


def build_vocabulary(corpus: Sequence[TokenSequence | Sequence[str]],
                     min_count: int = 1) -> Vocabulary:
    """Tally token counts over the corpus and assign dense indices.

    Tokens occurring fewer than min_count times are dropped. Indices go
    by descending count, ties by lexicographic order.
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    sequences = list(corpus)
    if not sequences:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    for seq in sequences:
        tokens = seq.tokens if isinstance(seq, TokenSequence) else seq
        counts.update(tokens)
    retained = {t: c for t, c in counts.items() if c >= min_count}
    ordered = sorted(retained, key=lambda t: (-retained[t], t))
    return Vocabulary(ordered, retained, min_count)


def write_token_cache(sequences: Iterable[TokenSequence], path: str | Path) -> None:
    """Write preprocessed documents as JSONL {"id": ..., "tokens": [...]}."""
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            fh.write(json.dumps({"id": seq.doc_id, "tokens": seq.tokens},
                                ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def read_token_cache(path: str | Path) -> list[TokenSequence]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: invalid JSON on line {lineno}: {exc}") from exc
            if "id" not in rec or "tokens" not in rec:
                raise ValueError(f"{path}: line {lineno} missing 'id' or 'tokens'")
            out.append(TokenSequence(doc_id=rec["id"], tokens=list(rec["tokens"])))
    return out
