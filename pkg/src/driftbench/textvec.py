"""Tokenization, TF-IDF vectorization, and cosine similarity on sparse vectors."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

_CHUNKS = re.compile(r"[0-9A-Za-z]+")
# boundary before an upper-case letter that follows a lower-case letter or digit,
# or before the last upper-case letter of an acronym run ("HTTPServer" -> HTTP|Server)
_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")


def tokenize(text: str) -> list[str]:
    """Split on non-alphanumeric runs, then on camelCase boundaries; lowercase everything."""
    tokens = []
    for chunk in _CHUNKS.findall(text):
        for piece in _CAMEL_BOUNDARY.split(chunk):
            if piece:
                tokens.append(piece.lower())
    return tokens


class SparseVector:
    """Index -> weight map with a cached L2 norm; zero weights are never stored."""

    __slots__ = ("entries", "norm")

    def __init__(self, entries: dict[int, float] | None = None):
        self.entries = {i: float(w) for i, w in (entries or {}).items() if w != 0.0}
        self.norm = math.sqrt(math.fsum(w * w for w in self.entries.values()))

    def dot(self, other: "SparseVector") -> float:
        a, b = self.entries, other.entries
        if len(b) < len(a):
            a, b = b, a
        return math.fsum(w * b[i] for i, w in a.items() if i in b)

    def scale(self, factor: float) -> "SparseVector":
        return SparseVector({i: w * factor for i, w in self.entries.items()})

    def unit(self) -> "SparseVector":
        """L2-normalized copy; the zero vector stays zero."""
        if self.norm == 0.0:
            return SparseVector()
        return self.scale(1.0 / self.norm)

    def __eq__(self, other):
        return isinstance(other, SparseVector) and self.entries == other.entries

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        return f"SparseVector({self.entries!r})"


@dataclass
class TfidfModel:
    """Vocabulary, per-token document frequencies, and corpus size."""

    vocabulary: dict[str, int]
    doc_freq: list[int]
    corpus_size: int


def fit_tfidf(docs: list[list[str]]) -> TfidfModel:
    """Fit vocabulary and document frequencies on tokenized documents.

    Vocabulary indices follow first occurrence across the corpus, which keeps
    the fit reproducible for a given document order.
    """
    if not docs:
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    vocabulary: dict[str, int] = {}
    doc_freq: list[int] = []
    for doc in docs:
        seen: set[str] = set()
        for token in doc:
            if token in seen:
                continue
            seen.add(token)
            idx = vocabulary.get(token)
            if idx is None:
                vocabulary[token] = len(doc_freq)
                doc_freq.append(1)
            else:
                doc_freq[idx] += 1
    return TfidfModel(vocabulary, doc_freq, len(docs))


def transform(model: TfidfModel, doc: list[str]) -> SparseVector:
    """TF-IDF weights count(t) * (ln((1 + N) / (1 + df(t))) + 1), L2-normalized.

    Tokens outside the fitted vocabulary are ignored; a document with no known
    tokens maps to the zero vector.
    """
    counts: dict[int, int] = {}
    for token in doc:
        idx = model.vocabulary.get(token)
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1
    n = model.corpus_size
    weights = {
        idx: c * (math.log((1.0 + n) / (1.0 + model.doc_freq[idx])) + 1.0)
        for idx, c in counts.items()
    }
    return SparseVector(weights).unit()


def dataset_vector(model: TfidfModel, samples) -> SparseVector:
    """Mean of the samples' unit TF-IDF vectors, re-normalized to unit length."""
    samples = list(samples)
    if not samples:
        raise ValueError("dataset_vector needs at least one sample")
    acc: dict[int, float] = {}
    for sample in samples:
        vec = transform(model, tokenize(sample.text))
        for i, w in vec.entries.items():
            acc[i] = acc.get(i, 0.0) + w
    scale = 1.0 / len(samples)
    return SparseVector({i: w * scale for i, w in acc.items()}).unit()


def cosine(a: SparseVector, b: SparseVector) -> float:
    """Cosine similarity; zero whenever either vector has zero norm."""
    if a.norm == 0.0 or b.norm == 0.0:
        return 0.0
    return a.dot(b) / (a.norm * b.norm)
