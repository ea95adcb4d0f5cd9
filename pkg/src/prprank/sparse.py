"""Inverted-index BM25 retrieval over in-memory corpora.

The analyzer (lowercase, Unicode word characters, no stemming, no stopword
removal) is shared by every lexical component in the package: index
construction, query scoring, and term-set similarity. Keeping a single
analyzer is what makes lexical query-to-query similarity comparable with
retrieval behavior.

Scoring uses the standard BM25 formula with the +1-inside-the-log idf
variant, which keeps idf strictly positive even for terms that appear in
more than half of the collection:

    idf(t)     = ln((N - df + 0.5) / (df + 0.5) + 1)
    score(q,d) = sum_t idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len_d / avg_len))
"""

from __future__ import annotations

import hashlib
import math
import pickle
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError
from .types import Corpus, QuerySet, ScoredHit

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_INDEX_MAGIC = b"PRPIDX"
_INDEX_VERSION = 1


def analyze(text: str) -> list[str]:
    """Lowercase and split into Unicode word-character runs (no underscore)."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class InvertedIndex:
    """Term -> postings map with the document statistics BM25 needs."""

    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    k1: float = 1.2
    b: float = 0.75
    avg_doc_length: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.doc_lengths:
            raise ValidationError("cannot build an index over zero items")
        if self.k1 < 0:
            raise ValidationError(f"k1 must be non-negative, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValidationError(f"b must be in [0, 1], got {self.b}")
        self.avg_doc_length = sum(self.doc_lengths.values()) / len(self.doc_lengths)

    @property
    def n_items(self) -> int:
        return len(self.doc_lengths)

    def document_frequency(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        df = self.document_frequency(term)
        n = self.n_items
        return math.log((n - df + 0.5) / (df + 0.5) + 1.0)

    def digest(self) -> str:
        """Content hash over a canonical serialization of the statistics."""
        h = hashlib.sha256()
        h.update(f"k1={self.k1!r};b={self.b!r};n={self.n_items}".encode())
        for term in sorted(self.postings):
            h.update(term.encode("utf-8"))
            h.update(b"\x00")
            for item_id, tf in sorted(self.postings[term]):
                h.update(f"{item_id}\x01{tf}\x02".encode("utf-8"))
        for item_id in sorted(self.doc_lengths):
            h.update(f"{item_id}\x03{self.doc_lengths[item_id]}".encode("utf-8"))
        return h.hexdigest()

    def save(self, path: str | Path) -> None:
        payload = {
            "postings": self.postings,
            "doc_lengths": self.doc_lengths,
            "k1": self.k1,
            "b": self.b,
        }
        with open(path, "wb") as f:
            f.write(_INDEX_MAGIC)
            f.write(bytes([_INDEX_VERSION]))
            pickle.dump(payload, f, protocol=pickle.HIGHEST_PROTOCOL)

    @classmethod
    def load(cls, path: str | Path) -> "InvertedIndex":
        with open(path, "rb") as f:
            magic = f.read(len(_INDEX_MAGIC))
            if magic != _INDEX_MAGIC:
                raise ValidationError(f"{path}: not an index file")
            version = f.read(1)
            if not version or version[0] != _INDEX_VERSION:
                raise ValidationError(f"{path}: unsupported index version")
            payload = pickle.load(f)
        return cls(
            postings=payload["postings"],
            doc_lengths=payload["doc_lengths"],
            k1=payload["k1"],
            b=payload["b"],
        )


def build_index(
    items: Corpus | QuerySet | Iterable[tuple[str, str]],
    *,
    k1: float = 1.2,
    b: float = 0.75,
) -> InvertedIndex:
    """Index any (id, text) collection: documents or training queries."""
    if isinstance(items, (Corpus, QuerySet)):
        pairs: Iterable[tuple[str, str]] = items.items()
    else:
        pairs = items
    postings: dict[str, dict[str, int]] = {}
    doc_lengths: dict[str, int] = {}
    for item_id, text in pairs:
        if item_id in doc_lengths:
            raise ValidationError(f"duplicate item id {item_id!r}")
        terms = analyze(text)
        doc_lengths[item_id] = len(terms)
        counts: dict[str, int] = {}
        for term in terms:
            counts[term] = counts.get(term, 0) + 1
        for term, tf in counts.items():
            postings.setdefault(term, {})[item_id] = tf
    if not doc_lengths:
        raise ValidationError("cannot build an index over zero items")
    return InvertedIndex(
        postings={t: sorted(m.items()) for t, m in postings.items()},
        doc_lengths=doc_lengths,
        k1=k1,
        b=b,
    )


def _unique_terms(query_text: str) -> list[str]:
    """Query terms deduplicated, keeping first-appearance order."""
    seen: set[str] = set()
    out: list[str] = []
    for term in analyze(query_text):
        if term not in seen:
            seen.add(term)
            out.append(term)
    return out


def bm25_search(index: InvertedIndex, query_text: str, k: int) -> list[ScoredHit]:
    """Exhaustively score all matching items and return the top k.

    Each distinct query term contributes once (term presence, not query
    term frequency). Accumulation walks terms in first-appearance order so
    floating-point sums are reproducible. Ties sort by item id ascending;
    only items that match at least one term are returned.
    """
    if k < 0:
        raise ValidationError(f"k must be non-negative, got {k}")
    scores: dict[str, float] = {}
    k1, b = index.k1, index.b
    avg = index.avg_doc_length
    for term in _unique_terms(query_text):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for item_id, tf in plist:
            dl = index.doc_lengths[item_id]
            denom = tf + k1 * (1.0 - b + b * dl / avg)
            contrib = idf * tf * (k1 + 1.0) / denom
            scores[item_id] = scores.get(item_id, 0.0) + contrib
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [
        ScoredHit(item_id=item_id, score=score, rank=i + 1)
        for i, (item_id, score) in enumerate(ordered[:k])
    ]


def rank_window(
    index: InvertedIndex, query_text: str, lo: int, hi: int
) -> list[ScoredHit]:
    """Hits whose BM25 rank falls in (lo, hi], keeping their global ranks.

    Used to harvest hard negatives: items lexically close enough to rank,
    but far enough down to be plausibly non-relevant. Fewer than ``hi``
    matches simply yields a shorter (possibly empty) window.
    """
    if lo < 0:
        raise ValidationError(f"window lower bound must be non-negative, got {lo}")
    if hi <= lo:
        raise ValidationError(f"window must satisfy lo < hi, got ({lo}, {hi}]")
    return bm25_search(index, query_text, hi)[lo:]


def term_set_similarity(text_a: str, text_b: str) -> float:
    """Jaccard similarity of the analyzed term sets of two texts."""
    a, b = set(analyze(text_a)), set(analyze(text_b))
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


def mean_term_overlap(probe_text: str, neighbor_texts: Sequence[str]) -> float:
    """Mean Jaccard term-set similarity between a probe and its neighbors."""
    if not neighbor_texts:
        return 0.0
    return sum(term_set_similarity(probe_text, t) for t in neighbor_texts) / len(
        neighbor_texts
    )


def neighborhood_jaccard(
    probe_text: str, neighbor_texts: Mapping[str, str] | Sequence[str]
) -> float:
    """Alias accepting either a mapping of id -> text or a text sequence."""
    if isinstance(neighbor_texts, Mapping):
        texts: Sequence[str] = list(neighbor_texts.values())
    else:
        texts = neighbor_texts
    return mean_term_overlap(probe_text, texts)
