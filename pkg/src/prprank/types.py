"""Core domain types: documents, queries, relevance judgments, ranked runs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .errors import ValidationError


@dataclass(frozen=True)
class Document:
    """A corpus item. ``text`` may be empty (degenerate but legal)."""

    doc_id: str
    text: str

    def __post_init__(self):
        if not self.doc_id:
            raise ValidationError("document id must be non-empty")


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str

    def __post_init__(self):
        if not self.query_id:
            raise ValidationError("query id must be non-empty")


@dataclass(frozen=True)
class ScoredHit:
    """One search result: ranks start at 1, scores non-increasing with rank."""

    item_id: str
    score: float
    rank: int


class Corpus:
    """Immutable document store keyed by doc_id."""

    def __init__(self, documents: Iterable[Document]):
        self._docs: dict[str, Document] = {}
        for doc in documents:
            if doc.doc_id in self._docs:
                raise ValidationError(f"duplicate doc_id {doc.doc_id!r}")
            self._docs[doc.doc_id] = doc

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def __getitem__(self, doc_id: str) -> Document:
        return self._docs[doc_id]

    def __iter__(self) -> Iterator[Document]:
        return iter(self._docs.values())

    def ids(self) -> list[str]:
        return list(self._docs)

    def items(self) -> Iterator[tuple[str, str]]:
        """Yield (item_id, text) pairs, in insertion order."""
        for doc in self._docs.values():
            yield doc.doc_id, doc.text


class QuerySet:
    """Immutable query store keyed by query_id."""

    def __init__(self, queries: Iterable[Query]):
        self._queries: dict[str, Query] = {}
        for query in queries:
            if query.query_id in self._queries:
                raise ValidationError(f"duplicate query_id {query.query_id!r}")
            self._queries[query.query_id] = query

    def __len__(self) -> int:
        return len(self._queries)

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._queries

    def __getitem__(self, query_id: str) -> Query:
        return self._queries[query_id]

    def __iter__(self) -> Iterator[Query]:
        return iter(self._queries.values())

    def ids(self) -> list[str]:
        return list(self._queries)

    def items(self) -> Iterator[tuple[str, str]]:
        """Yield (item_id, text) pairs, in insertion order."""
        for query in self._queries.values():
            yield query.query_id, query.text


class Qrels:
    """Graded relevance judgments: (query_id, doc_id) -> grade >= 0.

    Absent pairs mean grade 0.
    """

    def __init__(self, grades: Mapping[str, Mapping[str, int]]):
        self._grades: dict[str, dict[str, int]] = {}
        for query_id, doc_grades in grades.items():
            for doc_id, grade in doc_grades.items():
                self._add(query_id, doc_id, grade)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str, int]]) -> "Qrels":
        qrels = cls({})
        for query_id, doc_id, grade in pairs:
            qrels._add(query_id, doc_id, grade)
        return qrels

    def _add(self, query_id: str, doc_id: str, grade: int) -> None:
        if grade < 0:
            raise ValidationError(
                f"negative grade {grade} for ({query_id!r}, {doc_id!r})"
            )
        per_query = self._grades.setdefault(query_id, {})
        if doc_id in per_query:
            raise ValidationError(f"duplicate judgment for ({query_id!r}, {doc_id!r})")
        per_query[doc_id] = grade

    def grade(self, query_id: str, doc_id: str) -> int:
        return self._grades.get(query_id, {}).get(doc_id, 0)

    def judged(self, query_id: str) -> dict[str, int]:
        """All judged (doc_id, grade) pairs for a query, grade 0 included."""
        return dict(self._grades.get(query_id, {}))

    def relevant_ids(self, query_id: str, threshold: int = 1) -> list[str]:
        """Doc ids with grade >= threshold, sorted for determinism."""
        per_query = self._grades.get(query_id, {})
        return sorted(d for d, g in per_query.items() if g >= threshold)

    def query_ids(self) -> list[str]:
        return list(self._grades)

    def __len__(self) -> int:
        return sum(len(v) for v in self._grades.values())


@dataclass(frozen=True)
class RunEntry:
    doc_id: str
    score: float
    rank: int


class RunList:
    """Per-query ranked lists of (doc_id, score, rank).

    Invariants enforced at construction: ranks contiguous from 1, scores
    non-increasing with rank, no duplicate doc_id within a query.
    """

    def __init__(self, per_query: Mapping[str, Iterable[RunEntry]]):
        self._per_query: dict[str, list[RunEntry]] = {}
        for query_id, entries in per_query.items():
            entries = list(entries)
            if not entries:
                raise ValidationError(f"empty ranking for query {query_id!r}")
            seen: set[str] = set()
            for i, entry in enumerate(entries):
                if entry.rank != i + 1:
                    raise ValidationError(
                        f"query {query_id!r}: rank {entry.rank} at position {i + 1}"
                    )
                if not math.isfinite(entry.score):
                    raise ValidationError(
                        f"query {query_id!r}: non-finite score for {entry.doc_id!r}"
                    )
                if i > 0 and entry.score > entries[i - 1].score:
                    raise ValidationError(
                        f"query {query_id!r}: score increases at rank {entry.rank}"
                    )
                if entry.doc_id in seen:
                    raise ValidationError(
                        f"query {query_id!r}: duplicate doc_id {entry.doc_id!r}"
                    )
                seen.add(entry.doc_id)
            self._per_query[query_id] = entries

    @classmethod
    def from_scores(cls, scores: Mapping[str, Iterable[tuple[str, float]]]) -> "RunList":
        """Build from unordered (doc_id, score) pairs.

        Sorts by score descending, ties broken by doc_id ascending, and
        renumbers ranks from 1.
        """
        per_query: dict[str, list[RunEntry]] = {}
        for query_id, pairs in scores.items():
            ordered = sorted(pairs, key=lambda p: (-p[1], p[0]))
            per_query[query_id] = [
                RunEntry(doc_id, float(score), i + 1)
                for i, (doc_id, score) in enumerate(ordered)
            ]
        return cls(per_query)

    @classmethod
    def from_ordered(cls, ordered: Mapping[str, Iterable[tuple[str, float]]]) -> "RunList":
        """Build from already-ordered (doc_id, score) pairs, preserving order."""
        per_query = {
            query_id: [
                RunEntry(doc_id, float(score), i + 1)
                for i, (doc_id, score) in enumerate(pairs)
            ]
            for query_id, pairs in ordered.items()
        }
        return cls(per_query)

    def query_ids(self) -> list[str]:
        return list(self._per_query)

    def entries(self, query_id: str) -> list[RunEntry]:
        if query_id not in self._per_query:
            raise KeyError(f"query {query_id!r} not in run")
        return list(self._per_query[query_id])

    def doc_ids(self, query_id: str) -> list[str]:
        return [e.doc_id for e in self.entries(query_id)]

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._per_query

    def __len__(self) -> int:
        return len(self._per_query)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RunList):
            return NotImplemented
        return self._per_query == other._per_query

    def __repr__(self) -> str:
        n_entries = sum(len(v) for v in self._per_query.values())
        return f"RunList({len(self._per_query)} queries, {n_entries} entries)"
