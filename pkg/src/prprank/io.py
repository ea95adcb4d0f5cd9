"""Readers and writers for the experiment file formats.

Formats:

- run file: ``qid Q0 docid rank score tag`` (6 whitespace-separated columns)
- qrels file: ``qid 0 docid grade`` (4 whitespace-separated columns)
- corpus file: JSONL, one ``{"id": ..., "text": ...}`` object per line, UTF-8
- query file: ``qid<TAB>query_text`` (one query per line)

All readers reject input that violates the type invariants instead of
silently repairing it, with one documented exception: ``read_trec_run``
re-sorts by score (ties broken by doc_id ascending) and renumbers ranks,
so inconsistent rank columns in upstream files are normalized.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ParseError, ValidationError
from .types import Corpus, Document, Qrels, Query, QuerySet, RunList


def _nonempty_lines(path: str | Path) -> Iterator[tuple[int, str]]:
    """Yield (line_no, line) skipping empty/whitespace-only lines."""
    with open(path, "r", encoding="utf-8") as f:
        for i, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            yield i, line


def read_trec_run(path: str | Path) -> RunList:
    """Read a 6-column run file into a RunList.

    Ranks are renumbered 1..n per query in descending score order (ties by
    doc_id ascending); the original rank and tag columns are discarded.
    """
    scores: dict[str, list[tuple[str, float]]] = {}
    seen: set[tuple[str, str]] = set()
    for line_no, line in _nonempty_lines(path):
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(path, line_no, f"expected 6 columns, got {len(parts)}")
        query_id, _, doc_id, rank_str, score_str, _ = parts
        try:
            int(rank_str)
        except ValueError:
            raise ParseError(path, line_no, f"invalid rank {rank_str!r}") from None
        try:
            score = float(score_str)
        except ValueError:
            raise ParseError(path, line_no, f"invalid score {score_str!r}") from None
        if (query_id, doc_id) in seen:
            raise ValidationError(
                f"{path}:{line_no}: duplicate document {doc_id!r} for query {query_id!r}"
            )
        seen.add((query_id, doc_id))
        scores.setdefault(query_id, []).append((doc_id, score))
    return RunList.from_scores(scores)


def write_trec_run(run: RunList, tag: str, path: str | Path) -> None:
    """Write a RunList as a 6-column run file.

    Queries are emitted in lexicographic qid order and scores with fixed
    6-decimal notation. The file is written atomically (temp file + rename)
    so a crash never leaves a truncated run behind.
    """
    lines = []
    for query_id in sorted(run.query_ids()):
        for entry in run.entries(query_id):
            lines.append(
                f"{query_id} Q0 {entry.doc_id} {entry.rank} {entry.score:.6f} {tag}\n"
            )
    _atomic_write(path, "".join(lines))


def _atomic_write(path: str | Path, content: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_qrels(path: str | Path) -> Qrels:
    """Read a 4-column qrels file (``qid 0 docid grade``)."""
    pairs: list[tuple[str, str, int]] = []
    seen: set[tuple[str, str]] = set()
    for line_no, line in _nonempty_lines(path):
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(path, line_no, f"expected 4 columns, got {len(parts)}")
        query_id, _, doc_id, grade_str = parts
        try:
            grade = int(grade_str)
        except ValueError:
            raise ParseError(path, line_no, f"invalid grade {grade_str!r}") from None
        if grade < 0:
            raise ValidationError(f"{path}:{line_no}: negative grade {grade}")
        if (query_id, doc_id) in seen:
            raise ValidationError(
                f"{path}:{line_no}: duplicate judgment for ({query_id!r}, {doc_id!r})"
            )
        seen.add((query_id, doc_id))
        pairs.append((query_id, doc_id, grade))
    return Qrels.from_pairs(pairs)


def read_jsonl_corpus(path: str | Path) -> Corpus:
    """Read a JSONL corpus of ``{"id": ..., "text": ...}`` objects."""
    return Corpus(_iter_jsonl_documents(path))


def _iter_jsonl_documents(path: str | Path) -> Iterable[Document]:
    for line_no, line in _nonempty_lines(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(path, line_no, f"invalid JSON: {e.msg}") from None
        if not isinstance(obj, dict):
            raise ParseError(path, line_no, "expected a JSON object")
        if "id" not in obj:
            raise ParseError(path, line_no, 'missing "id" key')
        if "text" not in obj:
            raise ParseError(path, line_no, 'missing "text" key')
        doc_id = obj["id"]
        if not isinstance(doc_id, str):
            doc_id = str(doc_id)
        text = obj["text"]
        if not isinstance(text, str):
            raise ParseError(path, line_no, '"text" must be a string')
        yield Document(doc_id, text)


def read_tsv_queries(path: str | Path) -> QuerySet:
    """Read a TSV query file (``qid<TAB>text``). Text may contain tabs."""
    queries: list[Query] = []
    for line_no, line in _nonempty_lines(path):
        if "\t" not in line:
            raise ParseError(path, line_no, "expected 'qid<TAB>text'")
        query_id, text = line.split("\t", 1)
        if not query_id:
            raise ParseError(path, line_no, "empty query id")
        queries.append(Query(query_id, text))
    return QuerySet(queries)
