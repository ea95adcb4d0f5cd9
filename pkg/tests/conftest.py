"""Shared fixtures: tiny corpora, query sets, and seeded RNG helpers."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from prprank.types import Corpus, Document, Qrels, Query, QuerySet, RunList


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260817)


@pytest.fixture
def small_corpus() -> Corpus:
    return Corpus(
        [
            Document("d1", "the cat sat on the mat"),
            Document("d2", "a dog chased the cat"),
            Document("d3", "quantum entanglement of photon pairs"),
            Document("d4", "the mat was red and the cat was black"),
            Document("d5", "dogs and cats living together"),
        ]
    )


@pytest.fixture
def small_queries() -> QuerySet:
    return QuerySet(
        [
            Query("q1", "cat on mat"),
            Query("q2", "photon entanglement"),
        ]
    )


@pytest.fixture
def small_qrels() -> Qrels:
    return Qrels.from_pairs(
        [
            ("q1", "d1", 3),
            ("q1", "d4", 2),
            ("q1", "d2", 1),
            ("q2", "d3", 3),
        ]
    )


@pytest.fixture
def small_run() -> RunList:
    return RunList.from_scores(
        {
            "q1": [("d1", 9.0), ("d2", 8.0), ("d3", 7.0), ("d4", 6.0), ("d5", 5.0)],
            "q2": [("d3", 4.0), ("d1", 3.0)],
        }
    )


def write_jsonl_corpus(path: Path, docs: list[tuple[str, str]]) -> Path:
    path.write_text(
        "\n".join(json.dumps({"id": i, "text": t}) for i, t in docs) + "\n",
        encoding="utf-8",
    )
    return path


def write_tsv_queries(path: Path, queries: list[tuple[str, str]]) -> Path:
    path.write_text(
        "\n".join(f"{i}\t{t}" for i, t in queries) + "\n", encoding="utf-8"
    )
    return path


def write_qrels_file(path: Path, rows: list[tuple[str, str, int]]) -> Path:
    path.write_text(
        "\n".join(f"{q} 0 {d} {g}" for q, d, g in rows) + "\n", encoding="utf-8"
    )
    return path


def write_run_file(path: Path, rows: list[tuple[str, str, int, float]], tag: str = "t") -> Path:
    path.write_text(
        "\n".join(f"{q} Q0 {d} {r} {s} {tag}" for q, d, r, s in rows) + "\n",
        encoding="utf-8",
    )
    return path
