"""End-to-end orchestration: neighborhoods, examples, reranking, provenance.

``rerank_all`` walks the evaluation queries in sorted id order, selects a
neighborhood and samples in-context examples for each (when shots > 0),
reranks its first-stage list, and collects a per-query provenance record.
One query failing does not abort the batch: the failure is recorded, the
query keeps its first-stage ordering, and the process exit status reports
partial failure. Determinism per query comes from per-query RNG streams,
so the output is identical however queries are scheduled or subset.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .backend import Backend, CachingBackend
from .dense import EmbeddingStore
from .errors import ComparisonError, PrpError, RenderError, ValidationError
from .icl import (
    IclExample,
    Neighborhood,
    SamplerConfig,
    Selector,
    sample_examples,
    select_neighborhood,
)
from .prompts import PromptTemplate
from .rerank import CallPolicy, rerank
from .sparse import InvertedIndex
from .types import Corpus, Qrels, QuerySet, RunList

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QueryProvenance:
    """What happened for one query: examples used, calls made, status."""

    query_id: str
    status: str
    n_candidates: int = 0
    pair_count: int = 0
    backend_calls: int = 0
    cache_hits: int = 0
    example_query_ids: tuple[str, ...] = ()
    gold_labels: tuple[str, ...] = ()
    error: str | None = None

    @property
    def flips(self) -> tuple[bool, ...]:
        """True where the relevant passage sits in the second slot."""
        return tuple(label == "2" for label in self.gold_labels)

    @property
    def cache_hit_rate(self) -> float:
        return self.cache_hits / self.backend_calls if self.backend_calls else 0.0

    def to_json(self) -> str:
        record = {
            "query_id": self.query_id,
            "status": self.status,
            "n_candidates": self.n_candidates,
            "pair_count": self.pair_count,
            "backend_calls": self.backend_calls,
            "cache_hit_rate": round(self.cache_hit_rate, 6),
            "example_query_ids": list(self.example_query_ids),
            "gold_labels": list(self.gold_labels),
            "flips": list(self.flips),
            "error": self.error,
        }
        return json.dumps(record, sort_keys=True)


@dataclass
class BatchResult:
    """Reranked run plus the per-query provenance and failure count."""

    run: RunList
    provenance: list[QueryProvenance]
    neighborhoods: dict[str, Neighborhood] = field(default_factory=dict)
    examples: dict[str, list[IclExample]] = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return sum(1 for p in self.provenance if p.status == "failed")


def write_provenance(records: Sequence[QueryProvenance], path: str | Path) -> None:
    ordered = sorted(records, key=lambda r: r.query_id)
    with open(path, "w", encoding="utf-8") as f:
        for record in ordered:
            f.write(record.to_json() + "\n")


def rerank_all(
    first_stage: RunList,
    queries: QuerySet,
    corpus: Corpus,
    backend: Backend,
    template: PromptTemplate,
    *,
    depth: int = 100,
    shots: int = 0,
    selector: Selector = Selector.LEX,
    sampler_cfg: SamplerConfig | None = None,
    training_queries: QuerySet | None = None,
    training_qrels: Qrels | None = None,
    corpus_index: InvertedIndex | None = None,
    training_query_index: InvertedIndex | None = None,
    query_embeddings: EmbeddingStore | None = None,
    static_ids: Sequence[str] | None = None,
    seed: int = 0,
    policy: CallPolicy = CallPolicy(),
    max_workers: int | None = None,
) -> BatchResult:
    """Rerank every query of a first-stage run, isolating failures.

    With ``shots > 0`` the few-shot machinery requires training queries,
    training judgments, and a corpus index for hard negatives; the
    selector dictates whether a training-query index (lexical), an
    embedding store (semantic), or a fixed id list (static) is also
    needed. A query whose sampler finds no usable neighbor falls back to
    zero-shot rather than failing.
    """
    if shots > 0:
        if training_queries is None or training_qrels is None or corpus_index is None:
            raise ValidationError(
                "few-shot reranking needs training queries, training qrels, "
                "and a corpus index"
            )
        if sampler_cfg is None:
            sampler_cfg = SamplerConfig(k=shots, seed=seed)
        elif sampler_cfg.k != shots:
            raise ValidationError(
                f"sampler k ({sampler_cfg.k}) does not match shots ({shots})"
            )
    run_query_ids = sorted(first_stage.query_ids())
    reranked: dict[str, list] = {}
    provenance: list[QueryProvenance] = []
    neighborhoods: dict[str, Neighborhood] = {}
    examples_by_query: dict[str, list[IclExample]] = {}
    for query_id in run_query_ids:
        if query_id not in queries:
            provenance.append(
                QueryProvenance(
                    query_id=query_id,
                    status="failed",
                    error=f"no query text for {query_id!r}",
                )
            )
            reranked[query_id] = [
                (e.doc_id, e.score) for e in first_stage.entries(query_id)
            ]
            continue
        query = queries[query_id]
        examples: list[IclExample] = []
        try:
            if shots > 0:
                neighborhood = select_neighborhood(
                    query,
                    selector,
                    sampler_cfg.pool_size,
                    query_index=training_query_index,
                    embeddings=query_embeddings,
                    static_ids=static_ids,
                )
                neighborhoods[query_id] = neighborhood
                examples = sample_examples(
                    neighborhood,
                    training_queries,
                    training_qrels,
                    corpus,
                    corpus_index,
                    sampler_cfg,
                    seed=seed,
                )
                examples_by_query[query_id] = examples
            single = rerank(
                first_stage,
                query,
                corpus,
                backend,
                template,
                depth=depth,
                examples=examples,
                policy=policy,
                max_workers=max_workers,
            )
        except (ComparisonError, RenderError, ValidationError, PrpError) as e:
            logger.warning("query %r failed: %s", query_id, e)
            provenance.append(
                QueryProvenance(
                    query_id=query_id,
                    status="failed",
                    n_candidates=min(depth, len(first_stage.entries(query_id))),
                    example_query_ids=tuple(
                        ex.example_query.query_id for ex in examples
                    ),
                    gold_labels=tuple(ex.gold_label for ex in examples),
                    error=str(e),
                )
            )
            reranked[query_id] = [
                (e.doc_id, e.score) for e in first_stage.entries(query_id)
            ]
            continue
        reranked[query_id] = [(e.doc_id, e.score) for e in single.entries(query_id)]
        n_candidates = min(depth, len(first_stage.entries(query_id)))
        pair_count = n_candidates * (n_candidates - 1) // 2
        calls = 0
        hits = 0
        if isinstance(backend, CachingBackend):
            stats = backend.stats(query_id)
            calls = stats.hits + stats.misses
            hits = stats.hits
        provenance.append(
            QueryProvenance(
                query_id=query_id,
                status="ok",
                n_candidates=n_candidates,
                pair_count=pair_count,
                backend_calls=calls,
                cache_hits=hits,
                example_query_ids=tuple(ex.example_query.query_id for ex in examples),
                gold_labels=tuple(ex.gold_label for ex in examples),
            )
        )
    return BatchResult(
        run=RunList.from_ordered(reranked),
        provenance=provenance,
        neighborhoods=neighborhoods,
        examples=examples_by_query,
    )
