"""Selection and sampling of in-context examples for few-shot prompting.

Two stages: pick a *neighborhood* of training queries similar to the probe
query (lexical BM25, semantic cosine, or a fixed list), then for each
neighbor sample one labeled triple: the neighbor query, one of its relevant
passages, and one *hard negative* drawn from a mid-rank BM25 window over
the corpus. Gold labels are flipped to the second slot with probability
one half so the label marginal carries no positional signal.

Sampling is deterministic given (seed, probe query id): every probe query
gets its own RNG stream, so results do not depend on processing order.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .dense import EmbeddingStore, top_k_cosine
from .errors import ConfigError, ValidationError
from .sparse import InvertedIndex, bm25_search, rank_window
from .types import Corpus, Document, Qrels, Query, QuerySet

logger = logging.getLogger(__name__)


class Selector(str, Enum):
    """How neighbor training queries are chosen for a probe query."""

    LEX = "lex"
    SEM = "sem"
    STATIC = "static"


@dataclass(frozen=True)
class Neighborhood:
    """Ranked training-query neighbors of one probe query."""

    probe_query_id: str
    candidates: tuple[tuple[str, float], ...]
    selector: Selector

    def query_ids(self) -> list[str]:
        return [qid for qid, _ in self.candidates]


@dataclass(frozen=True)
class IclExample:
    """One rendered-ready example: query, two passages, gold slot label."""

    example_query: Query
    first_passage: Document
    second_passage: Document
    gold_label: str

    def __post_init__(self) -> None:
        if self.gold_label not in ("1", "2"):
            raise ValidationError(f"gold label must be '1' or '2', got {self.gold_label!r}")


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs for neighborhood size and hard-negative harvesting.

    ``pool_size`` is the number of neighbors retrieved before sampling;
    ``k`` of them become examples. Hard negatives come from BM25 ranks in
    (neg_lo, neg_hi] against the passage corpus.
    """

    k: int
    pool_size: int = 10
    neg_lo: int = 100
    neg_hi: int = 200
    relevance_threshold: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValidationError(f"k must be non-negative, got {self.k}")
        if self.pool_size < self.k:
            raise ValidationError(
                f"pool_size ({self.pool_size}) must be >= k ({self.k})"
            )
        if self.neg_lo < 0 or self.neg_hi <= self.neg_lo:
            raise ValidationError(
                f"negative window must satisfy 0 <= lo < hi, got ({self.neg_lo}, {self.neg_hi}]"
            )
        if self.relevance_threshold < 1:
            raise ValidationError(
                f"relevance threshold must be >= 1, got {self.relevance_threshold}"
            )


def derive_seed(global_seed: int, *parts: str) -> int:
    """Stable per-stream seed from a global seed and string identifiers."""
    h = hashlib.sha256()
    h.update(str(global_seed).encode("utf-8"))
    for part in parts:
        h.update(b"\x1f")
        h.update(part.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


def select_neighborhood(
    query: Query,
    selector: Selector,
    pool_size: int,
    *,
    query_index: InvertedIndex | None = None,
    embeddings: EmbeddingStore | None = None,
    probe_vector: Sequence[float] | np.ndarray | None = None,
    static_ids: Sequence[str] | None = None,
) -> Neighborhood:
    """Rank training queries near the probe query under one selector.

    The probe query itself is excluded by id, so running over the training
    split never selects a query as its own neighbor.
    """
    if pool_size < 0:
        raise ValidationError(f"pool_size must be non-negative, got {pool_size}")
    if selector is Selector.LEX:
        if query_index is None:
            raise ConfigError("lexical selection requires a training-query index")
        # One extra hit covers the probe query ranking itself first.
        hits = bm25_search(query_index, query.text, pool_size + 1)
        candidates = [
            (h.item_id, h.score) for h in hits if h.item_id != query.query_id
        ][:pool_size]
    elif selector is Selector.SEM:
        if embeddings is None:
            raise ConfigError("semantic selection requires a training-query embedding store")
        if probe_vector is None:
            if query.query_id not in embeddings:
                raise ConfigError(
                    f"no embedding for probe query {query.query_id!r} and no probe vector given"
                )
            probe_vector = embeddings.vector(query.query_id)
        hits = top_k_cosine(
            embeddings, probe_vector, pool_size, exclude={query.query_id}
        )
        candidates = [(h.item_id, h.score) for h in hits]
    elif selector is Selector.STATIC:
        if static_ids is None:
            raise ConfigError("static selection requires an explicit id list")
        deduped: list[str] = []
        for qid in static_ids:
            if qid != query.query_id and qid not in deduped:
                deduped.append(qid)
        candidates = [(qid, 0.0) for qid in deduped[:pool_size]]
    else:  # pragma: no cover - Enum exhausts the cases
        raise ConfigError(f"unknown selector {selector!r}")
    return Neighborhood(
        probe_query_id=query.query_id,
        candidates=tuple(candidates),
        selector=selector,
    )


def sample_examples(
    neighborhood: Neighborhood,
    training_queries: QuerySet,
    qrels: Qrels,
    corpus: Corpus,
    index: InvertedIndex,
    cfg: SamplerConfig,
    *,
    seed: int | None = None,
) -> list[IclExample]:
    """Draw up to ``cfg.k`` labeled triples from a neighborhood.

    Neighbors are visited in a seeded random permutation. A neighbor is
    skipped (without consuming random draws) when it cannot produce a
    triple: no judged-relevant passage present in the corpus, or an empty
    hard-negative window. Skipped neighbors are replaced by later ones in
    the permutation; if the whole pool is exhausted the result is shorter
    than ``k`` (possibly empty), which downstream treats as zero-shot.
    """
    if seed is None:
        seed = cfg.seed
    rng = np.random.default_rng(derive_seed(seed, neighborhood.probe_query_id))
    pool = neighborhood.query_ids()
    order = rng.permutation(len(pool)) if pool else np.array([], dtype=int)
    examples: list[IclExample] = []
    for pos in order:
        if len(examples) == cfg.k:
            break
        neighbor_id = pool[int(pos)]
        if neighbor_id not in training_queries:
            logger.debug("neighbor %r has no training-query text; skipped", neighbor_id)
            continue
        neighbor = training_queries[neighbor_id]
        positives = [
            doc_id
            for doc_id in qrels.relevant_ids(neighbor_id, threshold=cfg.relevance_threshold)
            if doc_id in corpus
        ]
        if not positives:
            logger.debug("neighbor %r has no relevant passage in corpus; skipped", neighbor_id)
            continue
        window = rank_window(index, neighbor.text, cfg.neg_lo, cfg.neg_hi)
        negatives = [
            h.item_id
            for h in window
            if qrels.grade(neighbor_id, h.item_id) < cfg.relevance_threshold
        ]
        if not negatives:
            logger.debug("neighbor %r has an empty hard-negative window; skipped", neighbor_id)
            continue
        # Draws happen only after the neighbor is known to be producible,
        # so skipped neighbors never perturb the stream.
        pos_doc = corpus[positives[int(rng.integers(len(positives)))]]
        neg_doc = corpus[negatives[int(rng.integers(len(negatives)))]]
        flipped = bool(rng.random() < 0.5)
        if flipped:
            first, second, gold = neg_doc, pos_doc, "2"
        else:
            first, second, gold = pos_doc, neg_doc, "1"
        examples.append(
            IclExample(
                example_query=neighbor,
                first_passage=first,
                second_passage=second,
                gold_label=gold,
            )
        )
    if cfg.k and not examples and pool:
        logger.info(
            "no usable example for query %r (pool of %d neighbors exhausted); "
            "falling back to zero-shot",
            neighborhood.probe_query_id,
            len(pool),
        )
    return examples
