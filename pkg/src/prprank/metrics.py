"""Graded-relevance evaluation and significance testing for run files.

Metrics follow the standard trec_eval conventions:

- nDCG@c with gains 2^grade - 1 and discounts log2(rank + 1); the ideal
  ranking draws on *all* judged documents for the query, not only the
  retrieved ones, so a run that never fetches the best passage is
  penalized rather than re-normalized.
- AP@c over binary relevance (grade >= threshold), divided by the total
  number of relevant documents in the judgments.

Unjudged queries present in a run score 0 and still count toward means,
which keeps system comparisons aligned on the same denominator. Queries
judged but missing from a run are ignored: the run defines the population.

Significance uses a paired two-sided t-test with n - 1 degrees of freedom
over per-query metric differences.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.stats

from .errors import ValidationError
from .sparse import term_set_similarity
from .types import Qrels, QuerySet, RunList


def dcg(gains: Sequence[float]) -> float:
    """Discounted cumulative gain of a gain vector in rank order."""
    return sum(g / math.log2(i + 2) for i, g in enumerate(gains))


def ndcg_at(run: RunList, qrels: Qrels, cutoff: int = 10) -> dict[str, float]:
    """Per-query nDCG@cutoff for every query in the run."""
    if cutoff < 1:
        raise ValidationError(f"cutoff must be >= 1, got {cutoff}")
    out: dict[str, float] = {}
    for query_id in run.query_ids():
        judged = qrels.judged(query_id)
        gains = [
            float(2 ** judged.get(e.doc_id, 0) - 1)
            for e in run.entries(query_id)[:cutoff]
        ]
        actual = dcg(gains)
        ideal_gains = sorted(
            (float(2**g - 1) for g in judged.values()), reverse=True
        )[:cutoff]
        ideal = dcg(ideal_gains)
        out[query_id] = actual / ideal if ideal > 0 else 0.0
    return out


def ap_at(
    run: RunList, qrels: Qrels, cutoff: int = 100, *, binary_threshold: int = 2
) -> dict[str, float]:
    """Per-query average precision at a cutoff under binarized grades.

    The denominator is the total number of relevant documents in the
    judgments (not capped at the cutoff), matching trec_eval's map.
    """
    if cutoff < 1:
        raise ValidationError(f"cutoff must be >= 1, got {cutoff}")
    if binary_threshold < 1:
        raise ValidationError(
            f"binary threshold must be >= 1, got {binary_threshold}"
        )
    out: dict[str, float] = {}
    for query_id in run.query_ids():
        relevant = set(qrels.relevant_ids(query_id, threshold=binary_threshold))
        if not relevant:
            out[query_id] = 0.0
            continue
        hits = 0
        precision_sum = 0.0
        for i, entry in enumerate(run.entries(query_id)[:cutoff]):
            if entry.doc_id in relevant:
                hits += 1
                precision_sum += hits / (i + 1)
        out[query_id] = precision_sum / len(relevant)
    return out


@dataclass(frozen=True)
class MetricReport:
    """Per-query metric values plus their mean, for one run."""

    name: str
    per_query: dict[str, float]

    @property
    def mean(self) -> float:
        if not self.per_query:
            return 0.0
        return sum(self.per_query.values()) / len(self.per_query)

    def to_tsv(self) -> str:
        lines = [f"query_id\t{self.name}"]
        for query_id in sorted(self.per_query):
            lines.append(f"{query_id}\t{self.per_query[query_id]:.6f}")
        lines.append(f"mean\t{self.mean:.6f}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TTestResult:
    """Paired two-sided t-test over per-query differences (b - a)."""

    t_stat: float
    p_value: float
    n: int
    mean_difference: float
    significant: bool


def paired_t_test(
    per_query_a: Mapping[str, float],
    per_query_b: Mapping[str, float],
    *,
    alpha: float = 0.05,
) -> TTestResult:
    """Two-sided paired t-test aligned on query ids.

    Pairs are aligned by sorted query id and the two systems must cover
    exactly the same queries. Zero variance degenerates cleanly: all-zero
    differences give t = 0, p = 1 (no evidence); constant nonzero
    differences give t = +/-inf and the smallest positive p, which is the
    limit of the t distribution as s -> 0.
    """
    if set(per_query_a) != set(per_query_b):
        only_a = sorted(set(per_query_a) - set(per_query_b))[:3]
        only_b = sorted(set(per_query_b) - set(per_query_a))[:3]
        raise ValidationError(
            f"query sets differ (only in a: {only_a}, only in b: {only_b})"
        )
    query_ids = sorted(per_query_a)
    n = len(query_ids)
    if n < 2:
        raise ValidationError(f"paired t-test needs at least 2 queries, got {n}")
    diffs = np.array([per_query_b[q] - per_query_a[q] for q in query_ids])
    mean = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(
                t_stat=0.0, p_value=1.0, n=n, mean_difference=0.0, significant=False
            )
        t = math.inf if mean > 0 else -math.inf
        p = sys.float_info.epsilon
        return TTestResult(
            t_stat=t, p_value=p, n=n, mean_difference=mean, significant=p < alpha
        )
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(scipy.stats.t.sf(abs(t), df=n - 1))
    return TTestResult(
        t_stat=t, p_value=p, n=n, mean_difference=mean, significant=p < alpha
    )


@dataclass(frozen=True)
class LocalityRow:
    """One query's neighborhood similarity and metric movement."""

    query_id: str
    neighborhood_similarity: float
    metric_delta: float


@dataclass(frozen=True)
class LocalityReport:
    """Relationship between neighborhood term overlap and metric gains.

    ``pearson_r`` is NaN (and ``degenerate`` True) when either column has
    zero variance, where correlation is undefined.
    """

    rows: tuple[LocalityRow, ...]
    pearson_r: float
    degenerate: bool

    def to_tsv(self) -> str:
        lines = ["query_id\tneighborhood_similarity\tmetric_delta"]
        for row in self.rows:
            lines.append(
                f"{row.query_id}\t{row.neighborhood_similarity:.6f}\t{row.metric_delta:.6f}"
            )
        r_text = "nan" if self.degenerate else f"{self.pearson_r:.6f}"
        lines.append(f"pearson_r\t{r_text}\t")
        return "\n".join(lines) + "\n"


def jaccard_neighborhood(
    probe_text: str, neighbor_texts: Sequence[str]
) -> float:
    """Mean Jaccard term-set similarity between a probe query and its
    neighbors; empty neighborhoods score 0."""
    if not neighbor_texts:
        return 0.0
    return sum(term_set_similarity(probe_text, t) for t in neighbor_texts) / len(
        neighbor_texts
    )


def locality_report(
    baseline: RunList,
    treatment: RunList,
    qrels: Qrels,
    queries: QuerySet,
    neighborhoods: Mapping[str, Sequence[str]],
    *,
    cutoff: int = 10,
) -> LocalityReport:
    """Correlate neighborhood term overlap with per-query nDCG movement.

    ``neighborhoods`` maps each query id to the texts of its in-context
    example queries; queries without an entry contribute similarity 0.
    """
    if set(baseline.query_ids()) != set(treatment.query_ids()):
        raise ValidationError("baseline and treatment cover different queries")
    base = ndcg_at(baseline, qrels, cutoff)
    treat = ndcg_at(treatment, qrels, cutoff)
    rows = []
    for query_id in sorted(base):
        if query_id not in queries:
            raise ValidationError(f"no query text for {query_id!r}")
        sim = jaccard_neighborhood(
            queries[query_id].text, list(neighborhoods.get(query_id, ()))
        )
        rows.append(
            LocalityRow(
                query_id=query_id,
                neighborhood_similarity=sim,
                metric_delta=treat[query_id] - base[query_id],
            )
        )
    sims = np.array([r.neighborhood_similarity for r in rows])
    deltas = np.array([r.metric_delta for r in rows])
    degenerate = (
        len(rows) < 2 or float(sims.std()) == 0.0 or float(deltas.std()) == 0.0
    )
    if degenerate:
        r = float("nan")
    else:
        r = float(np.corrcoef(sims, deltas)[0, 1])
    return LocalityReport(rows=tuple(rows), pearson_r=r, degenerate=degenerate)
