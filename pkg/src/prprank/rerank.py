"""Reranking top candidates of a first-stage run with LLM preferences.

The pairwise path is the core: every unordered pair of candidates inside
the rerank depth is compared twice, once per slot order, and the pair
contributes a consistency value

    P(D beats D') = 1/2 * [ fwd prefers D ] + 1/2 * [ bwd prefers D ]

which is 1 when both orders agree D wins, 0 when both agree D loses, and
1/2 otherwise (disagreement or an unparseable answer). A candidate's
aggregate score is the sum of its consistency values against all other
candidates; n candidates therefore share exactly n*(n-1)/2 points of total
mass. Aggregates are dyadic (sums of 0, 1/2, 1), so the total is exact in
floating point no matter the accumulation order.

Pointwise and setwise paths reuse the same backends: pointwise scores each
candidate independently by P('true'); setwise runs a champion tournament
over slots of s passages.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

from .backend import Backend, BackendRequest, RequestContext
from .errors import BackendError, ComparisonError, ValidationError
from .icl import IclExample
from .prompts import (
    PromptMode,
    PromptTemplate,
    render_pairwise,
    render_pointwise,
    render_setwise,
)
from .types import Corpus, Document, Query, RunList


@dataclass(frozen=True)
class CallPolicy:
    """Retry/timeout settings applied to every backend call."""

    max_retries: int = 3
    timeout: float = 30.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValidationError(f"max_retries must be non-negative, got {self.max_retries}")
        if self.timeout <= 0:
            raise ValidationError(f"timeout must be positive, got {self.timeout}")


@dataclass(frozen=True)
class PreferenceOutcome:
    """Result of one order-swapped pairwise comparison."""

    query_id: str
    first_doc_id: str
    second_doc_id: str
    forward_consistent: bool
    backward_consistent: bool
    value: float

    def __post_init__(self) -> None:
        expected = (int(self.forward_consistent) + int(self.backward_consistent)) / 2.0
        if self.value != expected:
            raise ValidationError(
                f"consistency value {self.value} does not match its components"
            )


def _score_call(
    backend: Backend,
    prompt_text: str,
    answer_tokens: tuple[str, ...],
    policy: CallPolicy,
    context: RequestContext,
):
    request = BackendRequest(
        prompt_text=prompt_text,
        candidate_tokens=answer_tokens,
        max_retries=policy.max_retries,
        timeout=policy.timeout,
    )
    return backend.score(request, context)


def pairwise_preference(
    backend: Backend,
    template: PromptTemplate,
    query: Query,
    first: Document,
    second: Document,
    examples: Sequence[IclExample] = (),
    policy: CallPolicy = CallPolicy(),
) -> PreferenceOutcome:
    """Compare one pair in both slot orders and combine into [0, 1/2, 1].

    A slot order counts toward ``first`` only when the response parses and
    strictly prefers the slot holding ``first``; unparseable answers and
    exact logprob ties count against it, so a fully silent model yields
    1/2 for every pair instead of fabricating an order.
    """
    fwd = render_pairwise(template, query, first, second, examples)
    bwd = render_pairwise(template, query, second, first, examples)
    example_texts = tuple(ex.example_query.text for ex in examples)
    try:
        fwd_resp = _score_call(
            backend,
            fwd.text,
            fwd.answer_tokens,
            policy,
            RequestContext(
                query_id=query.query_id,
                query_text=query.text,
                doc_ids=fwd.doc_ids,
                example_query_texts=example_texts,
            ),
        )
        bwd_resp = _score_call(
            backend,
            bwd.text,
            bwd.answer_tokens,
            policy,
            RequestContext(
                query_id=query.query_id,
                query_text=query.text,
                doc_ids=bwd.doc_ids,
                example_query_texts=example_texts,
            ),
        )
    except BackendError as e:
        raise ComparisonError(
            query.query_id,
            first.doc_id,
            second.doc_id,
            f"backend failed: {e}",
        ) from e
    tok1, tok2 = template.answer_tokens
    forward_consistent = (
        not fwd_resp.unparseable and fwd_resp.logprobs[tok1] > fwd_resp.logprobs[tok2]
    )
    backward_consistent = (
        not bwd_resp.unparseable and bwd_resp.logprobs[tok2] > bwd_resp.logprobs[tok1]
    )
    return PreferenceOutcome(
        query_id=query.query_id,
        first_doc_id=first.doc_id,
        second_doc_id=second.doc_id,
        forward_consistent=forward_consistent,
        backward_consistent=backward_consistent,
        value=(int(forward_consistent) + int(backward_consistent)) / 2.0,
    )


def allpairs_scores(
    backend: Backend,
    template: PromptTemplate,
    query: Query,
    candidates: Sequence[Document],
    examples: Sequence[IclExample] = (),
    policy: CallPolicy = CallPolicy(),
    max_workers: int | None = None,
) -> dict[str, float]:
    """Aggregate score per candidate: sum of consistency values over all
    opponents. Each unordered pair is evaluated exactly once and credited
    P to one side, 1 - P to the other."""
    ids = [d.doc_id for d in candidates]
    if len(set(ids)) != len(ids):
        raise ValidationError("candidate list contains duplicate documents")
    scores = {doc_id: 0.0 for doc_id in ids}
    pairs = list(combinations(range(len(candidates)), 2))

    def evaluate(pair: tuple[int, int]) -> tuple[int, int, float]:
        i, j = pair
        outcome = pairwise_preference(
            backend, template, query, candidates[i], candidates[j], examples, policy
        )
        return i, j, outcome.value

    if max_workers is not None and max_workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(evaluate, pairs))
    else:
        results = [evaluate(p) for p in pairs]
    # Accumulate in pair order so float sums are scheduling-independent.
    for i, j, value in sorted(results, key=lambda r: (r[0], r[1])):
        scores[ids[i]] += value
        scores[ids[j]] += 1.0 - value
    return scores


def pointwise_score(backend_response) -> float:
    """Relevance probability from the 'true'/'false' logprobs."""
    lp_true = backend_response.logprobs["true"]
    lp_false = backend_response.logprobs["false"]
    gap = lp_false - lp_true
    if gap > 700.0:
        return 0.0
    if gap < -700.0:
        return 1.0
    return 1.0 / (1.0 + math.exp(gap))


def pointwise_scores(
    backend: Backend,
    template: PromptTemplate,
    query: Query,
    candidates: Sequence[Document],
    examples: Sequence[IclExample] = (),
    policy: CallPolicy = CallPolicy(),
    max_workers: int | None = None,
) -> dict[str, float]:
    """Score each candidate independently by P('true')."""
    ids = [d.doc_id for d in candidates]
    if len(set(ids)) != len(ids):
        raise ValidationError("candidate list contains duplicate documents")
    example_texts = tuple(ex.example_query.text for ex in examples)

    def evaluate(doc: Document) -> tuple[str, float]:
        rendered = render_pointwise(template, query, doc, examples)
        try:
            resp = _score_call(
                backend,
                rendered.text,
                rendered.answer_tokens,
                policy,
                RequestContext(
                    query_id=query.query_id,
                    query_text=query.text,
                    doc_ids=rendered.doc_ids,
                    example_query_texts=example_texts,
                ),
            )
        except BackendError as e:
            raise ComparisonError(
                query.query_id, doc.doc_id, doc.doc_id, f"backend failed: {e}"
            ) from e
        return doc.doc_id, 0.5 if resp.unparseable else pointwise_score(resp)

    if max_workers is not None and max_workers > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(evaluate, candidates))
    else:
        results = [evaluate(d) for d in candidates]
    return dict(results)


def setwise_order(
    backend: Backend,
    template: PromptTemplate,
    query: Query,
    candidates: Sequence[Document],
    examples: Sequence[IclExample] = (),
    policy: CallPolicy = CallPolicy(),
    top_n: int = 10,
) -> list[str]:
    """Champion tournament: repeatedly ask which of s passages is best.

    Each round partitions the remaining pool into windows of up to
    ``set_size`` passages (window = template answer-token count), asks for
    the best in each window, then plays the winners off until one remains;
    that champion takes the next output position. Only the first ``top_n``
    positions are resolved; the remainder keeps its incoming order.
    """
    ids = [d.doc_id for d in candidates]
    if len(set(ids)) != len(ids):
        raise ValidationError("candidate list contains duplicate documents")
    set_size = len(template.answer_tokens)
    example_texts = tuple(ex.example_query.text for ex in examples)

    def best_of(window: list[Document]) -> Document:
        if len(window) == 1:
            return window[0]
        rendered = render_setwise(template, query, window, examples)
        try:
            resp = _score_call(
                backend,
                rendered.text,
                rendered.answer_tokens,
                policy,
                RequestContext(
                    query_id=query.query_id,
                    query_text=query.text,
                    doc_ids=rendered.doc_ids,
                    example_query_texts=example_texts,
                ),
            )
        except BackendError as e:
            raise ComparisonError(
                query.query_id, window[0].doc_id, window[-1].doc_id, f"backend failed: {e}"
            ) from e
        if resp.unparseable:
            return window[0]
        # argmax over slot logprobs; first maximum wins on exact ties.
        best_slot = 0
        best_lp = resp.logprobs[rendered.answer_tokens[0]]
        for slot, token in enumerate(rendered.answer_tokens[1:], start=1):
            lp = resp.logprobs[token]
            if lp > best_lp:
                best_slot, best_lp = slot, lp
        return window[best_slot]

    remaining = list(candidates)
    ordered: list[str] = []
    while remaining and len(ordered) < top_n:
        pool = remaining
        while len(pool) > 1:
            pool = [
                best_of(pool[i : i + set_size]) for i in range(0, len(pool), set_size)
            ]
        champion = pool[0]
        ordered.append(champion.doc_id)
        remaining = [d for d in remaining if d.doc_id != champion.doc_id]
    ordered.extend(d.doc_id for d in remaining)
    return ordered


def rerank(
    run: RunList,
    query: Query,
    corpus: Corpus,
    backend: Backend,
    template: PromptTemplate,
    *,
    depth: int = 100,
    examples: Sequence[IclExample] = (),
    policy: CallPolicy = CallPolicy(),
    max_workers: int | None = None,
) -> RunList:
    """Rerank the top ``depth`` entries of one query's first-stage list.

    The reranked block is ordered by aggregate score (ties broken by
    first-stage score descending, then doc id ascending) and keeps the
    aggregates as run scores. Entries below the depth keep their relative
    order, with scores min(block) - 1, - 2, ... so the run stays strictly
    decreasing.
    """
    if depth < 1:
        raise ValidationError(f"depth must be >= 1, got {depth}")
    entries = run.entries(query.query_id)
    head = entries[:depth]
    tail = entries[depth:]
    missing = [e.doc_id for e in head if e.doc_id not in corpus]
    if missing:
        raise ValidationError(
            f"documents {missing[:5]!r} in the run are absent from the corpus"
        )
    candidates = [corpus[e.doc_id] for e in head]
    first_stage = {e.doc_id: e.score for e in head}
    if len(candidates) == 1:
        aggregates = {candidates[0].doc_id: 0.0}
    elif template.mode is PromptMode.PAIRWISE:
        aggregates = allpairs_scores(
            backend, template, query, candidates, examples, policy, max_workers
        )
    elif template.mode is PromptMode.POINTWISE:
        aggregates = pointwise_scores(
            backend, template, query, candidates, examples, policy, max_workers
        )
    elif template.mode is PromptMode.SETWISE:
        order = setwise_order(backend, template, query, candidates, examples, policy)
        aggregates = {doc_id: float(len(order) - 1 - i) for i, doc_id in enumerate(order)}
    else:  # pragma: no cover - Enum exhausts the cases
        raise ValidationError(f"unknown prompt mode {template.mode!r}")
    block = sorted(
        aggregates.items(),
        key=lambda kv: (-kv[1], -first_stage[kv[0]], kv[0]),
    )
    ordered: list[tuple[str, float]] = list(block)
    floor = min(score for _, score in block) if block else 0.0
    for offset, entry in enumerate(tail, start=1):
        ordered.append((entry.doc_id, floor - offset))
    return RunList.from_ordered({query.query_id: ordered})
