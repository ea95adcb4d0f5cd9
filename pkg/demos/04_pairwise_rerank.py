"""
Pairwise preferences and all-pairs reranking
============================================

Compare two passages in both slot orders, combine the answers into a
consistency value in {0, 1/2, 1}, then aggregate over every pair to
reorder the head of a first-stage run.
"""

from prprank import (
    Corpus,
    Document,
    OracleBackend,
    OracleWorld,
    PromptMode,
    Query,
    RunList,
    allpairs_scores,
    default_template,
    pairwise_preference,
    rerank,
)

# Five candidate passages for one query, with known gold utilities. The
# oracle backend answers each prompt from those utilities, so the ideal
# order is d4 > d3 > d2 > d1 > d0.
query = Query("q1", "how tall is the eiffel tower")
corpus = Corpus(
    [Document(f"d{i}", f"landmark fact sheet number {i}") for i in range(5)]
)
gold = {("q1", f"d{i}"): float(i + 1) for i in range(5)}
backend = OracleBackend(OracleWorld(gold))
template = default_template(PromptMode.PAIRWISE)

# One comparison, both slot orders. A noise-free oracle is
# order-consistent, so the value is 0 or 1 and the two orders sum to 1.
forward = pairwise_preference(backend, template, query, corpus["d4"], corpus["d0"])
backward = pairwise_preference(backend, template, query, corpus["d0"], corpus["d4"])
print(f"P(d4 beats d0) = {forward.value}")
print(f"P(d0 beats d4) = {backward.value}")
print(f"complement holds: {forward.value + backward.value == 1.0}")

# All-pairs aggregation: each candidate's score is the sum of its
# consistency values against the other four, so the five scores always
# share exactly 5*4/2 = 10 points of mass.
candidates = [corpus[f"d{i}"] for i in range(5)]
scores = allpairs_scores(backend, template, query, candidates)
print("\naggregate scores:")
for doc_id, score in sorted(scores.items(), key=lambda kv: -kv[1]):
    print(f"  {doc_id}  {score:.1f}")
print(f"total mass: {sum(scores.values()):.1f}")

# rerank() applies this to the head of a first-stage run. Start from the
# worst possible order and watch the block invert; entries beyond the
# rerank depth keep their relative order below the block.
first_stage = RunList.from_ordered(
    {"q1": [(f"d{i}", float(5 - i)) for i in range(5)]}
)
reranked = rerank(first_stage, query, corpus, backend, template, depth=3)
print("\nfirst stage :", [e.doc_id for e in first_stage.entries("q1")])
print("reranked    :", [e.doc_id for e in reranked.entries("q1")])
print("(depth 3 reorders d0..d2; d3, d4 stay in the tail)")
