"""
In-context examples: neighborhoods and hard-negative triples
============================================================

Pick the training queries most similar to a probe query, then turn each
neighbor into a labeled example: its relevant passage paired with a
mid-rank BM25 negative, in randomized slot order.
"""

from prprank import (
    Corpus,
    Document,
    Qrels,
    Query,
    QuerySet,
    SamplerConfig,
    Selector,
    build_index,
    sample_examples,
    select_neighborhood,
)

# A small world: passages about pets, plus judged training queries.
corpus = Corpus(
    [Document(f"p{i}", f"pet care advice part {i} about cats and dogs") for i in range(8)]
    + [Document("p8", "feeding schedules for adult cats"),
       Document("p9", "training a puppy to sit")]
)
training_queries = QuerySet(
    [
        Query("t1", "how often to feed cats"),
        Query("t2", "teach dogs basic commands"),
        Query("t3", "cats scratching furniture"),
    ]
)
training_qrels = Qrels.from_pairs(
    [("t1", "p8", 2), ("t2", "p9", 2), ("t3", "p0", 1)]
)

corpus_index = build_index(corpus)
query_index = build_index(training_queries)

# Lexical neighborhoods rank training queries by BM25 against the probe.
probe = Query("q", "what do cats eat")
neighborhood = select_neighborhood(probe, Selector.LEX, 3, query_index=query_index)
print(f"lexical neighbors of {probe.text!r}:")
for neighbor_id, similarity in neighborhood.candidates:
    print(f"  {neighbor_id}  sim={similarity:.4f}  {training_queries[neighbor_id].text!r}")

# Each neighbor becomes one example: a positive from its judgments and a
# hard negative from BM25 ranks (neg_lo, neg_hi]. Slot order flips with
# probability 1/2 so the gold answer is not always "1".
cfg = SamplerConfig(k=2, pool_size=3, neg_lo=1, neg_hi=6, seed=42)
examples = sample_examples(
    neighborhood, training_queries, training_qrels, corpus, corpus_index, cfg
)
print("\nsampled examples:")
for example in examples:
    print(f"  query    : {example.example_query.text!r}")
    print(f"  passage 1: {example.first_passage.text!r}")
    print(f"  passage 2: {example.second_passage.text!r}")
    print(f"  answer   : {example.gold_label}")

# The same probe and seed always reproduce the same draw; a different
# probe id gets its own independent stream.
again = sample_examples(
    neighborhood, training_queries, training_qrels, corpus, corpus_index, cfg
)
print("\nsame probe, same seed, same examples:", examples == again)
