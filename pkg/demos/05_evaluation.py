"""
Evaluating runs: graded gains, significance, locality
=====================================================

Score two runs with nDCG@10 and AP@100, test whether their difference
survives a paired t-test, and correlate per-query gains with how close
each query's in-context examples were.
"""

from prprank import (
    Qrels,
    Query,
    QuerySet,
    RunList,
    ap_at,
    locality_report,
    ndcg_at,
    paired_t_test,
)

# Three queries with graded judgments (0 rows are simply absent).
qrels = Qrels.from_pairs(
    [
        ("q1", "a", 3), ("q1", "b", 1),
        ("q2", "c", 2), ("q2", "d", 2),
        ("q3", "e", 1),
    ]
)

# The baseline buries every relevant document one slot too low; the
# treatment fixes q1 and q2 but leaves q3 untouched.
baseline = RunList.from_ordered(
    {
        "q1": [("x", 3.0), ("a", 2.0), ("b", 1.0)],
        "q2": [("y", 3.0), ("c", 2.0), ("d", 1.0)],
        "q3": [("z", 2.0), ("e", 1.0)],
    }
)
treatment = RunList.from_ordered(
    {
        "q1": [("a", 3.0), ("b", 2.0), ("x", 1.0)],
        "q2": [("c", 3.0), ("d", 2.0), ("y", 1.0)],
        "q3": [("z", 2.0), ("e", 1.0)],
    }
)

for name, run in [("baseline", baseline), ("treatment", treatment)]:
    ndcg = ndcg_at(run, qrels, 10)
    ap = ap_at(run, qrels, 100)
    mean = lambda d: sum(d.values()) / len(d)
    print(f"{name:9s}  ndcg@10={mean(ndcg):.4f}  ap@100={mean(ap):.4f}")

# Paired t-test over the per-query nDCG differences (treatment - base).
result = paired_t_test(ndcg_at(baseline, qrels, 10), ndcg_at(treatment, qrels, 10))
print(
    f"\npaired t-test: t={result.t_stat:.4f}  p={result.p_value:.4f}"
    f"  n={result.n}  significant={result.significant}"
)

# Locality: q1 and q2 got lexically close example queries and improved;
# q3 got nothing and stayed flat. The report correlates the two signals.
queries = QuerySet(
    [
        Query("q1", "feeding kittens"),
        Query("q2", "planting roses"),
        Query("q3", "ancient rome"),
    ]
)
neighborhoods = {
    "q1": ["feeding adult cats", "kittens and milk"],
    "q2": ["roses in clay soil"],
    "q3": [],
}
report = locality_report(baseline, treatment, qrels, queries, neighborhoods)
print("\nquery  similarity  ndcg_delta")
for row in report.rows:
    print(
        f"{row.query_id:5s}  {row.neighborhood_similarity:10.4f}"
        f"  {row.metric_delta:+.4f}"
    )
print(f"pearson r = {report.pearson_r:.4f}")
