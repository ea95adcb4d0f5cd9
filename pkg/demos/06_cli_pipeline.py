"""
End to end from the command line
================================

Write a tiny retrieval world to disk, then drive the whole pipeline with
the ``prprank`` CLI entry point: build indexes, inspect neighbors, rerank
a first-stage run with a one-shot pairwise prompt, and evaluate both runs
side by side.
"""

import json
import tempfile
from pathlib import Path

from prprank.cli import main

workdir = Path(tempfile.mkdtemp(prefix="prprank_demo_"))
print(f"working in {workdir}\n")

# --- Input files ---------------------------------------------------------
# Ten passages about two topics, two evaluation queries, two judged
# training queries, and a first-stage run that is deliberately reversed.
docs = []
for topic, word in [("a", "glacier"), ("b", "volcano")]:
    for i in range(5):
        docs.append((f"{topic}{i}", f"{word} field report entry {i}"))
(workdir / "corpus.jsonl").write_text(
    "".join(json.dumps({"id": d, "text": t}) + "\n" for d, t in docs)
)
(workdir / "queries.tsv").write_text(
    "qa\tglacier melt rates\nqb\tvolcano ash plumes\n"
)
(workdir / "training.tsv").write_text(
    "ta\tglacier ice cores\ntb\tvolcano lava flows\n"
)
(workdir / "training_qrels.txt").write_text("ta 0 a4 2\ntb 0 b4 2\n")
(workdir / "qrels.txt").write_text(
    "qa 0 a4 3\nqa 0 a3 2\nqb 0 b4 3\nqb 0 b3 2\n"
)
run_lines = []
for qid, topic in [("qa", "a"), ("qb", "b")]:
    for rank, i in enumerate(range(5)):
        run_lines.append(f"{qid} Q0 {topic}{i} {rank + 1} {float(5 - i)} first\n")
(workdir / "first_stage.run").write_text("".join(run_lines))

# Gold utilities for the oracle backend: higher index = better passage.
(workdir / "gold.jsonl").write_text(
    "".join(
        json.dumps({"query_id": q, "doc_id": f"{t}{i}", "utility": float(i)}) + "\n"
        for q, t in [("qa", "a"), ("qb", "b")]
        for i in range(5)
    )
)

config = {
    "mode": "pairwise",
    "shots": 1,
    "selector": "lex",
    "depth": 5,
    "seed": 7,
    "workers": 2,
    "sampler": {"pool_size": 2, "neg_lo": 1, "neg_hi": 4},
    "backend": {"kind": "oracle", "oracle": {"gold_path": str(workdir / "gold.jsonl")}},
    "paths": {
        "corpus": str(workdir / "corpus.jsonl"),
        "queries": str(workdir / "queries.tsv"),
        "training_queries": str(workdir / "training.tsv"),
        "training_qrels": str(workdir / "training_qrels.txt"),
        "qrels": str(workdir / "qrels.txt"),
        "first_stage_run": str(workdir / "first_stage.run"),
        "corpus_index": str(workdir / "corpus.idx"),
        "training_query_index": str(workdir / "training.idx"),
        "output_run": str(workdir / "reranked.run"),
        "provenance": str(workdir / "provenance.jsonl"),
    },
}
config_path = workdir / "config.json"
config_path.write_text(json.dumps(config, indent=2))

# --- index: build and persist the BM25 indexes ---------------------------
print("$ prprank index")
main(["index", "--config", str(config_path)])

# --- neighbors: which training queries would coach each probe? -----------
print("\n$ prprank neighbors qa")
main(["neighbors", "--config", str(config_path), "qa"])

# --- rerank: one-shot pairwise prompting over the oracle backend ---------
print("\n$ prprank rerank")
main(["rerank", "--config", str(config_path)])

print("\nreranked run (first stage was a0..a4, worst first):")
for line in (workdir / "reranked.run").read_text().splitlines()[:5]:
    print(f"  {line}")

# --- evaluate: both runs, with a significance matrix ---------------------
# The noise-free oracle lifts both queries by the same amount, so the
# locality correlation is reported as nan (zero variance in the deltas);
# demos/05_evaluation.py shows a world where it is informative.
print("\n$ prprank evaluate")
main(
    [
        "evaluate",
        "--config",
        str(config_path),
        str(workdir / "first_stage.run"),
        str(workdir / "reranked.run"),
        "--locality-provenance",
        str(workdir / "provenance.jsonl"),
    ]
)
