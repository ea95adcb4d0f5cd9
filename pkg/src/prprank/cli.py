"""Command-line interface: index, neighbors, rerank, evaluate.

Every command takes ``--config FILE`` (JSON) plus a handful of overriding
flags. Exit codes: 0 success, 1 configuration error, 2 partial failure
(some queries failed but output was written), 3 I/O or data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .backend import make_backend
from .config import (
    ExperimentConfig,
    apply_env,
    load_config,
    require_paths,
    validate_common,
)
from .dense import load_embeddings
from .errors import ConfigError, ParseError, PrpError, ValidationError
from .icl import SamplerConfig, Selector, select_neighborhood
from .io import read_jsonl_corpus, read_qrels, read_trec_run, read_tsv_queries, write_trec_run
from .metrics import (
    ap_at,
    jaccard_neighborhood,
    locality_report,
    ndcg_at,
    paired_t_test,
)
from .pipeline import rerank_all, write_provenance
from .prompts import default_template, load_template
from .rerank import CallPolicy
from .sparse import InvertedIndex, build_index

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2
EXIT_IO = 3


def _load_or_build_index(
    index_path: str | None, source_path: str | None, what: str
) -> InvertedIndex:
    """Prefer a persisted index; otherwise build from the raw source."""
    if index_path and Path(index_path).exists():
        return InvertedIndex.load(index_path)
    if source_path is None:
        raise ConfigError(f"no {what} index and no source to build it from")
    if what == "corpus":
        return build_index(read_jsonl_corpus(source_path))
    return build_index(read_tsv_queries(source_path))


def cmd_index(config: ExperimentConfig) -> int:
    """Build and persist the sparse indexes; validate embeddings."""
    require_paths(config, "corpus")
    corpus = read_jsonl_corpus(config.paths.corpus)
    corpus_index = build_index(corpus)
    built = [f"corpus: {corpus_index.n_items} items, digest {corpus_index.digest()[:16]}"]
    if config.paths.corpus_index:
        corpus_index.save(config.paths.corpus_index)
        built[-1] += f" -> {config.paths.corpus_index}"
    if config.paths.training_queries:
        require_paths(config, "training_queries")
        training = read_tsv_queries(config.paths.training_queries)
        query_index = build_index(training)
        line = (
            f"training queries: {query_index.n_items} items, "
            f"digest {query_index.digest()[:16]}"
        )
        if config.paths.training_query_index:
            query_index.save(config.paths.training_query_index)
            line += f" -> {config.paths.training_query_index}"
        built.append(line)
    if config.paths.embeddings:
        require_paths(config, "embeddings")
        store = load_embeddings(config.paths.embeddings)
        built.append(f"embeddings: {len(store)} vectors of dimension {store.dim}")
    for line in built:
        print(line)
    return EXIT_OK


def cmd_neighbors(config: ExperimentConfig, query_id: str) -> int:
    """Print one query's neighborhood with similarities and term overlap."""
    require_paths(config, "queries", "training_queries")
    queries = read_tsv_queries(config.paths.queries)
    training = read_tsv_queries(config.paths.training_queries)
    if query_id not in queries:
        if query_id in training:
            queries = training
        else:
            raise ValidationError(f"query {query_id!r} not found")
    probe = queries[query_id]
    selector = config.selector_kind()
    query_index = None
    embeddings = None
    if selector is Selector.LEX:
        query_index = _load_or_build_index(
            config.paths.training_query_index, config.paths.training_queries, "training-query"
        )
    elif selector is Selector.SEM:
        require_paths(config, "embeddings")
        embeddings = load_embeddings(config.paths.embeddings)
    neighborhood = select_neighborhood(
        probe,
        selector,
        config.sampler.pool_size,
        query_index=query_index,
        embeddings=embeddings,
        static_ids=config.static_ids or None,
    )
    texts = []
    print(f"query {probe.query_id}: {probe.text}")
    for neighbor_id, sim in neighborhood.candidates:
        text = training[neighbor_id].text if neighbor_id in training else ""
        texts.append(text)
        print(f"{neighbor_id}\t{sim:.6f}\t{text}")
    overlap = jaccard_neighborhood(probe.text, texts)
    print(f"mean_term_jaccard\t{overlap:.6f}")
    return EXIT_OK


def _build_template(config: ExperimentConfig):
    mode = config.prompt_mode()
    if config.template_path:
        return load_template(
            config.template_path,
            mode,
            set_size=config.set_size,
            truncation_budget=config.truncation_budget,
        )
    return default_template(
        mode, set_size=config.set_size, truncation_budget=config.truncation_budget
    )


def cmd_rerank(config: ExperimentConfig) -> int:
    """Run the full rerank pipeline and write the run + provenance."""
    require_paths(config, "corpus", "queries", "first_stage_run")
    if not config.paths.output_run:
        raise ConfigError("rerank needs paths.output_run")
    selector = config.selector_kind()
    corpus = read_jsonl_corpus(config.paths.corpus)
    queries = read_tsv_queries(config.paths.queries)
    first_stage = read_trec_run(config.paths.first_stage_run)
    training_queries = None
    training_qrels = None
    corpus_index = None
    training_query_index = None
    embeddings = None
    if config.shots > 0:
        require_paths(config, "training_queries", "training_qrels")
        training_queries = read_tsv_queries(config.paths.training_queries)
        training_qrels = read_qrels(config.paths.training_qrels)
        corpus_index = _load_or_build_index(
            config.paths.corpus_index, config.paths.corpus, "corpus"
        )
        if selector is Selector.LEX:
            training_query_index = _load_or_build_index(
                config.paths.training_query_index,
                config.paths.training_queries,
                "training-query",
            )
        elif selector is Selector.SEM:
            require_paths(config, "embeddings")
            embeddings = load_embeddings(config.paths.embeddings)
    backend = make_backend(
        config.backend.kind,
        url=config.backend.url,
        api_key_env=config.backend.key_env,
        timeout=config.backend.timeout,
        max_retries=config.backend.max_retries,
        backoff_base=config.backend.backoff_base,
        parallelism=config.backend.parallelism,
        logprobs_top_n=config.backend.logprobs_top_n,
        cache_path=config.backend.cache_path,
        oracle_gold_path=config.backend.oracle.gold_path,
        oracle_noise=config.backend.oracle.noise,
        oracle_seed=config.backend.oracle.seed,
        oracle_locality_factor=config.backend.oracle.locality_factor,
    )
    sampler_cfg = SamplerConfig(
        k=config.shots,
        pool_size=config.sampler.pool_size,
        neg_lo=config.sampler.neg_lo,
        neg_hi=config.sampler.neg_hi,
        relevance_threshold=config.sampler.relevance_threshold,
        seed=config.seed,
    )
    result = rerank_all(
        first_stage,
        queries,
        corpus,
        backend,
        _build_template(config),
        depth=config.depth,
        shots=config.shots,
        selector=selector,
        sampler_cfg=sampler_cfg,
        training_queries=training_queries,
        training_qrels=training_qrels,
        corpus_index=corpus_index,
        training_query_index=training_query_index,
        query_embeddings=embeddings,
        static_ids=config.static_ids or None,
        seed=config.seed,
        policy=CallPolicy(
            max_retries=config.backend.max_retries, timeout=config.backend.timeout
        ),
        max_workers=config.workers,
    )
    write_trec_run(result.run, config.effective_run_tag(), config.paths.output_run)
    if config.paths.provenance:
        write_provenance(result.provenance, config.paths.provenance)
    failed = [p.query_id for p in result.provenance if p.status == "failed"]
    print(
        f"reranked {len(result.provenance) - len(failed)}/{len(result.provenance)} "
        f"queries -> {config.paths.output_run}"
    )
    if failed:
        print("failed queries: " + ", ".join(sorted(failed)), file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_evaluate(
    config: ExperimentConfig,
    run_paths: list[str],
    *,
    locality_provenance: str | None = None,
) -> int:
    """Score runs, print per-run metrics and the significance matrix."""
    require_paths(config, "qrels")
    if not run_paths:
        raise ConfigError("evaluate needs at least one run file")
    for path in run_paths:
        if not Path(path).exists():
            raise ConfigError(f"run file does not exist: {path}")
    qrels = read_qrels(config.paths.qrels)
    runs = {path: read_trec_run(path) for path in run_paths}
    ndcg = {
        path: ndcg_at(run, qrels, config.eval.ndcg_cutoff) for path, run in runs.items()
    }
    ap = {
        path: ap_at(
            run,
            qrels,
            config.eval.ap_cutoff,
            binary_threshold=config.eval.binary_threshold,
        )
        for path, run in runs.items()
    }
    for path in run_paths:
        n = len(ndcg[path])
        mean_ndcg = sum(ndcg[path].values()) / n if n else 0.0
        mean_ap = sum(ap[path].values()) / n if n else 0.0
        print(
            f"{path}\tqueries={n}\t"
            f"ndcg@{config.eval.ndcg_cutoff}={mean_ndcg:.4f}\t"
            f"ap@{config.eval.ap_cutoff}={mean_ap:.4f}"
        )
    if len(run_paths) > 1:
        print(f"significance matrix (paired t-test on ndcg@{config.eval.ndcg_cutoff}, "
              f"alpha={config.eval.alpha}):")
        for i, path_a in enumerate(run_paths):
            for path_b in run_paths[i + 1 :]:
                result = paired_t_test(
                    ndcg[path_a], ndcg[path_b], alpha=config.eval.alpha
                )
                marker = "*" if result.significant else " "
                print(
                    f"{marker} {path_a} vs {path_b}: "
                    f"diff={result.mean_difference:+.4f} "
                    f"t={result.t_stat:.4f} p={result.p_value:.6f}"
                )
    if locality_provenance is not None:
        if len(run_paths) != 2:
            raise ConfigError(
                "the locality report compares exactly two runs "
                "(baseline first, treatment second)"
            )
        require_paths(config, "queries", "training_queries")
        queries = read_tsv_queries(config.paths.queries)
        training = read_tsv_queries(config.paths.training_queries)
        neighborhoods = _example_texts_from_provenance(locality_provenance, training)
        report = locality_report(
            runs[run_paths[0]],
            runs[run_paths[1]],
            qrels,
            queries,
            neighborhoods,
            cutoff=config.eval.ndcg_cutoff,
        )
        print(report.to_tsv(), end="")
        if config.paths.report_dir:
            report_dir = Path(config.paths.report_dir)
            report_dir.mkdir(parents=True, exist_ok=True)
            (report_dir / "locality.tsv").write_text(
                report.to_tsv(), encoding="utf-8"
            )
    return EXIT_OK


def _example_texts_from_provenance(path: str, training) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                query_id = str(record["query_id"])
                example_ids = [str(x) for x in record.get("example_query_ids", [])]
            except (ValueError, KeyError, TypeError):
                raise ParseError(path, line_no, "bad provenance record") from None
            out[query_id] = [
                training[eid].text for eid in example_ids if eid in training
            ]
    return out


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--mode", choices=["pairwise", "pointwise", "setwise"])
    parser.add_argument("--shots", type=int)
    parser.add_argument("--selector", choices=["lex", "sem", "static"])
    parser.add_argument("--depth", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--run-tag")
    parser.add_argument("--backend-url", dest="backend_url")
    parser.add_argument("--cache-path", dest="cache_path")


def _apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> None:
    for name in ("mode", "shots", "selector", "depth", "seed", "workers"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    if getattr(args, "run_tag", None) is not None:
        config.run_tag = args.run_tag
    if getattr(args, "backend_url", None) is not None:
        config.backend.url = args.backend_url
    if getattr(args, "cache_path", None) is not None:
        config.backend.cache_path = args.cache_path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prprank",
        description=(
            "Rerank first-stage retrieval candidates with pairwise LLM "
            "preferences, optionally conditioned on in-context examples "
            "drawn from similar training queries."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build and persist sparse indexes")
    _add_common_flags(p_index)

    p_neighbors = sub.add_parser(
        "neighbors", help="print a query's training-query neighborhood"
    )
    _add_common_flags(p_neighbors)
    p_neighbors.add_argument("query_id", help="probe query id")

    p_rerank = sub.add_parser("rerank", help="rerank a first-stage run")
    _add_common_flags(p_rerank)

    p_evaluate = sub.add_parser("evaluate", help="score runs against judgments")
    _add_common_flags(p_evaluate)
    p_evaluate.add_argument("runs", nargs="+", help="run files to score")
    p_evaluate.add_argument(
        "--locality-provenance",
        help=(
            "provenance JSONL of the treatment run; with exactly two runs, "
            "correlates example term overlap with per-query metric movement"
        ),
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        _apply_overrides(config, args)
        apply_env(config)
        validate_common(config)
        if args.command == "index":
            return cmd_index(config)
        if args.command == "neighbors":
            return cmd_neighbors(config, args.query_id)
        if args.command == "rerank":
            return cmd_rerank(config)
        if args.command == "evaluate":
            return cmd_evaluate(
                config, args.runs, locality_provenance=args.locality_provenance
            )
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, ValidationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except PrpError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
