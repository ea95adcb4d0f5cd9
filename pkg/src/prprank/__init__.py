"""Rerank retrieval candidates with pairwise LLM preference prompting.

The package turns a first-stage run (BM25 or anything in TREC run format)
into a reranked run by asking a language model, for every pair of top
candidates, which passage better answers the query in both slot orders,
then aggregating the order-swap-consistent preferences. Prompts can carry
in-context examples sampled from the most similar training queries, with
relevant passages paired against mid-rank hard negatives.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .backend import (
    Backend,
    BackendRequest,
    BackendResponse,
    CachingBackend,
    HttpBackend,
    OracleBackend,
    OracleWorld,
    RequestContext,
    ResponseCache,
    load_oracle_gold,
    make_backend,
)
from .config import ExperimentConfig, load_config
from .dense import EmbeddingStore, fetch_embedding, load_embeddings, top_k_cosine
from .errors import (
    BackendError,
    ComparisonError,
    ConfigError,
    OracleError,
    ParseError,
    PrpError,
    RenderError,
    ValidationError,
)
from .icl import (
    IclExample,
    Neighborhood,
    SamplerConfig,
    Selector,
    sample_examples,
    select_neighborhood,
)
from .io import (
    read_jsonl_corpus,
    read_qrels,
    read_trec_run,
    read_tsv_queries,
    write_trec_run,
)
from .metrics import (
    LocalityReport,
    MetricReport,
    TTestResult,
    ap_at,
    jaccard_neighborhood,
    locality_report,
    ndcg_at,
    paired_t_test,
)
from .pipeline import BatchResult, QueryProvenance, rerank_all, write_provenance
from .prompts import (
    PromptMode,
    PromptTemplate,
    RenderedPrompt,
    default_template,
    load_template,
    render_pairwise,
    render_pointwise,
    render_setwise,
)
from .rerank import (
    CallPolicy,
    PreferenceOutcome,
    allpairs_scores,
    pairwise_preference,
    pointwise_scores,
    rerank,
    setwise_order,
)
from .sparse import (
    InvertedIndex,
    analyze,
    bm25_search,
    build_index,
    rank_window,
    term_set_similarity,
)
from .types import (
    Corpus,
    Document,
    Qrels,
    Query,
    QuerySet,
    RunEntry,
    RunList,
    ScoredHit,
)

__all__ = [
    "__version__",
    "Backend",
    "BackendError",
    "BackendRequest",
    "BackendResponse",
    "BatchResult",
    "CachingBackend",
    "CallPolicy",
    "ComparisonError",
    "ConfigError",
    "Corpus",
    "Document",
    "EmbeddingStore",
    "ExperimentConfig",
    "HttpBackend",
    "IclExample",
    "InvertedIndex",
    "LocalityReport",
    "MetricReport",
    "Neighborhood",
    "OracleBackend",
    "OracleError",
    "OracleWorld",
    "ParseError",
    "PreferenceOutcome",
    "PromptMode",
    "PromptTemplate",
    "PrpError",
    "Qrels",
    "Query",
    "QueryProvenance",
    "QuerySet",
    "RenderError",
    "RenderedPrompt",
    "RequestContext",
    "ResponseCache",
    "RunEntry",
    "RunList",
    "SamplerConfig",
    "ScoredHit",
    "Selector",
    "TTestResult",
    "ValidationError",
    "allpairs_scores",
    "analyze",
    "ap_at",
    "bm25_search",
    "build_index",
    "default_template",
    "fetch_embedding",
    "jaccard_neighborhood",
    "load_config",
    "load_embeddings",
    "load_oracle_gold",
    "load_template",
    "locality_report",
    "make_backend",
    "ndcg_at",
    "paired_t_test",
    "pairwise_preference",
    "pointwise_scores",
    "rank_window",
    "read_jsonl_corpus",
    "read_qrels",
    "read_trec_run",
    "read_tsv_queries",
    "rerank",
    "rerank_all",
    "render_pairwise",
    "render_pointwise",
    "render_setwise",
    "sample_examples",
    "select_neighborhood",
    "setwise_order",
    "term_set_similarity",
    "top_k_cosine",
    "write_provenance",
    "write_trec_run",
]
