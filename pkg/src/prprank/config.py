"""Experiment configuration: JSON file plus command-line overrides.

The configuration is a nested structure of plain dataclasses so every knob
has a typed default in exactly one place. Unknown keys in the JSON are
rejected rather than ignored, catching typos like ``"poolsize"`` before
they silently fall back to defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .icl import Selector
from .prompts import PromptMode


@dataclass
class PathSettings:
    """Where inputs live and outputs land."""

    corpus: str | None = None
    queries: str | None = None
    training_queries: str | None = None
    training_qrels: str | None = None
    qrels: str | None = None
    first_stage_run: str | None = None
    corpus_index: str | None = None
    training_query_index: str | None = None
    embeddings: str | None = None
    output_run: str | None = None
    provenance: str | None = None
    report_dir: str | None = None


@dataclass
class SamplerSettings:
    """Neighborhood and hard-negative sampling knobs."""

    pool_size: int = 10
    neg_lo: int = 100
    neg_hi: int = 200
    relevance_threshold: int = 1


@dataclass
class OracleSettings:
    """Simulated-model backend (gold utilities plus seeded noise)."""

    gold_path: str | None = None
    noise: float = 0.0
    seed: int = 0
    locality_factor: float = 1.0


@dataclass
class BackendSettings:
    """Which model backend to call and how to call it."""

    kind: str = "http"
    url: str | None = None
    key_env: str = "PRP_BACKEND_KEY"
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 0.1
    parallelism: int = 8
    logprobs_top_n: int = 20
    cache_path: str | None = None
    oracle: OracleSettings = field(default_factory=OracleSettings)


@dataclass
class EvalSettings:
    """Metric cutoffs and significance level."""

    ndcg_cutoff: int = 10
    ap_cutoff: int = 100
    binary_threshold: int = 2
    alpha: float = 0.05


@dataclass
class ExperimentConfig:
    """Top-level experiment description."""

    mode: str = "pairwise"
    shots: int = 0
    selector: str = "lex"
    static_ids: list[str] = field(default_factory=list)
    depth: int = 100
    set_size: int = 4
    seed: int = 0
    template_path: str | None = None
    truncation_budget: int = 2000
    workers: int = 4
    run_tag: str | None = None
    embed_endpoint: str | None = None
    paths: PathSettings = field(default_factory=PathSettings)
    sampler: SamplerSettings = field(default_factory=SamplerSettings)
    backend: BackendSettings = field(default_factory=BackendSettings)
    eval: EvalSettings = field(default_factory=EvalSettings)

    def prompt_mode(self) -> PromptMode:
        try:
            return PromptMode(self.mode)
        except ValueError:
            raise ConfigError(
                f"unknown mode {self.mode!r} (expected pairwise, pointwise, or setwise)"
            ) from None

    def selector_kind(self) -> Selector:
        try:
            return Selector(self.selector)
        except ValueError:
            raise ConfigError(
                f"unknown selector {self.selector!r} (expected lex, sem, or static)"
            ) from None

    def effective_run_tag(self) -> str:
        if self.run_tag:
            return self.run_tag
        if self.shots == 0:
            return f"{self.mode}-0s"
        return f"{self.mode}-{self.selector}-{self.shots}s"


_NESTED = {
    "paths": PathSettings,
    "sampler": SamplerSettings,
    "backend": BackendSettings,
    "eval": EvalSettings,
    "oracle": OracleSettings,
}


def _build(cls: type, data: dict[str, Any], *, where: str) -> Any:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{where}: unknown key {key!r}")
        nested = _NESTED.get(key)
        if nested is not None and key in ("paths", "sampler", "backend", "eval", "oracle"):
            kwargs[key] = _build(nested, value, where=f"{where}.{key}")
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from None


def load_config(path: str | Path) -> ExperimentConfig:
    """Read an experiment config from a JSON file, rejecting unknown keys."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e.msg} (line {e.lineno})") from None
    return _build(ExperimentConfig, data, where=str(path))


def apply_env(config: ExperimentConfig) -> ExperimentConfig:
    """Apply environment overrides (PRP_BACKEND_URL)."""
    url = os.environ.get("PRP_BACKEND_URL")
    if url:
        config.backend.url = url
    return config


def require_paths(config: ExperimentConfig, *names: str) -> None:
    """Fail with a ConfigError naming every missing or absent input path.

    Output paths are not checked here (they need not pre-exist); callers
    pass only the inputs a command reads.
    """
    missing = [n for n in names if getattr(config.paths, n) in (None, "")]
    if missing:
        raise ConfigError(
            "missing required path settings: " + ", ".join(sorted(missing))
        )
    absent = [
        f"{n} ({getattr(config.paths, n)})"
        for n in names
        if not Path(getattr(config.paths, n)).exists()
    ]
    if absent:
        raise ConfigError("input paths do not exist: " + ", ".join(sorted(absent)))


def validate_common(config: ExperimentConfig) -> None:
    """Cross-field checks shared by every command."""
    if config.shots < 0:
        raise ConfigError(f"shots must be non-negative, got {config.shots}")
    if config.depth < 1:
        raise ConfigError(f"depth must be >= 1, got {config.depth}")
    if config.mode in ("pairwise", "setwise") and config.depth < 2:
        raise ConfigError(
            f"{config.mode} reranking compares candidates, so depth must be >= 2"
        )
    if config.set_size < 2:
        raise ConfigError(f"set_size must be >= 2, got {config.set_size}")
    if config.workers < 1:
        raise ConfigError(f"workers must be >= 1, got {config.workers}")
    if config.truncation_budget < 1:
        raise ConfigError(
            f"truncation_budget must be >= 1, got {config.truncation_budget}"
        )
    if config.sampler.pool_size < config.shots:
        raise ConfigError(
            f"sampler.pool_size ({config.sampler.pool_size}) must be >= shots ({config.shots})"
        )
    if not 0 <= config.sampler.neg_lo < config.sampler.neg_hi:
        raise ConfigError(
            f"sampler window must satisfy 0 <= neg_lo < neg_hi, got "
            f"({config.sampler.neg_lo}, {config.sampler.neg_hi}]"
        )
    if config.backend.kind not in ("http", "oracle"):
        raise ConfigError(
            f"backend.kind must be 'http' or 'oracle', got {config.backend.kind!r}"
        )
    if config.backend.parallelism < 1:
        raise ConfigError(
            f"backend.parallelism must be >= 1, got {config.backend.parallelism}"
        )
    if not 0.0 <= config.backend.oracle.noise <= 1.0:
        raise ConfigError(
            f"oracle noise must be in [0, 1], got {config.backend.oracle.noise}"
        )
    if not 0.0 <= config.backend.oracle.locality_factor <= 1.0:
        raise ConfigError(
            "oracle locality factor must be in [0, 1], got "
            f"{config.backend.oracle.locality_factor}"
        )
    if config.eval.ndcg_cutoff < 1 or config.eval.ap_cutoff < 1:
        raise ConfigError("metric cutoffs must be >= 1")
    if config.eval.binary_threshold < 1:
        raise ConfigError(
            f"binary threshold must be >= 1, got {config.eval.binary_threshold}"
        )
    if not 0.0 < config.eval.alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {config.eval.alpha}")
    config.prompt_mode()
    config.selector_kind()
    if config.selector_kind() is Selector.STATIC and config.shots > 0 and not config.static_ids:
        raise ConfigError("static selector with shots > 0 requires static_ids")
