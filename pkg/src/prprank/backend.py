"""LLM scoring backends: a real HTTP client and a deterministic oracle.

Every backend answers the same question: given a rendered prompt and the
set of candidate answer tokens, what log-probability does the model assign
to each candidate at the first generated position? Downstream code only
compares these numbers, so a backend may invent values as long as their
order reflects its preference.

The HTTP backend talks to a completion endpoint with OpenAI-style
``logprobs``; responses are cached on disk keyed by prompt + candidates,
and concurrent calls are capped by a semaphore. The oracle backend derives
preferences from a gold utility table with seeded noise, giving tests and
demos a fully reproducible "model".
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx
import numpy as np

from ._http import post_json
from .errors import BackendError, OracleError, ParseError, ValidationError
from .icl import derive_seed
from .sparse import analyze


@dataclass(frozen=True)
class BackendRequest:
    """One scoring call: the prompt plus the legal answer tokens."""

    prompt_text: str
    candidate_tokens: tuple[str, ...]
    max_retries: int = 3
    timeout: float = 30.0

    def __post_init__(self) -> None:
        if not self.prompt_text:
            raise ValidationError("prompt text must be non-empty")
        if len(self.candidate_tokens) < 2:
            raise ValidationError("a scoring call needs at least 2 candidate tokens")
        if len(set(self.candidate_tokens)) != len(self.candidate_tokens):
            raise ValidationError("candidate tokens must be distinct")


@dataclass(frozen=True)
class BackendResponse:
    """Per-candidate log-probabilities at the first generated position."""

    logprobs: dict[str, float]
    raw_generation: str
    latency: float
    unparseable: bool = False

    def __post_init__(self) -> None:
        for token, lp in self.logprobs.items():
            if not math.isfinite(lp):
                raise ValidationError(f"non-finite logprob for token {token!r}")


@dataclass(frozen=True)
class RequestContext:
    """Identity of the comparison a request belongs to.

    Backends that simulate models (the oracle) need to know *which* query
    and documents a prompt is about without parsing prompt text; real HTTP
    backends ignore everything except ``query_id``, which keys the cache
    statistics.
    """

    query_id: str
    query_text: str = ""
    doc_ids: tuple[str, ...] = ()
    example_query_texts: tuple[str, ...] = ()


class Backend(Protocol):
    def score(
        self, request: BackendRequest, context: RequestContext | None = None
    ) -> BackendResponse: ...


ABSENT_TOKEN_GAP = 10.0


def _normalize_token(token: str) -> str:
    """Completion tokenizers often attach the leading space to the token."""
    return token.strip()


def extract_logprobs(
    body: dict, candidate_tokens: tuple[str, ...]
) -> tuple[dict[str, float], str, bool]:
    """Pull per-candidate logprobs out of a completion response body.

    Returns ``(logprobs, raw_generation, unparseable)``. Candidates absent
    from the reported top tokens get a floor of (min observed - 10). When
    the response carries no logprobs at all, the generated text is matched
    against the candidates instead: an exact (whitespace-insensitive) match
    gets 0.0 and the rest the floor; no match marks the response
    unparseable with all candidates tied at the floor.
    """
    choices = body.get("choices")
    if not isinstance(choices, list) or not choices:
        raise BackendError("completion response has no choices")
    choice = choices[0]
    raw_text = choice.get("text", "")
    if not isinstance(raw_text, str):
        raw_text = str(raw_text)
    top: dict[str, float] = {}
    logprobs_obj = choice.get("logprobs")
    if isinstance(logprobs_obj, dict):
        tops = logprobs_obj.get("top_logprobs")
        if isinstance(tops, list) and tops and isinstance(tops[0], dict):
            for token, lp in tops[0].items():
                if isinstance(lp, (int, float)) and math.isfinite(float(lp)):
                    key = _normalize_token(str(token))
                    # Keep the best logprob when ' 1' and '1' both appear.
                    if key not in top or lp > top[key]:
                        top[key] = float(lp)
    if top:
        observed = [top[t] for t in map(_normalize_token, candidate_tokens) if t in top]
        if observed:
            floor = min(min(observed), min(top.values())) - ABSENT_TOKEN_GAP
            out = {
                t: top.get(_normalize_token(t), floor) for t in candidate_tokens
            }
            return out, raw_text, False
        floor = min(top.values()) - ABSENT_TOKEN_GAP
        return {t: floor for t in candidate_tokens}, raw_text, True
    # No usable logprobs: fall back to matching the generated text.
    generated = _normalize_token(raw_text)
    matched = [t for t in candidate_tokens if _normalize_token(t) == generated]
    if not matched and generated:
        prefixed = [t for t in candidate_tokens if generated.startswith(_normalize_token(t))]
        if len(prefixed) == 1:
            matched = prefixed
    if len(matched) == 1:
        out = {
            t: (0.0 if t == matched[0] else -ABSENT_TOKEN_GAP)
            for t in candidate_tokens
        }
        return out, raw_text, False
    return {t: -ABSENT_TOKEN_GAP for t in candidate_tokens}, raw_text, True


class HttpBackend:
    """Client for a JSON completion endpoint with first-token logprobs.

    Sends ``{"prompt", "max_tokens": 1, "temperature": 0, "logprobs": n}``
    and reads ``choices[0].logprobs.top_logprobs[0]``. An API key, when
    configured, travels as a bearer token. ``parallelism`` bounds in-flight
    requests across threads.
    """

    def __init__(
        self,
        url: str,
        *,
        api_key: str | None = None,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff_base: float = 0.1,
        parallelism: int = 8,
        logprobs_top_n: int = 20,
        client: httpx.Client | None = None,
    ) -> None:
        if not url:
            raise ValidationError("backend url must be non-empty")
        if parallelism < 1:
            raise ValidationError(f"parallelism must be >= 1, got {parallelism}")
        if logprobs_top_n < 2:
            raise ValidationError(f"logprobs top-n must be >= 2, got {logprobs_top_n}")
        self.url = url
        self._headers = {"Authorization": f"Bearer {api_key}"} if api_key else None
        self._timeout = timeout
        self._max_retries = max_retries
        self._backoff_base = backoff_base
        self._logprobs_top_n = logprobs_top_n
        self._semaphore = threading.Semaphore(parallelism)
        self._client = client if client is not None else httpx.Client(timeout=timeout)
        self._owns_client = client is None

    def close(self) -> None:
        if self._owns_client:
            self._client.close()

    def __enter__(self) -> "HttpBackend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def score(
        self, request: BackendRequest, context: RequestContext | None = None
    ) -> BackendResponse:
        payload = {
            "prompt": request.prompt_text,
            "max_tokens": 1,
            "temperature": 0,
            "logprobs": max(self._logprobs_top_n, len(request.candidate_tokens)),
        }
        start = time.monotonic()
        with self._semaphore:
            body = post_json(
                self._client,
                self.url,
                payload,
                headers=self._headers,
                timeout=request.timeout,
                max_retries=request.max_retries,
                backoff_base=self._backoff_base,
            )
        latency = time.monotonic() - start
        logprobs, raw, unparseable = extract_logprobs(body, request.candidate_tokens)
        return BackendResponse(
            logprobs=logprobs,
            raw_generation=raw,
            latency=latency,
            unparseable=unparseable,
        )


def _cache_key(prompt_text: str, candidate_tokens: tuple[str, ...]) -> str:
    h = hashlib.sha256()
    h.update(prompt_text.encode("utf-8"))
    for token in candidate_tokens:
        h.update(b"\x1f")
        h.update(token.encode("utf-8"))
    return h.hexdigest()


class ResponseCache:
    """Thread-safe prompt-response cache with JSONL persistence.

    Keys are content hashes over (prompt, candidate tokens), so any change
    to either yields a fresh entry. ``latency`` is stored but replayed
    responses report it unchanged; hit/miss accounting lives in the
    caching wrapper, not here.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self._path = Path(path) if path is not None else None
        self._entries: dict[str, BackendResponse] = {}
        self._lock = threading.Lock()
        if self._path is not None and self._path.exists():
            self._load()

    def _load(self) -> None:
        assert self._path is not None
        with open(self._path, "r", encoding="utf-8") as f:
            for line_no, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    response = BackendResponse(
                        logprobs={str(k): float(v) for k, v in obj["logprobs"].items()},
                        raw_generation=str(obj.get("raw_generation", "")),
                        latency=float(obj.get("latency", 0.0)),
                        unparseable=bool(obj.get("unparseable", False)),
                    )
                    self._entries[str(obj["key"])] = response
                except (KeyError, TypeError, ValueError, ValidationError) as e:
                    raise ParseError(self._path, line_no, f"bad cache entry: {e}") from None

    def __len__(self) -> int:
        return len(self._entries)

    def get(
        self, prompt_text: str, candidate_tokens: tuple[str, ...]
    ) -> BackendResponse | None:
        key = _cache_key(prompt_text, candidate_tokens)
        with self._lock:
            return self._entries.get(key)

    def put(
        self,
        prompt_text: str,
        candidate_tokens: tuple[str, ...],
        response: BackendResponse,
    ) -> None:
        key = _cache_key(prompt_text, candidate_tokens)
        record = json.dumps(
            {
                "key": key,
                "logprobs": response.logprobs,
                "raw_generation": response.raw_generation,
                "latency": response.latency,
                "unparseable": response.unparseable,
            },
            sort_keys=True,
        )
        with self._lock:
            fresh = key not in self._entries
            self._entries[key] = response
            if fresh and self._path is not None:
                with open(self._path, "a", encoding="utf-8") as f:
                    f.write(record + "\n")


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0


class CachingBackend:
    """Wrap any backend with a ResponseCache and per-query statistics."""

    def __init__(self, inner: Backend, cache: ResponseCache) -> None:
        self._inner = inner
        self._cache = cache
        self._lock = threading.Lock()
        self._stats: dict[str, CacheStats] = {}

    def score(
        self, request: BackendRequest, context: RequestContext | None = None
    ) -> BackendResponse:
        query_id = context.query_id if context is not None else ""
        cached = self._cache.get(request.prompt_text, request.candidate_tokens)
        if cached is not None:
            with self._lock:
                self._stats.setdefault(query_id, CacheStats()).hits += 1
            return cached
        response = self._inner.score(request, context)
        self._cache.put(request.prompt_text, request.candidate_tokens, response)
        with self._lock:
            self._stats.setdefault(query_id, CacheStats()).misses += 1
        return response

    def stats(self, query_id: str) -> CacheStats:
        with self._lock:
            return self._stats.get(query_id, CacheStats())


WINNER_LOGPROB = -0.1
LOSER_LOGPROB = -3.0


@dataclass(frozen=True)
class OracleWorld:
    """Gold utilities plus noise controls for the simulated model.

    ``gold`` maps (query_id, doc_id) to a real-valued utility; larger is
    better. ``noise_rate`` is the probability one call answers against the
    gold order. ``locality_factor`` scales that probability down when the
    prompt carries an in-context example sharing at least one analyzed
    term with the probe query, modeling a model that benefits from
    lexically close demonstrations.
    """

    gold: dict[tuple[str, str], float]
    noise_rate: float = 0.0
    seed: int = 0
    locality_factor: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValidationError(f"noise rate must be in [0, 1], got {self.noise_rate}")
        if not 0.0 <= self.locality_factor <= 1.0:
            raise ValidationError(
                f"locality factor must be in [0, 1], got {self.locality_factor}"
            )

    def utility(self, query_id: str, doc_id: str) -> float:
        try:
            return self.gold[(query_id, doc_id)]
        except KeyError:
            raise OracleError(
                f"no gold utility for document {doc_id!r} under query {query_id!r}"
            ) from None


def load_oracle_gold(path: str | Path) -> dict[tuple[str, str], float]:
    """Read gold utilities from JSONL rows
    ``{"query_id": ..., "doc_id": ..., "utility": ...}``."""
    gold: dict[tuple[str, str], float] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(path, line_no, f"invalid JSON: {e.msg}") from None
            try:
                key = (str(obj["query_id"]), str(obj["doc_id"]))
                utility = float(obj["utility"])
            except (KeyError, TypeError, ValueError):
                raise ParseError(
                    path, line_no, 'expected {"query_id", "doc_id", "utility"}'
                ) from None
            if key in gold:
                raise ValidationError(f"{path}:{line_no}: duplicate gold entry for {key}")
            gold[key] = utility
    if not gold:
        raise ValidationError(f"{path}: no gold utilities found")
    return gold


class OracleBackend:
    """Deterministic simulated model driven by gold utilities.

    Noise draws are keyed by (seed, query id, unordered document pair,
    ordered document pair), so the same logical comparison always flips or
    does not flip regardless of scheduling, while the two slot orders of a
    pair draw independently.
    """

    def __init__(self, world: OracleWorld) -> None:
        self._world = world

    def _effective_noise(self, context: RequestContext) -> float:
        noise = self._world.noise_rate
        if noise == 0.0 or self._world.locality_factor == 1.0:
            return noise
        if not context.example_query_texts:
            return noise
        query_terms = set(analyze(context.query_text))
        if not query_terms:
            return noise
        for text in context.example_query_texts:
            if query_terms & set(analyze(text)):
                return noise * self._world.locality_factor
        return noise

    def _noise_draw(self, context: RequestContext) -> float:
        rng = np.random.default_rng(
            derive_seed(
                self._world.seed,
                context.query_id,
                *sorted(context.doc_ids),
                *context.doc_ids,
            )
        )
        return float(rng.random())

    def score(
        self, request: BackendRequest, context: RequestContext | None = None
    ) -> BackendResponse:
        if context is None or not context.doc_ids:
            raise OracleError("oracle scoring requires a request context with doc ids")
        tokens = request.candidate_tokens
        if tokens == ("true", "false"):
            winner = (
                "true"
                if self._world.utility(context.query_id, context.doc_ids[0]) > 0
                else "false"
            )
        else:
            utilities = [
                self._world.utility(context.query_id, doc_id)
                for doc_id in context.doc_ids
            ]
            if len(utilities) != len(tokens):
                raise OracleError(
                    f"{len(tokens)} candidate tokens but {len(utilities)} documents"
                )
            # Ties resolve to the earliest slot, matching a reader who
            # cannot distinguish the passages.
            best = max(range(len(utilities)), key=lambda i: (utilities[i], -i))
            winner = tokens[best]
        if self._world.noise_rate > 0.0:
            u = self._noise_draw(context)
            if u < self._effective_noise(context):
                others = [t for t in tokens if t != winner]
                if len(others) == 1:
                    winner = others[0]
                else:
                    pick_rng = np.random.default_rng(
                        derive_seed(
                            self._world.seed,
                            "pick",
                            context.query_id,
                            *sorted(context.doc_ids),
                            *context.doc_ids,
                        )
                    )
                    winner = others[int(pick_rng.integers(len(others)))]
        logprobs = {
            t: (WINNER_LOGPROB if t == winner else LOSER_LOGPROB) for t in tokens
        }
        return BackendResponse(
            logprobs=logprobs, raw_generation=winner, latency=0.0, unparseable=False
        )


def make_backend(
    kind: str,
    *,
    url: str | None = None,
    api_key_env: str = "PRP_BACKEND_KEY",
    timeout: float = 30.0,
    max_retries: int = 3,
    backoff_base: float = 0.1,
    parallelism: int = 8,
    logprobs_top_n: int = 20,
    cache_path: str | Path | None = None,
    oracle_gold_path: str | Path | None = None,
    oracle_noise: float = 0.0,
    oracle_seed: int = 0,
    oracle_locality_factor: float = 1.0,
    client: httpx.Client | None = None,
) -> Backend:
    """Construct a backend from configuration values.

    ``kind`` is ``"http"`` or ``"oracle"``. The environment variable
    ``PRP_BACKEND_URL`` overrides ``url``; the variable named by
    ``api_key_env`` supplies the bearer token.
    """
    if kind == "http":
        env_url = os.environ.get("PRP_BACKEND_URL")
        resolved = env_url or url
        if not resolved:
            raise ValidationError(
                "http backend needs a url (config or PRP_BACKEND_URL)"
            )
        backend: Backend = HttpBackend(
            resolved,
            api_key=os.environ.get(api_key_env) or None,
            timeout=timeout,
            max_retries=max_retries,
            backoff_base=backoff_base,
            parallelism=parallelism,
            logprobs_top_n=logprobs_top_n,
            client=client,
        )
    elif kind == "oracle":
        if oracle_gold_path is None:
            raise ValidationError("oracle backend needs a gold utility file")
        world = OracleWorld(
            gold=load_oracle_gold(oracle_gold_path),
            noise_rate=oracle_noise,
            seed=oracle_seed,
            locality_factor=oracle_locality_factor,
        )
        backend = OracleBackend(world)
    else:
        raise ValidationError(f"unknown backend kind {kind!r}")
    if cache_path is not None:
        backend = CachingBackend(backend, ResponseCache(cache_path))
    return backend
