"""HTTP backend parsing/retries/cache and the deterministic oracle."""

from __future__ import annotations

import json
import threading

import httpx
import pytest

from prprank.backend import (
    BackendRequest,
    BackendResponse,
    CachingBackend,
    HttpBackend,
    OracleBackend,
    OracleWorld,
    RequestContext,
    ResponseCache,
    extract_logprobs,
    load_oracle_gold,
    make_backend,
)
from prprank.errors import BackendError, OracleError, ParseError, ValidationError


def completion_body(top: dict[str, float] | None = None, text: str = "1") -> dict:
    choice: dict = {"text": text}
    if top is not None:
        choice["logprobs"] = {"top_logprobs": [top]}
    return {"choices": [choice]}


class TestExtractLogprobs:
    def test_reads_top_logprobs(self):
        lp, raw, unparseable = extract_logprobs(
            completion_body({"1": -0.1, "2": -2.3}), ("1", "2")
        )
        assert lp == {"1": -0.1, "2": -2.3}
        assert raw == "1"
        assert not unparseable

    def test_leading_space_tokens_normalized(self):
        lp, _, unparseable = extract_logprobs(
            completion_body({" 1": -0.5, " 2": -1.5}), ("1", "2")
        )
        assert lp["1"] == -0.5 and lp["2"] == -1.5
        assert not unparseable

    def test_absent_candidate_floored_below_observed(self):
        lp, _, unparseable = extract_logprobs(
            completion_body({"1": -0.2, "the": -1.0}), ("1", "2")
        )
        assert lp["1"] == -0.2
        assert lp["2"] == -11.0
        assert not unparseable

    def test_no_candidate_observed_is_unparseable(self):
        lp, _, unparseable = extract_logprobs(
            completion_body({"yes": -0.1, "no": -0.4}), ("1", "2")
        )
        assert unparseable
        assert lp["1"] == lp["2"]

    def test_text_fallback_exact_match(self):
        lp, raw, unparseable = extract_logprobs(completion_body(text=" 2"), ("1", "2"))
        assert not unparseable
        assert lp["2"] == 0.0 and lp["1"] < 0.0
        assert raw == " 2"

    def test_text_fallback_prefix_match(self):
        lp, _, unparseable = extract_logprobs(
            completion_body(text="2 is better"), ("1", "2")
        )
        assert not unparseable
        assert lp["2"] > lp["1"]

    def test_text_fallback_ambiguous_is_unparseable(self):
        _, _, unparseable = extract_logprobs(
            completion_body(text="neither"), ("1", "2")
        )
        assert unparseable

    def test_empty_choices_rejected(self):
        with pytest.raises(BackendError, match="choices"):
            extract_logprobs({"choices": []}, ("1", "2"))


class TestBackendRequest:
    def test_needs_two_distinct_tokens(self):
        with pytest.raises(ValidationError):
            BackendRequest("p", ("1",))
        with pytest.raises(ValidationError):
            BackendRequest("p", ("1", "1"))
        with pytest.raises(ValidationError):
            BackendRequest("", ("1", "2"))


class TestHttpBackend:
    def test_payload_shape_and_auth(self):
        seen = {}

        def handler(request: httpx.Request):
            seen["payload"] = json.loads(request.content)
            seen["auth"] = request.headers.get("authorization")
            return httpx.Response(200, json=completion_body({"1": -0.1, "2": -1.0}))

        client = httpx.Client(transport=httpx.MockTransport(handler))
        backend = HttpBackend("http://llm/v1", api_key="sk-test", client=client)
        resp = backend.score(BackendRequest("which is better?", ("1", "2")))
        assert seen["payload"]["prompt"] == "which is better?"
        assert seen["payload"]["max_tokens"] == 1
        assert seen["payload"]["temperature"] == 0
        assert seen["payload"]["logprobs"] >= 2
        assert seen["auth"] == "Bearer sk-test"
        assert resp.logprobs["1"] == -0.1

    def test_retries_then_succeeds(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] < 3:
                return httpx.Response(502)
            return httpx.Response(200, json=completion_body({"1": -0.3, "2": -0.9}))

        client = httpx.Client(transport=httpx.MockTransport(handler))
        backend = HttpBackend("http://llm/v1", client=client, backoff_base=0.0)
        resp = backend.score(BackendRequest("p", ("1", "2")))
        assert calls["n"] == 3
        assert not resp.unparseable

    def test_exhaustion_reports_attempts(self):
        def handler(request):
            return httpx.Response(500)

        client = httpx.Client(transport=httpx.MockTransport(handler))
        backend = HttpBackend("http://llm/v1", client=client, backoff_base=0.0)
        with pytest.raises(BackendError) as err:
            backend.score(BackendRequest("p", ("1", "2"), max_retries=2))
        assert err.value.attempts == 3
        assert err.value.last_status == 500

    def test_client_error_fails_fast(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(403)

        client = httpx.Client(transport=httpx.MockTransport(handler))
        backend = HttpBackend("http://llm/v1", client=client, backoff_base=0.0)
        with pytest.raises(BackendError, match="403"):
            backend.score(BackendRequest("p", ("1", "2")))
        assert calls["n"] == 1


class TestResponseCache:
    def test_round_trip_and_key_sensitivity(self):
        cache = ResponseCache()
        resp = BackendResponse({"1": -0.1, "2": -0.5}, "1", 0.01)
        cache.put("prompt", ("1", "2"), resp)
        assert cache.get("prompt", ("1", "2")) == resp
        assert cache.get("prompt!", ("1", "2")) is None
        assert cache.get("prompt", ("1", "3")) is None

    def test_persistence(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        cache = ResponseCache(path)
        cache.put("p1", ("1", "2"), BackendResponse({"1": -0.1, "2": -0.5}, "1", 0.0))
        cache.put("p2", ("1", "2"), BackendResponse({"1": -0.9, "2": -0.2}, "2", 0.0))
        reloaded = ResponseCache(path)
        assert len(reloaded) == 2
        assert reloaded.get("p2", ("1", "2")).logprobs["2"] == -0.2

    def test_corrupt_cache_rejected(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        path.write_text('{"key": "x"}\n')
        with pytest.raises(ParseError, match="cache"):
            ResponseCache(path)


class ScriptedBackend:
    """Returns canned responses and counts calls; for cache tests."""

    def __init__(self, logprobs: dict[str, float]):
        self.logprobs = logprobs
        self.calls = 0
        self._lock = threading.Lock()

    def score(self, request, context=None):
        with self._lock:
            self.calls += 1
        return BackendResponse(dict(self.logprobs), "", 0.0)


class TestCachingBackend:
    def test_second_call_hits(self):
        inner = ScriptedBackend({"1": -0.1, "2": -0.2})
        backend = CachingBackend(inner, ResponseCache())
        ctx = RequestContext(query_id="q1")
        request = BackendRequest("p", ("1", "2"))
        backend.score(request, ctx)
        backend.score(request, ctx)
        assert inner.calls == 1
        stats = backend.stats("q1")
        assert stats.hits == 1 and stats.misses == 1
        assert stats.hit_rate == 0.5

    def test_stats_keyed_by_query(self):
        backend = CachingBackend(
            ScriptedBackend({"1": -0.1, "2": -0.2}), ResponseCache()
        )
        backend.score(BackendRequest("p", ("1", "2")), RequestContext(query_id="a"))
        backend.score(BackendRequest("p", ("1", "2")), RequestContext(query_id="b"))
        assert backend.stats("a").misses == 1
        assert backend.stats("b").hits == 1


GOLD = {("q1", "da"): 3.0, ("q1", "db"): 1.0, ("q1", "dc"): 1.0, ("q1", "dz"): -2.0}


def oracle(noise=0.0, seed=0, locality=1.0) -> OracleBackend:
    return OracleBackend(
        OracleWorld(gold=GOLD, noise_rate=noise, seed=seed, locality_factor=locality)
    )


def pair_request() -> BackendRequest:
    return BackendRequest("ignored prompt", ("1", "2"))


class TestOracleBackend:
    def test_higher_utility_wins_first_slot(self):
        resp = oracle().score(
            pair_request(), RequestContext(query_id="q1", doc_ids=("da", "db"))
        )
        assert resp.logprobs["1"] > resp.logprobs["2"]
        assert resp.raw_generation == "1"

    def test_higher_utility_wins_second_slot(self):
        resp = oracle().score(
            pair_request(), RequestContext(query_id="q1", doc_ids=("db", "da"))
        )
        assert resp.logprobs["2"] > resp.logprobs["1"]

    def test_tie_goes_to_first_slot(self):
        resp = oracle().score(
            pair_request(), RequestContext(query_id="q1", doc_ids=("db", "dc"))
        )
        assert resp.raw_generation == "1"

    def test_context_required(self):
        with pytest.raises(OracleError, match="context"):
            oracle().score(pair_request())

    def test_missing_gold_entry(self):
        with pytest.raises(OracleError, match="gold"):
            oracle().score(
                pair_request(), RequestContext(query_id="q1", doc_ids=("da", "nope"))
            )

    def test_noise_is_deterministic(self):
        ctx = RequestContext(query_id="q1", doc_ids=("da", "db"))
        a = oracle(noise=0.5, seed=11).score(pair_request(), ctx)
        b = oracle(noise=0.5, seed=11).score(pair_request(), ctx)
        assert a.raw_generation == b.raw_generation

    def test_noise_one_always_flips(self):
        ctx = RequestContext(query_id="q1", doc_ids=("da", "db"))
        resp = oracle(noise=1.0, seed=3).score(pair_request(), ctx)
        assert resp.raw_generation == "2"

    def test_locality_reduces_noise_when_terms_shared(self):
        ctx_shared = RequestContext(
            query_id="q1",
            query_text="everest height",
            doc_ids=("da", "db"),
            example_query_texts=("height of k2",),
        )
        ctx_far = RequestContext(
            query_id="q1",
            query_text="everest height",
            doc_ids=("da", "db"),
            example_query_texts=("pasta recipes",),
        )
        flips_shared = 0
        flips_far = 0
        for seed in range(300):
            backend = oracle(noise=0.5, seed=seed, locality=0.2)
            if backend.score(pair_request(), ctx_shared).raw_generation == "2":
                flips_shared += 1
            if backend.score(pair_request(), ctx_far).raw_generation == "2":
                flips_far += 1
        # Shared-term examples flip ~10% of the time, far ones ~50%.
        assert flips_shared < flips_far
        assert flips_shared < 60
        assert flips_far > 100

    def test_locality_flips_are_subset_of_baseline(self):
        ctx_shared = RequestContext(
            query_id="q1",
            query_text="everest height",
            doc_ids=("da", "db"),
            example_query_texts=("height of k2",),
        )
        ctx_none = RequestContext(
            query_id="q1", query_text="everest height", doc_ids=("da", "db")
        )
        for seed in range(100):
            few = oracle(noise=0.4, seed=seed, locality=0.25)
            zero = oracle(noise=0.4, seed=seed)
            if few.score(pair_request(), ctx_shared).raw_generation == "2":
                assert zero.score(pair_request(), ctx_none).raw_generation == "2"

    def test_pointwise_uses_sign_of_utility(self):
        req = BackendRequest("p", ("true", "false"))
        resp = oracle().score(req, RequestContext(query_id="q1", doc_ids=("da",)))
        assert resp.logprobs["true"] > resp.logprobs["false"]
        resp = oracle().score(req, RequestContext(query_id="q1", doc_ids=("dz",)))
        assert resp.logprobs["false"] > resp.logprobs["true"]

    def test_setwise_picks_argmax(self):
        req = BackendRequest("p", ("1", "2", "3"))
        resp = oracle().score(
            req, RequestContext(query_id="q1", doc_ids=("db", "da", "dz"))
        )
        assert resp.raw_generation == "2"


class TestLoadOracleGold:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        path.write_text(
            json.dumps({"query_id": "q", "doc_id": "d", "utility": 2.5}) + "\n"
        )
        assert load_oracle_gold(path) == {("q", "d"): 2.5}

    def test_duplicate_rejected(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        row = json.dumps({"query_id": "q", "doc_id": "d", "utility": 1})
        path.write_text(row + "\n" + row + "\n")
        with pytest.raises(ValidationError, match="duplicate"):
            load_oracle_gold(path)

    def test_missing_field(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        path.write_text('{"query_id": "q", "utility": 1}\n')
        with pytest.raises(ParseError):
            load_oracle_gold(path)


class TestMakeBackend:
    def test_env_url_override(self, monkeypatch, tmp_path):
        monkeypatch.setenv("PRP_BACKEND_URL", "http://from-env/v1")
        backend = make_backend("http", url="http://from-config/v1")
        assert backend.url == "http://from-env/v1"
        backend.close()

    def test_http_requires_url(self, monkeypatch):
        monkeypatch.delenv("PRP_BACKEND_URL", raising=False)
        with pytest.raises(ValidationError, match="url"):
            make_backend("http")

    def test_oracle_requires_gold(self):
        with pytest.raises(ValidationError, match="gold"):
            make_backend("oracle")

    def test_unknown_kind(self):
        with pytest.raises(ValidationError, match="kind"):
            make_backend("quantum")
