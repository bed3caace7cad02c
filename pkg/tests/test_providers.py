import json
import math
from datetime import datetime, timedelta, timezone

import pytest
import requests

from nwdkit.errors import (
    MissingCountError,
    NetworkError,
    ResponseParseError,
    SchemaVersionError,
    SnapshotBuildError,
)
from nwdkit.providers import (
    CountClient,
    HttpResponse,
    ProviderConfig,
    QueryRecord,
    RateLimiter,
    SnapshotCache,
    build_query,
    build_snapshot,
    cache_read,
    cache_write,
    fetch_plan,
)
from nwdkit.snapshot import TermSet

from synth import CorpusTransport, ScriptedTransport, VirtualClock, category_corpus

T0 = datetime(2024, 5, 1, 12, 0, tzinfo=timezone.utc)


def ticking_now():
    state = {"t": T0}

    def now():
        state["t"] += timedelta(seconds=1)
        return state["t"]

    return now


def client_for(transport, clock=None, **cfg):
    clock = clock or VirtualClock()
    config = ProviderConfig(**cfg)
    return CountClient(config, transport, clock=clock.clock, sleep=clock.sleep, now=ticking_now()), clock


def test_build_query_is_conjunctive_quoted():
    assert build_query(TermSet(["Macbeth", "shakespeare"])) == '"macbeth" "shakespeare"'
    assert build_query(TermSet(['say "hi"'])) == '"say hi"'


def test_recorded_mediawiki_response(fixtures_dir):
    body = (fixtures_dir / "mediawiki_shakespeare.json").read_text()
    client, _ = client_for(ScriptedTransport([HttpResponse(200, body)]))
    rec = client.fetch_count(["Shakespeare"])
    assert rec.count == 51842
    assert rec.termset == TermSet(["shakespeare"])
    assert rec.raw_query_string == '"shakespeare"'
    params = client.transport.calls[0][1]
    assert params["srsearch"] == '"shakespeare"' and params["srinfo"] == "totalhits"


def test_retry_after_503(fixtures_dir):
    body = (fixtures_dir / "mediawiki_shakespeare.json").read_text()
    transport = ScriptedTransport([HttpResponse(503, "busy"), HttpResponse(200, body)])
    client, clock = client_for(transport, backoff=0.5)
    rec = client.fetch_count(["shakespeare"])
    assert rec.count == 51842
    assert len(transport.calls) == 2
    assert 0.5 in clock.sleeps


def test_retries_exhausted():
    transport = ScriptedTransport([HttpResponse(429, "")] * 3)
    client, clock = client_for(transport, max_retries=2, backoff=1.0)
    with pytest.raises(NetworkError):
        client.fetch_count(["a"])
    assert len(transport.calls) == 3
    assert [s for s in clock.sleeps if s in (1.0, 2.0)] == [1.0, 2.0]


def test_network_exception_retried():
    body = json.dumps({"query": {"searchinfo": {"totalhits": 3}}})
    transport = ScriptedTransport([requests.ConnectionError("down"), HttpResponse(200, body)])
    client, _ = client_for(transport)
    assert client.fetch_count(["a"]).count == 3


def test_client_error_not_retried():
    transport = ScriptedTransport([HttpResponse(404, "")])
    client, _ = client_for(transport)
    with pytest.raises(NetworkError):
        client.fetch_count(["a"])
    assert len(transport.calls) == 1


def test_missing_totalhits_adds_no_record(fixtures_dir):
    body = (fixtures_dir / "mediawiki_no_totalhits.json").read_text()
    config = ProviderConfig()
    clock = VirtualClock()
    client = CountClient(config, ScriptedTransport([HttpResponse(200, body)] * 2),
                         clock=clock.clock, sleep=clock.sleep)
    cache = SnapshotCache(config.provider_id)
    with pytest.raises(SnapshotBuildError) as info:
        build_snapshot(config, [["shakespeare"]], cache, client)
    assert all(isinstance(e, ResponseParseError) for e in info.value.failures.values())
    assert cache.records == []


@pytest.mark.parametrize("text", ["not json", '{"error": {"code": "x"}}',
                                  '{"query": {"searchinfo": {"totalhits": -1}}}'])
def test_parse_errors(text):
    client, _ = client_for(ScriptedTransport([]))
    with pytest.raises(ResponseParseError):
        client.parse_count(text)


def test_generic_endpoint():
    transport = ScriptedTransport([HttpResponse(200, "<p>About 1,234,000 results</p>")])
    client, _ = client_for(transport, provider_kind="generic-count-endpoint",
                           endpoint_url="http://example.test/s", count_pattern=r"About ([\d,]+) results")
    assert client.fetch_count(["x"]).count == 1_234_000
    assert transport.calls[0][1] == {"q": '"x"'}


@pytest.mark.parametrize("rate", [0.5, 1.0, 2.0, 3.5])
def test_rate_limit_windows(rate):
    clock = VirtualClock()
    limiter = RateLimiter(rate, clock.clock, clock.sleep)
    times = []
    for i in range(25):
        limiter.wait()
        times.append(clock.now)
        clock.now += 0.01 * (i % 3)  # some work between calls
    for t in times:
        in_window = [u for u in times if t <= u < t + 1]
        assert len(in_window) <= math.ceil(rate)


def test_rate_limit_applies_to_client():
    body = json.dumps({"query": {"searchinfo": {"totalhits": 1}}})
    transport = ScriptedTransport([HttpResponse(200, body)] * 6)
    clock = VirtualClock()
    stamps = []
    wrapped = lambda url, params, timeout: (stamps.append(clock.now), transport(url, params, timeout))[1]
    client, _ = client_for(wrapped, clock=clock, rate_limit=2.0)
    for term in "abcdef":
        client.fetch_count([term])
    assert all(b - a >= 0.5 - 1e-12 for a, b in zip(stamps, stamps[1:]))


def test_warm_cache_makes_no_requests(fixtures_dir):
    cache = cache_read(fixtures_dir / "shakespeare_counts.json")
    config = ProviderConfig(normalizer_term="the")
    client, _ = client_for(ScriptedTransport([]))
    snap = build_snapshot(config, [["shakespeare", "macbeth"], ["shakespeare", "macbeth", "hamlet"]], cache, client)
    assert client.requests_made == 0
    assert snap.count(TermSet(["shakespeare", "macbeth"])) == 7_730_000
    assert snap.normalizer == 25_270_000_000


def test_cold_cache_fetches_plan_once():
    docs = category_corpus(1, docs_per_class=5)
    transport = CorpusTransport(docs)
    config = ProviderConfig()
    client, _ = client_for(transport)
    cache = SnapshotCache(config.provider_id)
    wanted = [["red", "green"], ["red", "fox"]]
    snap = build_snapshot(config, wanted, cache, client)
    plan = fetch_plan(config, wanted)
    assert client.requests_made == len(plan) == 6
    assert snap.count(TermSet(["red", "green"])) == transport.index.frequency(["red", "green"])
    again = build_snapshot(config, wanted, cache, client)
    assert client.requests_made == 6
    assert dict(again.counts) == dict(snap.counts)


def test_partial_failure_keeps_successes():
    ok = HttpResponse(200, json.dumps({"query": {"searchinfo": {"totalhits": 5}}}))
    # plan order: "the", "a", "b", then {a, b}
    transport = ScriptedTransport([ok, ok, HttpResponse(404, ""), ok])
    config = ProviderConfig()
    client, _ = client_for(transport)
    cache = SnapshotCache(config.provider_id)
    with pytest.raises(SnapshotBuildError) as info:
        build_snapshot(config, [["a", "b"]], cache, client)
    assert set(info.value.failures) == {TermSet(["b"])}
    assert [r.termset for r in cache.records] == [TermSet(["the"]), TermSet(["a"]), TermSet(["a", "b"])]


def test_cache_roundtrip(tmp_path, fixtures_dir):
    cache = cache_read(fixtures_dir / "shakespeare_counts.json")
    path = tmp_path / "cache.json"
    cache_write(cache, path)
    again = cache_read(path)
    assert again.records == cache.records
    assert again.provider == cache.provider
    assert dict(again.snapshot().counts) == dict(cache.snapshot().counts)


def test_cache_version_checked(tmp_path):
    path = tmp_path / "cache.json"
    path.write_text(json.dumps({"version": 2, "provider": "p", "normalizer_term": "the", "records": []}))
    with pytest.raises(SchemaVersionError):
        cache_read(path)


def test_latest_record_wins():
    ts = TermSet(["a"])
    cache = SnapshotCache("p", "a")
    cache.append(QueryRecord(ts, '"a"', 5, T0))
    cache.append(QueryRecord(ts, '"a"', 9, T0 + timedelta(days=1)))
    assert cache.lookup(["a"]).count == 9
    assert cache.snapshot().normalizer == 9


def test_missing_normalizer():
    cache = SnapshotCache("p", "the", [QueryRecord(TermSet(["a"]), '"a"', 5, T0)])
    with pytest.raises(MissingCountError):
        cache.snapshot()


def test_config_from_dict_and_env():
    cfg = ProviderConfig.from_dict({"kind": "mediawiki", "rate_limit": 2}, env={})
    assert cfg.rate_limit == 2 and cfg.endpoint_url.startswith("https://")
    cfg = ProviderConfig.from_dict({}, env={"NWDKIT_ENDPOINT": "http://localhost:9/api"})
    assert cfg.endpoint_url == "http://localhost:9/api"
    with pytest.raises(ValueError, match="unknown"):
        ProviderConfig.from_dict({"speed": 3}, env={})
    with pytest.raises(ValueError):
        ProviderConfig(rate_limit=0)


def test_config_load_resolves_cache(tmp_path):
    path = tmp_path / "provider.json"
    path.write_text(json.dumps({"cache": "counts.json"}))
    cfg = ProviderConfig.load(path, env={})
    assert cfg.cache_path == str(tmp_path / "counts.json")
