"""Page counts from live search APIs, with rate limiting and a replayable cache.

A fetch plan is run once against the network; every successful count is
appended to a :class:`SnapshotCache`, which can be written to disk and
replayed later without any requests.
"""
from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import requests

from .errors import (
    FetchError,
    MissingCountError,
    NetworkError,
    ResponseParseError,
    SchemaError,
    SchemaVersionError,
    SnapshotBuildError,
)
from .snapshot import FrequencySnapshot, Provenance, TermSet, rfc3339

log = logging.getLogger(__name__)

CACHE_VERSION = 1
ENDPOINT_ENV = "NWDKIT_ENDPOINT"
KINDS = ("mediawiki", "generic-count-endpoint")
USER_AGENT = "nwdkit/0.1 (page-count research client)"


@dataclass(frozen=True)
class ProviderConfig:
    provider_kind: str = "mediawiki"
    endpoint_url: str = "https://en.wikipedia.org/w/api.php"
    normalizer_term: str = "the"
    rate_limit: float = 1.0
    max_retries: int = 3
    timeout: float = 10.0
    backoff: float = 0.5
    # generic-count-endpoint only
    count_pattern: str | None = None
    query_param: str = "q"
    cache_path: str | None = None

    def __post_init__(self):
        if self.provider_kind not in KINDS:
            raise ValueError(f"provider_kind must be one of {KINDS}, got {self.provider_kind!r}")
        if not self.endpoint_url:
            raise ValueError("endpoint_url must be non-empty")
        if not self.rate_limit > 0:
            raise ValueError("rate_limit must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.provider_kind == "generic-count-endpoint":
            if not self.count_pattern:
                raise ValueError("generic-count-endpoint needs a count_pattern")
            re.compile(self.count_pattern)

    @property
    def provider_id(self) -> str:
        return f"{self.provider_kind}:{self.endpoint_url}"

    @classmethod
    def from_dict(cls, data: Mapping, env: Mapping | None = None) -> "ProviderConfig":
        env = os.environ if env is None else env
        data = dict(data)
        if "kind" in data:
            data["provider_kind"] = data.pop("kind")
        if "cache" in data:
            data["cache_path"] = data.pop("cache")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown provider option(s): {', '.join(sorted(unknown))}")
        if env.get(ENDPOINT_ENV):
            data["endpoint_url"] = env[ENDPOINT_ENV]
        return cls(**data)

    @classmethod
    def load(cls, path, env: Mapping | None = None) -> "ProviderConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = cls.from_dict(data, env)
        if cfg.cache_path and not Path(cfg.cache_path).is_absolute():
            cfg = replace(cfg, cache_path=str(Path(path).parent / cfg.cache_path))
        return cfg


@dataclass(frozen=True)
class QueryRecord:
    termset: TermSet
    raw_query_string: str
    count: int
    fetched_at: datetime
    http_status: int = 200

    def to_dict(self) -> dict:
        return {
            "terms": list(self.termset.terms),
            "count": self.count,
            "fetched_at": rfc3339(self.fetched_at),
            "query": self.raw_query_string,
            "http_status": self.http_status,
        }

    @classmethod
    def from_dict(cls, row: Mapping) -> "QueryRecord":
        ts = TermSet(row["terms"])
        count = row["count"]
        if isinstance(count, bool) or not isinstance(count, int) or count < 0:
            raise SchemaError(f"record for {ts} has invalid count {count!r}")
        return cls(
            ts,
            row.get("query", build_query(ts)),
            count,
            _parse_time(row["fetched_at"]),
            row.get("http_status", 200),
        )


def _parse_time(text: str) -> datetime:
    moment = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return moment


def build_query(termset: TermSet) -> str:
    """Conjunctive query: every term double-quoted, joined by spaces."""
    return " ".join('"' + t.replace('"', "") + '"' for t in termset)


class RateLimiter:
    """Spaces calls at least ``1 / rate`` seconds apart."""

    def __init__(self, rate: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if not rate > 0:
            raise ValueError("rate must be > 0")
        self.interval = 1.0 / rate
        self._clock = clock
        self._sleep = sleep
        self._next: float | None = None
        self._lock = threading.Lock()

    def wait(self) -> None:
        with self._lock:
            now = self._clock()
            if self._next is not None and now < self._next:
                self._sleep(self._next - now)
                now = max(self._clock(), self._next)
            self._next = now + self.interval


@dataclass(frozen=True)
class HttpResponse:
    status: int
    text: str


Transport = Callable[[str, Mapping, float], HttpResponse]


def requests_transport(session: requests.Session | None = None) -> Transport:
    session = session or requests.Session()
    session.headers.setdefault("User-Agent", USER_AGENT)

    def get(url, params, timeout):
        resp = session.get(url, params=dict(params), timeout=timeout)
        return HttpResponse(resp.status_code, resp.text)

    return get


def _retryable(status: int) -> bool:
    return status == 429 or status >= 500


class CountClient:
    """Fetches page counts for term sets from one provider.

    ``transport``, ``clock``, ``sleep`` and ``now`` are injectable so tests
    can run against recorded responses on a virtual clock.
    """

    def __init__(self, config: ProviderConfig, transport: Transport | None = None,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep,
                 now: Callable[[], datetime] = lambda: datetime.now(timezone.utc)):
        self.config = config
        self.transport = transport or requests_transport()
        self.limiter = RateLimiter(config.rate_limit, clock, sleep)
        self._sleep = sleep
        self._now = now
        self.requests_made = 0

    def params(self, query: str) -> dict:
        if self.config.provider_kind == "mediawiki":
            return {
                "action": "query",
                "list": "search",
                "format": "json",
                "srlimit": 1,
                "srinfo": "totalhits",
                "srsearch": query,
            }
        return {self.config.query_param: query}

    def parse_count(self, text: str) -> int:
        if self.config.provider_kind == "mediawiki":
            try:
                body = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ResponseParseError(f"response is not JSON: {exc}") from exc
            if isinstance(body, dict) and "error" in body:
                raise ResponseParseError(f"API error: {body['error']}")
            try:
                hits = body["query"]["searchinfo"]["totalhits"]
            except (KeyError, TypeError):
                raise ResponseParseError("response has no query.searchinfo.totalhits") from None
            if isinstance(hits, bool) or not isinstance(hits, int) or hits < 0:
                raise ResponseParseError(f"totalhits is not a nonnegative integer: {hits!r}")
            return hits
        match = re.search(self.config.count_pattern, text)
        if match is None:
            raise ResponseParseError("count pattern did not match the response")
        raw = match.group(1) if match.groups() else match.group(0)
        digits = re.sub(r"[\s,.']", "", raw)
        if not digits.isdigit():
            raise ResponseParseError(f"extracted count is not an integer: {raw!r}")
        return int(digits)

    def fetch_count(self, termset) -> QueryRecord:
        ts = termset if isinstance(termset, TermSet) else TermSet(termset)
        query = build_query(ts)
        params = self.params(query)
        cfg = self.config
        last_error = None
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                self._sleep(cfg.backoff * 2 ** (attempt - 1))
            self.limiter.wait()
            self.requests_made += 1
            try:
                resp = self.transport(cfg.endpoint_url, params, cfg.timeout)
            except (requests.RequestException, OSError) as exc:
                last_error = NetworkError(f"{ts}: {exc}")
                log.info("request for %s failed (%s), attempt %d", ts, exc, attempt + 1)
                continue
            if _retryable(resp.status):
                last_error = NetworkError(f"{ts}: HTTP {resp.status}")
                log.info("HTTP %d for %s, attempt %d", resp.status, ts, attempt + 1)
                continue
            if resp.status >= 400:
                raise NetworkError(f"{ts}: HTTP {resp.status}")
            count = self.parse_count(resp.text)
            return QueryRecord(ts, query, count, self._now(), resp.status)
        raise last_error


def fetch_count(config: ProviderConfig, termset, client: CountClient | None = None) -> QueryRecord:
    return (client or CountClient(config)).fetch_count(termset)


@dataclass
class SnapshotCache:
    """Append-only log of fetched counts for one provider."""

    provider: str
    normalizer_term: str = "the"
    records: list[QueryRecord] = field(default_factory=list)

    def append(self, record: QueryRecord) -> None:
        self.records.append(record)

    def lookup(self, termset) -> QueryRecord | None:
        ts = termset if isinstance(termset, TermSet) else TermSet(termset)
        for rec in reversed(self.records):
            if rec.termset == ts:
                return rec
        return None

    def snapshot(self, termsets: Iterable | None = None,
                 normalizer_term: str | None = None) -> FrequencySnapshot:
        """Snapshot derived from the log; the latest record for a set wins."""
        latest: dict[TermSet, QueryRecord] = {}
        for rec in self.records:
            latest[rec.termset] = rec
        norm_ts = TermSet((normalizer_term or self.normalizer_term,))
        if norm_ts not in latest:
            raise MissingCountError(norm_ts)
        n = latest[norm_ts].count
        if n <= 0:
            raise FetchError(f"normalizer term {norm_ts} has count {n}")
        if termsets is None:
            wanted = list(latest)
        else:
            wanted = []
            for ts in termsets:
                ts = ts if isinstance(ts, TermSet) else TermSet(ts)
                wanted.extend([ts, *ts.singletons()])
        counts = {}
        for ts in wanted:
            if ts not in latest:
                raise MissingCountError(ts)
            counts[ts] = latest[ts].count
        used = [latest[ts].fetched_at for ts in counts] + [latest[norm_ts].fetched_at]
        prov = Provenance(self.provider, rfc3339(max(used)), norm_ts.terms[0])
        return FrequencySnapshot(counts, n, prov)

    def to_dict(self) -> dict:
        ordered = sorted(self.records, key=lambda r: r.fetched_at)
        return {
            "version": CACHE_VERSION,
            "provider": self.provider,
            "normalizer_term": self.normalizer_term,
            "records": [r.to_dict() for r in ordered],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SnapshotCache":
        if data.get("version") != CACHE_VERSION:
            raise SchemaVersionError(f"unsupported cache version {data.get('version')!r}")
        try:
            records = [QueryRecord.from_dict(r) for r in data["records"]]
            return cls(data["provider"], data["normalizer_term"], records)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"malformed cache file: {exc}") from exc


def cache_write(cache: SnapshotCache, path) -> None:
    text = json.dumps(cache.to_dict(), indent=2, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def cache_read(path) -> SnapshotCache:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    return SnapshotCache.from_dict(data)


def fetch_plan(config: ProviderConfig, termsets: Sequence) -> list[TermSet]:
    """Every set a snapshot needs: the normalizer, each set and its singletons."""
    plan = {TermSet((config.normalizer_term,)): None}
    for ts in termsets:
        ts = ts if isinstance(ts, TermSet) else TermSet(ts)
        for member in (*ts.singletons(), ts):
            plan.setdefault(member, None)
    return list(plan)


def build_snapshot(config: ProviderConfig, termsets: Sequence, cache: SnapshotCache,
                   client: CountClient | None = None) -> FrequencySnapshot:
    """Fetch whatever the cache lacks, then derive the snapshot from the cache.

    Successful fetches are appended to ``cache`` even when others fail, but
    no snapshot is returned unless every count is available.
    """
    if not termsets:
        raise ValueError("build_snapshot needs at least one term set")
    if cache.provider != config.provider_id:
        log.warning("cache provider %r differs from config %r", cache.provider, config.provider_id)
    failures = {}
    for ts in fetch_plan(config, termsets):
        if cache.lookup(ts) is not None:
            continue
        if client is None:
            client = CountClient(config)
        try:
            cache.append(client.fetch_count(ts))
        except FetchError as exc:
            failures[ts] = exc
    if failures:
        raise SnapshotBuildError(failures)
    return cache.snapshot(termsets, normalizer_term=config.normalizer_term)
