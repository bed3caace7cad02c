"""Term sets and frequency snapshots.

A :class:`FrequencySnapshot` is the unit of reproducibility: every NWD
computation reads counts from one, regardless of whether the counts came
from a local corpus, a cache file, or a live search API.
"""
from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

from .errors import MissingCountError, SchemaError, SchemaVersionError

SNAPSHOT_VERSION = 1


def normalize_term(term: str) -> str:
    """NFC-normalize, case-fold and collapse internal whitespace."""
    if not isinstance(term, str):
        raise TypeError(f"term must be a string, got {type(term).__name__}")
    folded = unicodedata.normalize("NFC", unicodedata.normalize("NFC", term).casefold())
    folded = " ".join(folded.split())
    if not folded:
        raise ValueError(f"empty term after normalization: {term!r}")
    return folded


@dataclass(frozen=True, order=True)
class TermSet:
    """A normalized, sorted, duplicate-free set of query terms.

    >>> TermSet(["Macbeth", "shakespeare", "MACBETH"])
    TermSet(terms=('macbeth', 'shakespeare'))
    """

    terms: tuple[str, ...]

    def __post_init__(self):
        raw = [self.terms] if isinstance(self.terms, str) else list(self.terms)
        terms = tuple(sorted({normalize_term(t) for t in raw}))
        if not terms:
            raise ValueError("a term set needs at least one term")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def of(cls, *terms: str) -> "TermSet":
        return cls(terms)

    def __iter__(self) -> Iterator[str]:
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term) -> bool:
        return normalize_term(term) in self.terms

    def __str__(self) -> str:
        return "{" + ", ".join(self.terms) + "}"

    def singletons(self) -> list["TermSet"]:
        return [TermSet((t,)) for t in self.terms]

    def union(self, other: "TermSet | Iterable[str] | str") -> "TermSet":
        extra = [other] if isinstance(other, str) else list(other)
        return TermSet(self.terms + tuple(extra))

    def issubset(self, other: "TermSet") -> bool:
        return set(self.terms) <= set(other.terms)


@dataclass(frozen=True)
class Provenance:
    provider: str
    timestamp: str | None = None
    normalizer_term: str | None = None

    def to_dict(self) -> dict:
        return {
            "provider": self.provider,
            "timestamp": self.timestamp,
            "normalizer_term": self.normalizer_term,
        }


def rfc3339(moment: datetime) -> str:
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return moment.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class FrequencySnapshot:
    """Immutable map from term sets to page counts, plus the normalizer N.

    Construction enforces that each stored multi-term set has all of its
    singletons stored too. ``consistent`` records whether the counts obey
    ``f(X) <= f({x}) <= N`` for every stored set; exact corpus counts always
    do, approximate search-engine counts may not.
    """

    counts: Mapping[TermSet, int]
    normalizer: float
    provenance: Provenance = field(default_factory=lambda: Provenance("unknown"))
    consistent: bool = field(init=False)

    def __post_init__(self):
        counts = {}
        for key, value in dict(self.counts).items():
            ts = key if isinstance(key, TermSet) else TermSet(key)
            if isinstance(value, bool) or int(value) != value or value < 0:
                raise ValueError(f"count for {ts} must be a nonnegative integer, got {value!r}")
            counts[ts] = int(value)
        normalizer = float(self.normalizer)
        if not normalizer > 0 or normalizer == float("inf"):
            raise ValueError(f"normalizer must be a positive finite number, got {self.normalizer!r}")
        for ts in counts:
            if len(ts) > 1:
                for single in ts.singletons():
                    if single not in counts:
                        raise ValueError(f"{ts} is stored but its singleton {single} is not")
        consistent = all(
            counts[ts] <= counts[s] <= normalizer for ts in counts for s in ts.singletons()
        )
        object.__setattr__(self, "counts", MappingProxyType(counts))
        object.__setattr__(self, "normalizer", normalizer)
        object.__setattr__(self, "consistent", consistent)

    def __contains__(self, termset) -> bool:
        return _as_termset(termset) in self.counts

    def __len__(self) -> int:
        return len(self.counts)

    def count(self, termset) -> int:
        ts = _as_termset(termset)
        try:
            return self.counts[ts]
        except KeyError:
            raise MissingCountError(ts) from None

    def restrict(self, termsets: Iterable[TermSet]) -> "FrequencySnapshot":
        """Sub-snapshot holding the given sets and their singletons."""
        keep = {}
        for ts in termsets:
            ts = _as_termset(ts)
            for member in [ts, *ts.singletons()]:
                keep[member] = self.count(member)
        return FrequencySnapshot(keep, self.normalizer, self.provenance)

    def to_dict(self) -> dict:
        rows = [{"terms": list(ts.terms), "count": c} for ts, c in sorted(self.counts.items())]
        return {
            "version": SNAPSHOT_VERSION,
            "kind": "frequency-snapshot",
            "normalizer": self.normalizer,
            "provenance": self.provenance.to_dict(),
            "consistent": self.consistent,
            "counts": rows,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FrequencySnapshot":
        if data.get("version") != SNAPSHOT_VERSION:
            raise SchemaVersionError(f"unsupported snapshot version {data.get('version')!r}")
        try:
            prov = data.get("provenance") or {}
            counts = {TermSet(row["terms"]): row["count"] for row in data["counts"]}
            return cls(
                counts,
                data["normalizer"],
                Provenance(
                    prov.get("provider", "unknown"),
                    prov.get("timestamp"),
                    prov.get("normalizer_term"),
                ),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed snapshot: {exc}") from exc


def _as_termset(value) -> TermSet:
    return value if isinstance(value, TermSet) else TermSet(value)


def write_snapshot(snapshot: FrequencySnapshot, path) -> None:
    text = json.dumps(snapshot.to_dict(), indent=2, sort_keys=True, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_snapshot(path) -> FrequencySnapshot:
    """Load a snapshot file, or derive one from a provider cache file."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    if "records" in data:
        from .providers import SnapshotCache

        return SnapshotCache.from_dict(data).snapshot()
    return FrequencySnapshot.from_dict(data)
