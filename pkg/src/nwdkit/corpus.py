"""Offline corpus index: exact page sets and counts for a document collection.

Each document plays the role of one web page. The pages matching a term are
its posting list; the pages matching a term set are the intersection of the
members' posting lists. The normalizer is the number of distinct
(page, term) incidences, which equals the average number of terms per page
times the number of pages.
"""
from __future__ import annotations

import logging
import re
import unicodedata
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import EmptyCorpusError
from .snapshot import FrequencySnapshot, Provenance, TermSet, rfc3339

log = logging.getLogger(__name__)

_EMPTY = np.empty(0, dtype=np.int64)


@dataclass(frozen=True)
class TokenizerConfig:
    normalization: str = "NFC"
    casefold: bool = True
    # runs of alphanumeric codepoints; underscore counts as a separator
    token_pattern: str = r"[^\W_]+"

    def __post_init__(self):
        if self.normalization not in ("NFC", "NFD", "NFKC", "NFKD"):
            raise ValueError(f"unknown normalization form {self.normalization!r}")
        re.compile(self.token_pattern)

    @classmethod
    def from_dict(cls, data) -> "TokenizerConfig":
        allowed = {"normalization", "casefold", "token_pattern"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown tokenizer option(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {
            "normalization": self.normalization,
            "casefold": self.casefold,
            "token_pattern": self.token_pattern,
        }

    def tokenize(self, text: str) -> list[str]:
        text = unicodedata.normalize(self.normalization, text)
        if self.casefold:
            text = unicodedata.normalize(self.normalization, text.casefold())
        return re.findall(self.token_pattern, text)


@dataclass(frozen=True)
class Document:
    id: str
    text: str


@dataclass(frozen=True)
class CorpusStats:
    page_count: int
    incidence_count: int
    alpha: float
    N: float


class PostingIndex:
    """Inverted index over an ingested corpus. Build with :func:`ingest`."""

    def __init__(self, doc_ids, doc_tokens, tokenizer: TokenizerConfig):
        self.doc_ids: tuple[str, ...] = tuple(doc_ids)
        self.tokenizer = tokenizer
        self._doc_tokens = tuple(tuple(t) for t in doc_tokens)
        postings: dict[str, list[int]] = {}
        for i, tokens in enumerate(self._doc_tokens):
            for tok in dict.fromkeys(tokens):
                postings.setdefault(tok, []).append(i)
        self._postings = {t: np.asarray(p, dtype=np.int64) for t, p in postings.items()}
        self._phrases: dict[tuple[str, ...], np.ndarray] = {}

    @property
    def page_count(self) -> int:
        return len(self.doc_ids)

    @property
    def incidence_count(self) -> int:
        return sum(len(p) for p in self._postings.values())

    @property
    def vocabulary(self) -> list[str]:
        return sorted(self._postings)

    def document_tokens(self, doc_index: int) -> tuple[str, ...]:
        return self._doc_tokens[doc_index]

    def _term_postings(self, term: str) -> np.ndarray:
        tokens = tuple(self.tokenizer.tokenize(term))
        if not tokens:
            return _EMPTY
        if len(tokens) == 1:
            return self._postings.get(tokens[0], _EMPTY)
        cached = self._phrases.get(tokens)
        if cached is None:
            cached = self._phrase_postings(tokens)
            self._phrases[tokens] = cached
        return cached

    def _phrase_postings(self, tokens) -> np.ndarray:
        lists = [self._postings.get(t, _EMPTY) for t in tokens]
        candidates = lists[0]
        for other in lists[1:]:
            candidates = np.intersect1d(candidates, other, assume_unique=True)
        width = len(tokens)
        hits = []
        for i in candidates:
            doc = self._doc_tokens[i]
            if any(doc[s : s + width] == tokens for s in range(len(doc) - width + 1)):
                hits.append(i)
        return np.asarray(hits, dtype=np.int64)

    def postings(self, term: str) -> list[str]:
        """Ids of the documents matching ``term`` (a token or a phrase)."""
        return [self.doc_ids[i] for i in self._term_postings(term)]

    def frequency(self, termset) -> int:
        X = termset if isinstance(termset, TermSet) else TermSet(termset)
        return kernels.intersect_count([self._term_postings(t) for t in X])


def ingest(documents: Iterable[Document], tokenizer: TokenizerConfig | None = None) -> PostingIndex:
    tokenizer = tokenizer or TokenizerConfig()
    ids, token_lists, seen = [], [], set()
    for doc in documents:
        if not isinstance(doc.text, str):
            log.warning("skipping document %r: text is %s, not str", doc.id, type(doc.text).__name__)
            continue
        if doc.id in seen:
            raise ValueError(f"duplicate document id {doc.id!r}")
        seen.add(doc.id)
        ids.append(str(doc.id))
        token_lists.append(tokenizer.tokenize(doc.text))
    if not ids:
        raise EmptyCorpusError("corpus contains no documents")
    return PostingIndex(ids, token_lists, tokenizer)


def frequency(index: PostingIndex, termset) -> int:
    return index.frequency(termset)


def normalizer(index: PostingIndex) -> CorpusStats:
    incidences = index.incidence_count
    return CorpusStats(
        page_count=index.page_count,
        incidence_count=incidences,
        alpha=incidences / index.page_count,
        N=float(incidences),
    )


def snapshot(
    index: PostingIndex,
    termsets: Sequence = (),
    provenance: Provenance | None = None,
) -> FrequencySnapshot:
    """Exact counts for the requested sets and all of their singletons."""
    stats = normalizer(index)
    if stats.incidence_count == 0:
        raise EmptyCorpusError("corpus contains no terms, so N would be 0")
    counts = {}
    for ts in termsets:
        ts = ts if isinstance(ts, TermSet) else TermSet(ts)
        for member in (ts, *ts.singletons()):
            if member not in counts:
                counts[member] = index.frequency(member)
    return FrequencySnapshot(counts, stats.N, provenance or Provenance("corpus"))


def read_corpus(path) -> list[Document]:
    """Documents from a directory of UTF-8 files, or a one-document-per-line file.

    Directories are walked recursively in sorted path order and each file's
    id is its path relative to the directory. In a line file the id is the
    1-based line number. Undecodable files are skipped with a warning.
    """
    path = Path(path)
    if path.is_dir():
        docs = []
        for f in sorted(p for p in path.rglob("*") if p.is_file()):
            try:
                text = f.read_text(encoding="utf-8")
            except UnicodeDecodeError as exc:
                log.warning("skipping %s: not valid UTF-8 (%s)", f, exc)
                continue
            docs.append(Document(f.relative_to(path).as_posix(), text))
        return docs
    if path.is_file():
        text = path.read_text(encoding="utf-8")
        return [Document(str(i), line) for i, line in enumerate(text.splitlines(), start=1)]
    raise FileNotFoundError(f"corpus path not found: {path}")


def corpus_timestamp(path) -> str:
    """Latest modification time under ``path``, as RFC 3339."""
    path = Path(path)
    files = [p for p in path.rglob("*") if p.is_file()] if path.is_dir() else [path]
    latest = max((p.stat().st_mtime for p in files), default=path.stat().st_mtime)
    return rfc3339(datetime.fromtimestamp(latest, tz=timezone.utc))
