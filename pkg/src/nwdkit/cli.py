"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 undefined NWD, 4 missing or failed
counts.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import corpus as corpus_mod
from .classify import LabeledClasses, evaluate
from .cluster import DistanceMatrix, SpectralParams, gap_statistic, pairwise_matrix, spectral_cluster
from .core import nwd
from .errors import FetchError, MissingCountError, NwdError, UndefinedNwdError
from .providers import ProviderConfig, SnapshotCache, build_snapshot, cache_read, cache_write
from .snapshot import Provenance, TermSet, read_snapshot, write_snapshot

log = logging.getLogger("nwdkit")

EXIT_OK, EXIT_INPUT, EXIT_UNDEFINED, EXIT_COUNTS = 0, 2, 3, 4


class ExperimentError(ValueError):
    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line else f"{path}: "
        super().__init__(where + message)
        self.line = line


@dataclass
class Source:
    kind: str  # corpus | snapshot | provider | matrix
    value: object
    tokenizer: corpus_mod.TokenizerConfig = field(default_factory=corpus_mod.TokenizerConfig)

    def snapshot(self, termsets):
        if self.kind == "matrix":
            raise ExperimentError("a distance-matrix source has no counts; it only serves cluster")
        termsets = [ts if isinstance(ts, TermSet) else TermSet(ts) for ts in termsets]
        if self.kind == "corpus":
            index = corpus_mod.ingest(corpus_mod.read_corpus(self.value), self.tokenizer)
            prov = Provenance("corpus", corpus_mod.corpus_timestamp(self.value))
            return corpus_mod.snapshot(index, termsets, prov)
        if self.kind == "snapshot":
            return read_snapshot(self.value).restrict(termsets)
        cfg = self.value if isinstance(self.value, ProviderConfig) else ProviderConfig.load(self.value)
        if cfg.cache_path and Path(cfg.cache_path).exists():
            cache = cache_read(cfg.cache_path)
        else:
            cache = SnapshotCache(cfg.provider_id, cfg.normalizer_term)
        try:
            return build_snapshot(cfg, termsets, cache)
        finally:
            if cfg.cache_path:
                cache_write(cache, cfg.cache_path)


def _source_from_args(args):
    kinds = ("snapshot", "corpus", "provider", "matrix")
    chosen = [(k, getattr(args, k)) for k in kinds if getattr(args, k, None)]
    if len(chosen) > 1:
        raise ExperimentError("give only one count source flag")
    return Source(*chosen[0]) if chosen else None


def _line_of(text, key):
    needle = f'"{key}"'
    for no, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return no
    return None


def load_experiment(path, task):
    """Parse and validate an experiment file before any I/O on its source."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ExperimentError(f"cannot read experiment file: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ExperimentError(exc.msg, path, exc.lineno) from exc
    if not isinstance(data, dict):
        raise ExperimentError("experiment must be a JSON object", path, 1)

    def fail(message, key):
        raise ExperimentError(message, path, _line_of(text, key))

    if data.get("task", task) != task:
        fail(f"experiment task is {data.get('task')!r}, expected {task!r}", "task")
    base = path.parent
    exp = {"format": data.get("format", "json"), "output": data.get("output")}
    if exp["output"]:
        exp["output"] = str(base / exp["output"])
    if exp["format"] not in ("json", "text"):
        fail("format must be 'json' or 'text'", "format")

    source = None
    raw_source = data.get("source")
    if raw_source is not None:
        if not isinstance(raw_source, dict) or len(raw_source) != 1:
            fail("source must be an object with exactly one of corpus, snapshot, provider, matrix", "source")
        (kind, value), = raw_source.items()
        if kind not in ("corpus", "snapshot", "provider", "matrix"):
            fail(f"unknown source kind {kind!r}", "source")
        if kind == "matrix" and task != "cluster":
            fail("a matrix source is only valid for cluster experiments", "matrix")
        if kind == "provider" and isinstance(value, dict):
            try:
                value = ProviderConfig.from_dict(value)
            except (TypeError, ValueError) as exc:
                fail(f"invalid provider config: {exc}", "provider")
            if value.cache_path and not Path(value.cache_path).is_absolute():
                value = replace(value, cache_path=str(base / value.cache_path))
        elif isinstance(value, str):
            value = str(base / value)
        else:
            fail(f"source {kind} must be a path", "source")
        source = Source(kind, value)
    if "tokenizer" in data:
        try:
            tok = corpus_mod.TokenizerConfig.from_dict(data["tokenizer"])
        except (TypeError, ValueError) as exc:
            fail(f"invalid tokenizer: {exc}", "tokenizer")
        exp["tokenizer"] = tok
        if source is not None:
            source.tokenizer = tok
    exp["source"] = source

    if task == "classify":
        classes = data.get("classes")
        if not isinstance(classes, dict):
            fail("classes must map labels to lists of terms", "classes")
        for label, terms in classes.items():
            if not isinstance(terms, list) or not all(isinstance(t, str) for t in terms):
                fail(f"class {label!r} must be a list of strings", label)
            if len({t.casefold() for t in terms}) < 2:
                fail(f"class {label!r} needs at least two distinct terms", label)
        try:
            exp["classes"] = LabeledClasses(classes)
        except ValueError as exc:
            fail(str(exc), "classes")
        items = data.get("items")
        if not isinstance(items, list) or not items:
            fail("items must be a non-empty list of [term, label] pairs", "items")
        parsed = []
        for entry in items:
            if not (isinstance(entry, list) and len(entry) == 2 and all(isinstance(e, str) for e in entry)):
                fail(f"bad item {entry!r}; expected [term, label]", "items")
            if entry[1] not in exp["classes"].classes:
                fail(f"item {entry[0]!r} has unknown label {entry[1]!r}", entry[0])
            parsed.append((entry[0], entry[1]))
        exp["items"] = parsed
    else:
        terms = data.get("terms")
        if terms is None and source is not None and source.kind == "matrix":
            pass  # labels come from the CSV header
        elif not isinstance(terms, list) or len(terms) < 1 or not all(isinstance(t, str) for t in terms):
            fail("terms must be a non-empty list of strings", "terms")
        exp["terms"] = terms
        for key, default in (("kmax", None), ("B", 100), ("seed", 0)):
            value = data.get(key, default)
            if value is None:
                exp[key] = None
                continue
            if isinstance(value, bool) or not isinstance(value, int):
                fail(f"{key} must be an integer", key)
            exp[key] = value
        if exp["kmax"] is not None and terms and not 1 <= exp["kmax"] <= len(terms):
            fail(f"kmax must lie in [1, {len(terms)}]", "kmax")
        if exp["B"] < 1:
            fail("B must be >= 1", "B")
        try:
            exp["spectral"] = SpectralParams(**data.get("spectral", {}))
        except (TypeError, ValueError) as exc:
            fail(f"invalid spectral parameters: {exc}", "spectral")
    return exp


def _emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _fmt_bits(x):
    return "inf" if math.isinf(x) else f"{x:.3f}"


def cmd_index(args):
    tokenizer = corpus_mod.TokenizerConfig(
        normalization=args.normalization,
        casefold=not args.no_casefold,
        token_pattern=args.token_pattern,
    )
    index = corpus_mod.ingest(corpus_mod.read_corpus(args.corpus_path), tokenizer)
    vocab = index.vocabulary
    termsets = [TermSet((t,)) for t in vocab]
    if args.all_pairs:
        termsets += [TermSet((a, b)) for i, a in enumerate(vocab) for b in vocab[i + 1:]]
    termsets += [TermSet([t for t in s.split(",") if t.strip()]) for s in args.set or []]
    prov = Provenance("corpus", corpus_mod.corpus_timestamp(args.corpus_path))
    snap = corpus_mod.snapshot(index, termsets, prov)
    if args.out:
        write_snapshot(snap, args.out)
    else:
        sys.stdout.write(_dumps(snap.to_dict()))
    stats = corpus_mod.normalizer(index)
    log.info("indexed %d pages, %d terms, N=%d", stats.page_count, len(vocab), stats.incidence_count)
    return EXIT_OK


def cmd_nwd(args):
    source = _source_from_args(args)
    if source is None:
        raise ExperimentError("one of --snapshot, --corpus, --provider is required")
    X = TermSet(args.terms)
    snap = source.snapshot([X])
    value = nwd(snap, X, clamp=args.clamp)
    if args.format == "json":
        text = _dumps(value.to_dict())
    else:
        lines = [f"terms: {' '.join(X.terms)}",
                 f"nwd: {value.value:.3f}" if value.defined else "nwd: undefined",
                 f"defined: {'yes' if value.defined else 'no'}",
                 f"code length of set: {_fmt_bits(value.code_length_set)} bits"]
        for term, bits in zip(X.terms, value.code_lengths_members):
            lines.append(f"code length of {term}: {_fmt_bits(bits)} bits")
        text = "\n".join(lines) + "\n"
    if value.out_of_range_warning:
        print(f"warning: NWD {value.value} lies outside [0, 1]; counts are not event-consistent",
              file=sys.stderr)
    _emit(text, args.out)
    return EXIT_OK if value.defined else EXIT_UNDEFINED


def _experiment(args, task):
    exp = load_experiment(args.experiment, task)
    source = _source_from_args(args) or exp["source"]
    if source is None:
        raise ExperimentError("no count source: set one in the experiment or pass a source flag")
    if "tokenizer" in exp:
        source.tokenizer = exp["tokenizer"]
    out = args.out or exp["output"]
    fmt = args.format or exp["format"]
    return exp, source, out, fmt


def cmd_classify(args):
    exp, source, out, fmt = _experiment(args, "classify")
    classes = exp["classes"]
    items = exp["items"]
    snap = source.snapshot(classes.termsets_for([x for x, _ in items]))
    report = evaluate(snap, classes, items, clamp=args.clamp)
    text = report.to_text()
    _emit(_dumps(report.to_dict()) if fmt == "json" else text, out)
    if out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_cluster(args):
    exp, source, out, fmt = _experiment(args, "cluster")
    B = args.B if args.B is not None else exp["B"]
    seed = args.seed if args.seed is not None else exp["seed"]
    terms = exp["terms"]
    if source.kind == "matrix":
        matrix = DistanceMatrix.from_csv(source.value)
        if terms is not None and [TermSet((t,)).terms[0] for t in terms] != list(matrix.labels):
            raise ExperimentError("terms do not match the matrix header")
    else:
        if terms is None:
            raise ExperimentError("terms are required unless the source is a distance matrix")
        pairs = [TermSet((a, b)) for i, a in enumerate(terms) for b in terms[i + 1:]]
        snap = source.snapshot(pairs or [TermSet(terms)])
        matrix = pairwise_matrix(snap, terms, clamp=args.clamp)
    n = len(matrix)
    kmax = args.kmax if args.kmax is not None else exp["kmax"]
    if kmax is None:
        kmax = min(n, 10)
    if not 1 <= kmax <= n:
        raise ExperimentError(f"kmax must lie in [1, {n}]")
    if B < 1:
        raise ExperimentError("B must be >= 1")
    if args.matrix_out:
        matrix.to_csv(args.matrix_out)
    params = replace(exp["spectral"], seed=seed)
    curve = gap_statistic(matrix, kmax, B=B, seed=seed, params=params)
    assignment = spectral_cluster(matrix, curve.selected_k, params)
    groups = {}
    for label, c in zip(matrix.labels, assignment.assignment):
        groups.setdefault(c, []).append(label)

    lines = ["   k         W       gap         s"]
    for k, w, g, s in zip(curve.ks, curve.W, curve.gap, curve.s):
        lines.append(f"{k:4d}  {w:8.3f}  {g:8.3f}  {s:8.3f}")
    note = " (no k satisfied the gap rule)" if curve.no_selection else ""
    lines.append(f"selected k: {curve.selected_k}{note}")
    for c in sorted(groups):
        lines.append(f"cluster {c}: {', '.join(groups[c])}")
    text = "\n".join(lines) + "\n"

    report = {
        "terms": list(matrix.labels),
        "kmax": kmax,
        "B": B,
        "seed": seed,
        "matrix": matrix.d.tolist(),
        "gap": curve.to_dict(),
        "assignment": assignment.to_dict(),
    }
    _emit(_dumps(report) if fmt == "json" else text, out)
    if out:
        sys.stdout.write(text)
    return EXIT_OK


def _add_source_flags(p):
    g = p.add_argument_group("count source (one of)")
    g.add_argument("--snapshot", metavar="PATH", help="snapshot or provider cache file")
    g.add_argument("--corpus", metavar="PATH", help="directory of text files or one-document-per-line file")
    g.add_argument("--provider", metavar="CONFIG", help="provider config JSON")


def _add_output_flags(p, default_format="text"):
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=("json", "text"), default=default_format)
    p.add_argument("--clamp", action="store_true", help="clip out-of-range NWD values to [0, 1]")


def build_parser():
    parser = argparse.ArgumentParser(prog="nwdkit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="index a corpus and write a frequency snapshot")
    p.add_argument("corpus_path")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--set", action="append", metavar="T1,T2,...", help="extra term set to count")
    p.add_argument("--all-pairs", action="store_true", help="count every pair of vocabulary terms")
    p.add_argument("--normalization", default="NFC", choices=("NFC", "NFD", "NFKC", "NFKD"))
    p.add_argument("--no-casefold", action="store_true")
    p.add_argument("--token-pattern", default=corpus_mod.TokenizerConfig.token_pattern)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("nwd", help="NWD of one set of terms")
    p.add_argument("terms", nargs="+")
    _add_source_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=cmd_nwd)

    p = sub.add_parser("classify", help="run a classification experiment")
    p.add_argument("experiment")
    _add_source_flags(p)
    _add_output_flags(p, default_format=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("cluster", help="run a gap-spectral clustering experiment")
    p.add_argument("experiment")
    _add_source_flags(p)
    _add_output_flags(p, default_format=None)
    p.add_argument("--matrix", metavar="CSV", help="cluster a precomputed distance matrix instead of counts")
    p.add_argument("--seed", type=int)
    p.add_argument("--kmax", type=int)
    p.add_argument("--B", type=int, help="reference draws (default 100)")
    p.add_argument("--matrix-out", metavar="CSV", help="also write the distance matrix as CSV")
    p.set_defaults(func=cmd_cluster)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MissingCountError, FetchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COUNTS
    except UndefinedNwdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED
    except (NwdError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
